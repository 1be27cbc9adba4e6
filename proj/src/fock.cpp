// fock.cpp - truncated Fock basis, ladder algebra and beamsplitter rotations

#include "lch/fock.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace lch {

namespace {

std::string key_of(std::span<const std::uint8_t> occ) {
    return std::string(reinterpret_cast<const char*>(occ.data()), occ.size());
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

cplx ipow(cplx base, int exponent) {
    cplx r = 1.0;
    for (int i = 0; i < exponent; ++i) r *= base;
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// Representation of a 2x2 single-particle unitary on the N-quanta sector of two
// modes, indexed by the occupation of the first mode.
Eigen::MatrixXcd two_mode_block(const Eigen::Matrix2cd& u, int total) {
    Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(total + 1, total + 1);
    for (int k = 0; k <= total; ++k) {
        for (int a = 0; a <= k; ++a) {
            const cplx from_p = binomial(k, a) * ipow(u(0, 0), a) * ipow(u(1, 0), k - a);
            for (int b = 0; b <= total - k; ++b) {
                const cplx from_q = binomial(total - k, b) * ipow(u(0, 1), b) * ipow(u(1, 1), total - k - b);
                block(a + b, k) += from_p * from_q;
            }
        }
    }
    for (int j = 0; j <= total; ++j) {
        for (int k = 0; k <= total; ++k) {
            block(j, k) *= std::sqrt(factorial(j) * factorial(total - j) / (factorial(k) * factorial(total - k)));
        }
    }
    return block;
}

} // namespace

std::optional<std::size_t> fock_dimension(int n_modes, int n_cut) {
    if (n_modes < 1 || n_cut < 0) return std::nullopt;
    // C(n_modes + n_cut, n_cut) built incrementally; exact in 64 bits below the guard
    unsigned long long d = 1;
    for (int i = 1; i <= n_cut; ++i) {
        d = d * static_cast<unsigned long long>(n_modes + i) / static_cast<unsigned long long>(i);
        if (d > FockBasis::kMaxDimension) return std::nullopt;
    }
    return static_cast<std::size_t>(d);
}

FockBasis::FockBasis(int n_modes, int n_cut) : n_modes_(n_modes), n_cut_(n_cut) {
    if (n_modes < 1) throw std::invalid_argument("FockBasis: n_modes must be >= 1");
    if (n_cut < 0 || n_cut > 255) throw std::invalid_argument("FockBasis: n_cut must lie in [0, 255]");
    const auto d = fock_dimension(n_modes, n_cut);
    if (!d) throw std::length_error("FockBasis: dimension exceeds " + std::to_string(kMaxDimension));
    dim_ = *d;

    const auto m = static_cast<std::size_t>(n_modes);
    occupations_.reserve(dim_ * m);
    totals_.reserve(dim_);
    std::vector<std::uint8_t> current(m, 0);
    std::function<void(std::size_t, int, int)> emit = [&](std::size_t pos, int remaining, int shell) {
        if (pos + 1 == m) {
            current[pos] = static_cast<std::uint8_t>(remaining);
            occupations_.insert(occupations_.end(), current.begin(), current.end());
            totals_.push_back(static_cast<std::uint8_t>(shell));
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            current[pos] = static_cast<std::uint8_t>(v);
            emit(pos + 1, remaining - v, shell);
        }
    };
    for (int shell = 0; shell <= n_cut; ++shell) emit(0, shell, shell);

    lookup_.reserve(dim_);
    for (std::size_t s = 0; s < dim_; ++s) lookup_.emplace(key_of(occupation(s)), s);

    lower_.assign(dim_ * m, -1);
    raise_.assign(dim_ * m, -1);
    lowering_offsets_.assign(dim_ + 1, 0);
    std::vector<std::uint8_t> scratch(m);
    for (std::size_t s = 0; s < dim_; ++s) {
        const auto occ = occupation(s);
        std::copy(occ.begin(), occ.end(), scratch.begin());
        for (std::size_t k = 0; k < m; ++k) {
            if (occ[k] == 0) continue;
            --scratch[k];
            const auto target = lookup_.at(key_of(scratch));
            ++scratch[k];
            lower_[s * m + k] = static_cast<std::int32_t>(target);
            raise_[target * m + k] = static_cast<std::int32_t>(s);
            lowerings_.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(target), std::sqrt(double(occ[k]))});
        }
        lowering_offsets_[s + 1] = lowerings_.size();
    }
}

std::optional<std::size_t> FockBasis::index_of(std::span<const std::uint8_t> occupation) const {
    if (static_cast<int>(occupation.size()) != n_modes_) return std::nullopt;
    auto it = lookup_.find(key_of(occupation));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::shared_ptr<const FockBasis> build_basis(int n_modes, int n_cut) {
    return std::make_shared<const FockBasis>(n_modes, n_cut);
}

ManyBodyState ManyBodyState::zero(std::shared_ptr<const FockBasis> basis) {
    ManyBodyState st;
    st.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(2 * basis->dim()));
    st.basis = std::move(basis);
    return st;
}

ManyBodyState ManyBodyState::product_vacuum(std::shared_ptr<const FockBasis> basis, cplx ground_amp, cplx excited_amp) {
    ManyBodyState st = zero(std::move(basis));
    st.amplitudes(0) = ground_amp;
    st.amplitudes(static_cast<Eigen::Index>(st.env_dim())) = excited_amp;
    return st;
}

void require_same_basis(const ManyBodyState& a, const ManyBodyState& b) {
    if (!a.basis || !b.basis || !(*a.basis == *b.basis) || a.amplitudes.size() != b.amplitudes.size()) {
        throw std::invalid_argument("many-body states live on different bases");
    }
}

ManyBodyState apply_ladder(const ManyBodyState& state, int mode, LadderKind kind) {
    const auto& basis = *state.basis;
    if (mode < 0 || mode >= basis.n_modes()) throw std::out_of_range("apply_ladder: mode index out of range");
    ManyBodyState out = ManyBodyState::zero(state.basis);
    const auto dim = basis.dim();
    for (int q = 0; q < 2; ++q) {
        const auto off = static_cast<std::size_t>(q) * dim;
        for (std::size_t s = 0; s < dim; ++s) {
            const cplx amp = state.amplitudes(static_cast<Eigen::Index>(off + s));
            if (amp == cplx(0.0)) continue;
            const int n = basis.occupation(s, mode);
            switch (kind) {
            case LadderKind::Create: {
                const auto t = basis.raised(s, mode);
                if (t >= 0) out.amplitudes(static_cast<Eigen::Index>(off + static_cast<std::size_t>(t))) += std::sqrt(n + 1.0) * amp;
                break;
            }
            case LadderKind::Annihilate: {
                const auto t = basis.lowered(s, mode);
                if (t >= 0) out.amplitudes(static_cast<Eigen::Index>(off + static_cast<std::size_t>(t))) += std::sqrt(double(n)) * amp;
                break;
            }
            case LadderKind::Number:
                out.amplitudes(static_cast<Eigen::Index>(off + s)) = double(n) * amp;
                break;
            }
        }
    }
    return out;
}

Eigen::MatrixXcd one_body_density(const ManyBodyState& state) {
    const auto& basis = *state.basis;
    const int m = basis.n_modes();
    const auto dim = basis.dim();
    Eigen::MatrixXcd density = Eigen::MatrixXcd::Zero(m, m);
    Eigen::VectorXcd w(m);
    // D_kl = sum_r conj((a_k psi)(r)) (a_l psi)(r), r below the cap
    for (int q = 0; q < 2; ++q) {
        const auto off = static_cast<std::size_t>(q) * dim;
        for (std::size_t r = 0; r < dim; ++r) {
            if (basis.total(r) >= basis.n_cut()) continue;
            bool any = false;
            for (int l = 0; l < m; ++l) {
                const auto s = static_cast<std::size_t>(basis.raised(r, l));
                w(l) = std::sqrt(basis.occupation(r, l) + 1.0) * state.amplitudes(static_cast<Eigen::Index>(off + s));
                any = any || w(l) != cplx(0.0);
            }
            if (any) density.noalias() += w.conjugate() * w.transpose();
        }
    }
    return density;
}

double total_quanta(const ManyBodyState& state) {
    const auto& basis = *state.basis;
    const auto dim = basis.dim();
    double sum = 0.0;
    for (int q = 0; q < 2; ++q) {
        for (std::size_t s = 0; s < dim; ++s) {
            sum += basis.total(s) * std::norm(state.amplitudes(static_cast<Eigen::Index>(static_cast<std::size_t>(q) * dim + s)));
        }
    }
    return sum;
}

RotationPlan plan_rotation(const Eigen::MatrixXcd& unitary) {
    const auto n = unitary.rows();
    if (unitary.cols() != n) throw std::invalid_argument("plan_rotation: matrix must be square");
    if ((unitary.adjoint() * unitary - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("plan_rotation: matrix is not unitary");
    }
    RotationPlan plan;
    plan.n_modes = static_cast<int>(n);
    Eigen::MatrixXcd a = unitary;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        for (Eigen::Index i = n - 1; i > j; --i) {
            const cplx x = a(j, j);
            const cplx y = a(i, j);
            if (std::abs(y) == 0.0) continue;
            const double r = std::hypot(std::abs(x), std::abs(y));
            Eigen::Matrix2cd g;
            g << std::conj(x) / r, std::conj(y) / r, -y / r, x / r;
            const Eigen::RowVectorXcd row_j = a.row(j);
            const Eigen::RowVectorXcd row_i = a.row(i);
            a.row(j) = g(0, 0) * row_j + g(0, 1) * row_i;
            a.row(i) = g(1, 0) * row_j + g(1, 1) * row_i;
            a(i, j) = 0.0;
            plan.rotations.push_back({static_cast<int>(j), static_cast<int>(i), g.adjoint()});
        }
    }
    plan.phases = a.diagonal();
    return plan;
}

void apply_two_mode(Eigen::VectorXcd& amplitudes, const FockBasis& basis, const GivensRotation& rotation) {
    const int p = rotation.p;
    const int q = rotation.q;
    const int cap = basis.n_cut();
    std::vector<Eigen::MatrixXcd> blocks(static_cast<std::size_t>(cap + 1));
    for (int total = 1; total <= cap; ++total) blocks[static_cast<std::size_t>(total)] = two_mode_block(rotation.u, total);

    const auto dim = basis.dim();
    std::vector<std::size_t> members(static_cast<std::size_t>(cap + 1));
    Eigen::VectorXcd x(cap + 1);
    for (std::size_t s = 0; s < dim; ++s) {
        if (basis.occupation(s, q) != 0) continue;
        const int total = basis.occupation(s, p);
        if (total == 0) continue;
        // members[k] holds the state with k quanta in p and total - k in q
        members[static_cast<std::size_t>(total)] = s;
        for (int k = total; k > 0; --k) {
            const auto down = static_cast<std::size_t>(basis.lowered(members[static_cast<std::size_t>(k)], p));
            members[static_cast<std::size_t>(k - 1)] = static_cast<std::size_t>(basis.raised(down, q));
        }
        const auto& block = blocks[static_cast<std::size_t>(total)];
        for (int qubit = 0; qubit < 2; ++qubit) {
            const auto off = static_cast<std::size_t>(qubit) * dim;
            for (int k = 0; k <= total; ++k) x(k) = amplitudes(static_cast<Eigen::Index>(off + members[static_cast<std::size_t>(k)]));
            const Eigen::VectorXcd y = block * x.head(total + 1);
            for (int k = 0; k <= total; ++k) amplitudes(static_cast<Eigen::Index>(off + members[static_cast<std::size_t>(k)])) = y(k);
        }
    }
}

ManyBodyState rotate_modes(const ManyBodyState& state, const RotationPlan& plan) {
    const auto& basis = *state.basis;
    if (plan.n_modes != basis.n_modes()) throw std::invalid_argument("rotate_modes: unitary size != n_modes");
    ManyBodyState out = state;
    const auto dim = basis.dim();
    for (std::size_t s = 0; s < dim; ++s) {
        cplx factor = 1.0;
        for (int k = 0; k < basis.n_modes(); ++k) {
            const int n = basis.occupation(s, k);
            if (n) factor *= ipow(plan.phases(k), n);
        }
        if (factor == cplx(1.0)) continue;
        out.amplitudes(static_cast<Eigen::Index>(s)) *= factor;
        out.amplitudes(static_cast<Eigen::Index>(dim + s)) *= factor;
    }
    for (auto it = plan.rotations.rbegin(); it != plan.rotations.rend(); ++it) apply_two_mode(out.amplitudes, basis, *it);
    return out;
}

ManyBodyState rotate_modes(const ManyBodyState& state, const Eigen::MatrixXcd& unitary) {
    return rotate_modes(state, plan_rotation(unitary));
}

ManyBodyState embed(const ManyBodyState& state, std::shared_ptr<const FockBasis> target) {
    const auto& from = *state.basis;
    if (target->n_modes() < from.n_modes() || target->n_cut() < from.n_cut()) {
        throw std::invalid_argument("embed: target basis is smaller than the source");
    }
    ManyBodyState out = ManyBodyState::zero(target);
    std::vector<std::uint8_t> padded(static_cast<std::size_t>(target->n_modes()), 0);
    for (std::size_t s = 0; s < from.dim(); ++s) {
        const auto occ = from.occupation(s);
        std::copy(occ.begin(), occ.end(), padded.begin());
        const auto t = *target->index_of(padded);
        out.amplitudes(static_cast<Eigen::Index>(t)) = state.amplitudes(static_cast<Eigen::Index>(s));
        out.amplitudes(static_cast<Eigen::Index>(target->dim() + t)) =
            state.amplitudes(static_cast<Eigen::Index>(from.dim() + s));
    }
    return out;
}

Eigen::MatrixXcd completing_unitary(const Eigen::VectorXcd& mode) {
    if (std::abs(mode.norm() - 1.0) > 1e-10) throw std::invalid_argument("completing_unitary: mode must be normalized");
    const Eigen::MatrixXcd column = mode;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(column);
    Eigen::MatrixXcd q = qr.householderQ();
    // q e_0 equals mode up to a unit phase; replacing the column keeps q unitary
    q.col(0) = mode;
    return q;
}

Eigen::MatrixXcd completing_unitary(const Eigen::MatrixXcd& columns) {
    const auto k = columns.cols();
    if (k > columns.rows()) throw std::invalid_argument("completing_unitary: more columns than rows");
    if ((columns.adjoint() * columns - Eigen::MatrixXcd::Identity(k, k)).norm() > 1e-10)
        throw std::invalid_argument("completing_unitary: columns must be orthonormal");
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(columns);
    Eigen::MatrixXcd q = qr.householderQ();
    // R of orthonormal columns is a diagonal of unit phases
    q.leftCols(k) = columns;
    return q;
}

} // namespace lch

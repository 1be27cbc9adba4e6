// lightcone.cpp - operator spreading and light-cone mode construction

#include "lch/lightcone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lch {

namespace {

constexpr double kTimeSlack = 1e-9;

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    return h;
}

// Eigen-decomposition of a Hermitian matrix with eigenvalues descending.
void descending_eigen(const Eigen::MatrixXcd& m, Eigen::VectorXd& values, Eigen::MatrixXcd& vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
    const auto n = m.rows();
    values.resize(n);
    vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values(i) = solver.eigenvalues()(n - 1 - i);
        vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
}

bool lexicographic_less(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
        if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
    }
    return false;
}

ModeBasis make_basis(const Eigen::MatrixXcd& vectors, ModeLabel label) {
    ModeBasis basis;
    basis.vectors = vectors;
    const auto m = static_cast<std::size_t>(vectors.cols());
    basis.significance.assign(m, 0.0);
    basis.arrival.assign(m, 0.0);
    basis.escape.assign(m, 0.0);
    basis.labels.assign(m, label);
    return basis;
}

} // namespace

Eigen::VectorXcd SpreadTrajectory::at(double t) const {
    const Eigen::VectorXd c = chain_modes.row(0).transpose();
    Eigen::VectorXcd phased(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) phased(k) = std::polar(1.0, -chain_energies(k) * t) * c(k);
    return chain_modes.cast<cplx>() * phased;
}

Eigen::MatrixXcd SpreadTrajectory::backward_propagator(double t) const {
    Eigen::VectorXcd phases(chain_energies.size());
    for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, chain_energies(k) * t);
    const Eigen::MatrixXcd v = chain_modes.cast<cplx>();
    return v * phases.asDiagonal() * v.transpose();
}

SpreadTrajectory solve_spread(const ChainEnvironment& env, const TimeGrid& grid) {
    env.validate();
    grid.validate();
    SpreadTrajectory traj;
    traj.grid = grid;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(env.hamiltonian());
    if (solver.info() != Eigen::Success) throw std::runtime_error("solve_spread: chain diagonalization failed");
    traj.chain_energies = solver.eigenvalues();
    traj.chain_modes = solver.eigenvectors();

    const int n = env.n_sites;
    traj.alpha.resize(n, grid.size());
    const Eigen::MatrixXcd v = traj.chain_modes.cast<cplx>();
    const Eigen::VectorXd c = traj.chain_modes.row(0).transpose();
    Eigen::VectorXcd phased(n);
    for (int i = 0; i < grid.size(); ++i) {
        const double t = grid.time(i);
        for (int k = 0; k < n; ++k) phased(k) = std::polar(1.0, -traj.chain_energies(k) * t) * c(k);
        traj.alpha.col(i).noalias() = v * phased;
    }
    traj.alpha.col(0).setZero();
    traj.alpha(0, 0) = 1.0;
    return traj;
}

LightConeDensity accumulate_density_at(const SpreadTrajectory& traj, int index, LightConeKind kind) {
    const int last = traj.grid.n_steps;
    if (index < 0 || index > last) throw std::out_of_range("accumulate_density: index off the grid");
    const int first_col = kind == LightConeKind::Retarded ? 0 : index;
    const int last_col = kind == LightConeKind::Retarded ? index : last;
    const int count = last_col - first_col + 1;
    const int n = traj.n_sites();

    LightConeDensity rho;
    rho.kind = kind;
    rho.t_anchor = traj.grid.time(index);
    if (count < 2) {
        rho.matrix = Eigen::MatrixXcd::Zero(n, n);
        return rho;
    }
    const double dt = traj.grid.dt();
    Eigen::MatrixXcd weighted = traj.alpha.middleCols(first_col, count);
    weighted *= std::sqrt(dt);
    weighted.col(0) *= std::sqrt(0.5);
    weighted.col(count - 1) *= std::sqrt(0.5);
    rho.matrix = hermitian_part(weighted * weighted.adjoint());
    return rho;
}

LightConeDensity accumulate_density(const SpreadTrajectory& traj, double t, LightConeKind kind) {
    return accumulate_density_at(traj, traj.grid.index_of(t), kind);
}

RetardedAccumulator::RetardedAccumulator(const SpreadTrajectory& traj)
    : amplitudes_(traj.alpha), dt_(traj.grid.dt()),
      rho_(Eigen::MatrixXcd::Zero(traj.n_sites(), traj.n_sites())) {}

RetardedAccumulator::RetardedAccumulator(const SpreadTrajectory& traj, const Eigen::MatrixXcd& basis)
    : amplitudes_(basis.adjoint() * traj.alpha), dt_(traj.grid.dt()),
      rho_(Eigen::MatrixXcd::Zero(basis.cols(), basis.cols())) {}

bool RetardedAccumulator::advance() {
    if (index_ + 1 >= amplitudes_.cols()) return false;
    const auto a = amplitudes_.col(index_);
    const auto b = amplitudes_.col(index_ + 1);
    rho_.noalias() += (0.5 * dt_) * (a * a.adjoint());
    rho_.noalias() += (0.5 * dt_) * (b * b.adjoint());
    ++index_;
    return true;
}

ModeBasis ModeBasis::leading(int m) const {
    if (m < 0 || m > size()) throw std::out_of_range("ModeBasis::leading: bad count");
    ModeBasis out;
    out.vectors = vectors.leftCols(m);
    const auto take = [m](const auto& v) { return std::vector(v.begin(), v.begin() + m); };
    out.significance = take(significance);
    out.arrival = take(arrival);
    out.escape = take(escape);
    out.labels = take(labels);
    return out;
}

void fix_phase(Eigen::Ref<Eigen::VectorXcd> v) {
    if (v.size() == 0) return;
    double best = -1.0;
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        // first entry within a relative 1e-9 of the maximum modulus
        if (std::abs(v(i)) > best * (1.0 + 1e-9)) {
            best = std::abs(v(i));
            at = i;
        }
    }
    if (best <= 0.0) return;
    v *= std::conj(v(at)) / best;
    v(at) = best;
}

ModeBasis normal_modes(const LightConeDensity& rho) {
    const auto& m = rho.matrix;
    if (m.rows() != m.cols()) throw std::invalid_argument("normal_modes: density must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::domain_error("normal_modes: density is not Hermitian");
    }
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
    descending_eigen(hermitian_part(m), values, vectors);
    if (values.size() > 0 && values(values.size() - 1) < -1e-10) {
        throw std::domain_error("normal_modes: density is not positive semidefinite");
    }
    for (Eigen::Index i = 0; i < vectors.cols(); ++i) fix_phase(vectors.col(i));

    // values arrive descending; inside a run of numerically equal eigenvalues
    // the vectors are ordered lexicographically so the basis is reproducible
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    const double tie = 1e-12 * std::max(values.size() ? std::abs(values(0)) : 0.0, 1e-300);
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo + 1;
        while (hi < order.size() && values(static_cast<Eigen::Index>(hi - 1)) - values(static_cast<Eigen::Index>(hi)) <= tie) ++hi;
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](Eigen::Index a, Eigen::Index b) { return lexicographic_less(vectors.col(a), vectors.col(b)); });
        lo = hi;
    }

    ModeBasis basis = make_basis(Eigen::MatrixXcd(m.rows(), m.cols()), ModeLabel::Normal);
    for (std::size_t i = 0; i < order.size(); ++i) {
        basis.vectors.col(static_cast<Eigen::Index>(i)) = vectors.col(order[i]);
        basis.significance[i] = values(static_cast<Eigen::Index>(i));
    }
    return basis;
}

ModeBasis interior_normal_modes(const LightConeDensity& rho, const Thresholds& thresholds) {
    if (rho.kind != LightConeKind::Retarded) {
        throw std::invalid_argument("interior_normal_modes: needs the retarded density");
    }
    ModeBasis all = normal_modes(rho);
    if (all.size() == 0) return all;
    const double cut = thresholds.absolute_cut(all.significance.front());
    int kept = 1;
    while (kept < all.size() && all.significance[static_cast<std::size_t>(kept)] - cut > 0.0) ++kept;
    return all.leading(kept);
}

std::vector<double> retarded_intensity(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj) {
    const Eigen::VectorXcd overlap = traj.alpha.adjoint() * mode;
    const double dt = traj.grid.dt();
    std::vector<double> out(static_cast<std::size_t>(overlap.size()), 0.0);
    for (Eigen::Index i = 1; i < overlap.size(); ++i) {
        out[static_cast<std::size_t>(i)] =
            out[static_cast<std::size_t>(i - 1)] + 0.5 * dt * (std::norm(overlap(i - 1)) + std::norm(overlap(i)));
    }
    return out;
}

std::vector<double> advanced_intensity(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj) {
    const Eigen::VectorXcd overlap = traj.alpha.adjoint() * mode;
    const double dt = traj.grid.dt();
    const auto n = overlap.size();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] =
            out[static_cast<std::size_t>(i + 1)] + 0.5 * dt * (std::norm(overlap(i)) + std::norm(overlap(i + 1)));
    }
    return out;
}

double arrival_time(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj, double a_cut) {
    const auto intensity = retarded_intensity(mode, traj);
    for (std::size_t i = 0; i < intensity.size(); ++i) {
        if (intensity[i] - a_cut > 0.0) return traj.grid.time(static_cast<int>(i));
    }
    return traj.grid.t_final;
}

double escape_time(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj, double a_cut) {
    const auto intensity = advanced_intensity(mode, traj);
    for (std::size_t i = 0; i < intensity.size(); ++i) {
        if (intensity[i] - a_cut < 0.0) return traj.grid.time(static_cast<int>(i));
    }
    return traj.grid.t_final;
}

ModeBasis minimal_forward_basis(const SpreadTrajectory& traj, const ModeBasis& interior, double a_cut) {
    const int m = interior.size();
    const Eigen::MatrixXcd& nor = interior.vectors;
    RetardedAccumulator acc(traj, nor);

    Eigen::MatrixXcd complement = Eigen::MatrixXcd::Identity(m, m);
    Eigen::MatrixXcd frozen(m, m);  // interior coordinates of arrived modes
    std::vector<double> arrival;
    arrival.reserve(static_cast<std::size_t>(m));

    auto freeze = [&](const Eigen::VectorXcd& coords, double t) {
        const Eigen::VectorXcd chain = nor * coords;
        Eigen::VectorXcd fixed = chain;
        fix_phase(fixed);
        const cplx phase = chain.dot(fixed) / chain.squaredNorm();
        frozen.col(static_cast<Eigen::Index>(arrival.size())) = coords * phase;
        arrival.push_back(t);
    };

    do {
        if (complement.cols() == 0) break;
        const double t = traj.grid.time(acc.index());
        const bool at_end = acc.index() == traj.grid.n_steps;
        const Eigen::MatrixXcd projected = hermitian_part(complement.adjoint() * acc.matrix() * complement);
        if (!at_end && projected.trace().real() <= a_cut) continue;  // top eigenvalue <= trace
        Eigen::VectorXd values;
        Eigen::MatrixXcd vectors;
        descending_eigen(projected, values, vectors);
        Eigen::Index crossed = 0;
        while (crossed < values.size() && (at_end || values(crossed) - a_cut > 0.0)) ++crossed;
        if (crossed == 0) continue;
        for (Eigen::Index j = 0; j < crossed; ++j) freeze(complement * vectors.col(j), t);
        complement = Eigen::MatrixXcd(complement * vectors.rightCols(values.size() - crossed));
    } while (acc.advance());

    const Eigen::MatrixXcd final_rho = acc.matrix();
    ModeBasis basis = make_basis(nor * frozen, ModeLabel::MinimalIn);
    for (int p = 0; p < m; ++p) {
        const auto c = frozen.col(p);
        basis.significance[static_cast<std::size_t>(p)] = (c.adjoint() * final_rho * c)(0, 0).real();
        basis.arrival[static_cast<std::size_t>(p)] = arrival[static_cast<std::size_t>(p)];
        basis.escape[static_cast<std::size_t>(p)] = traj.grid.t_final;
    }
    return basis;
}

ModeBasis backward_escape_basis(const SpreadTrajectory& traj, const ModeBasis& forward, double a_cut) {
    const int m = forward.size();
    const Eigen::MatrixXcd& in = forward.vectors;

    // first pass: rho_+(T) in forward coordinates, with the same summation order
    RetardedAccumulator total(traj, in);
    while (total.advance()) {}
    const Eigen::MatrixXcd rho_final = total.matrix();

    RetardedAccumulator acc(traj, in);
    Eigen::MatrixXcd relevant(m, 0);  // forward coordinates, orthonormal columns
    Eigen::MatrixXcd escaped(m, m);
    std::vector<double> escape;
    escape.reserve(static_cast<std::size_t>(m));
    int next_arrival = 0;

    do {
        const double t = traj.grid.time(acc.index());
        const bool at_end = acc.index() == traj.grid.n_steps;
        const int before = next_arrival;
        while (next_arrival < m && forward.arrival[static_cast<std::size_t>(next_arrival)] <= t + kTimeSlack * traj.grid.dt()) {
            ++next_arrival;
        }
        if (next_arrival > before) {
            Eigen::MatrixXcd grown(m, relevant.cols() + (next_arrival - before));
            grown.leftCols(relevant.cols()) = relevant;
            grown.rightCols(next_arrival - before) =
                Eigen::MatrixXcd::Identity(m, m).middleCols(before, next_arrival - before);
            relevant = grown;
        }
        if (relevant.cols() == 0) continue;
        const Eigen::MatrixXcd future = rho_final - acc.matrix();
        const Eigen::MatrixXcd projected = hermitian_part(relevant.adjoint() * future * relevant);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(projected);
        const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
        Eigen::Index dropped = 0;
        while (dropped < values.size() && (at_end || values(dropped) - a_cut < 0.0)) ++dropped;
        if (dropped == 0) continue;
        for (Eigen::Index j = 0; j < dropped; ++j) {
            escaped.col(static_cast<Eigen::Index>(escape.size())) = relevant * solver.eigenvectors().col(j);
            escape.push_back(t);
        }
        relevant = Eigen::MatrixXcd(relevant * solver.eigenvectors().rightCols(values.size() - dropped));
    } while (acc.advance());

    ModeBasis basis = make_basis(Eigen::MatrixXcd(in.rows(), m), ModeLabel::EscapedOut);
    for (int p = 0; p < m; ++p) {
        Eigen::VectorXcd coords = escaped.col(p);
        Eigen::VectorXcd chain = in * coords;
        fix_phase(chain);
        coords = in.adjoint() * chain;
        basis.vectors.col(p) = chain;
        basis.significance[static_cast<std::size_t>(p)] = (coords.adjoint() * rho_final * coords)(0, 0).real();
        basis.escape[static_cast<std::size_t>(p)] = escape[static_cast<std::size_t>(p)];
        // arrival of the arrived span the mode was drawn from
        double arrived = 0.0;
        for (int q = 0; q < m; ++q) {
            if (std::abs(coords(q)) > 1e-10) arrived = std::max(arrived, forward.arrival[static_cast<std::size_t>(q)]);
        }
        basis.arrival[static_cast<std::size_t>(p)] = arrived;
    }
    return basis;
}

Eigen::MatrixXcd coupling_amplitudes(const SpreadTrajectory& traj, const ModeBasis& basis) {
    return basis.vectors.adjoint() * traj.alpha;
}

std::vector<int> count_before(const std::vector<double>& times, const TimeGrid& grid) {
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> counts(static_cast<std::size_t>(grid.size()));
    std::size_t k = 0;
    for (int i = 0; i < grid.size(); ++i) {
        const double t = grid.time(i) + kTimeSlack * grid.dt();
        while (k < sorted.size() && sorted[k] <= t) ++k;
        counts[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return counts;
}

LightConeAnalysis analyze_light_cone(const SpreadTrajectory& traj, const Thresholds& thresholds) {
    LightConeAnalysis out;
    const auto rho = accumulate_density_at(traj, traj.grid.n_steps, LightConeKind::Retarded);
    out.normal = normal_modes(rho);
    out.spectrum = Eigen::Map<const Eigen::VectorXd>(out.normal.significance.data(),
                                                     static_cast<Eigen::Index>(out.normal.significance.size()));
    out.a_cut = thresholds.absolute_cut(out.normal.significance.front());
    out.interior = interior_normal_modes(rho, thresholds);
    for (int p = 0; p < out.interior.size(); ++p) {
        out.interior.arrival[static_cast<std::size_t>(p)] = arrival_time(out.interior.vectors.col(p), traj, out.a_cut);
        out.interior.escape[static_cast<std::size_t>(p)] = escape_time(out.interior.vectors.col(p), traj, out.a_cut);
    }
    out.forward = minimal_forward_basis(traj, out.interior, out.a_cut);
    out.escaped = backward_escape_basis(traj, out.forward, out.a_cut);
    return out;
}

} // namespace lch

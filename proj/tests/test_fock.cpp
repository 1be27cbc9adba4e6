#include "lch/fock.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lch;
using cplx = std::complex<double>;

namespace {

Eigen::VectorXcd random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> d;
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(d(rng), d(rng));
    return v.normalized();
}

ManyBodyState random_state(std::mt19937_64& rng, std::shared_ptr<const FockBasis> basis) {
    ManyBodyState s = ManyBodyState::zero(basis);
    s.amplitudes = random_vector(rng, s.amplitudes.size());
    return s;
}

// exp(X) for anti-Hermitian X through the Hermitian eigenproblem of -iX.
Eigen::MatrixXcd exp_anti_hermitian(const Eigen::MatrixXcd& x) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cplx(0, -1) * x);
    Eigen::VectorXcd phases(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::polar(1.0, es.eigenvalues()(i));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::MatrixXcd random_anti_hermitian(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> d;
    Eigen::MatrixXcd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(d(rng), d(rng));
    return 0.5 * (a - a.adjoint());
}

// Dense environment matrix of a_i^dag a_j, built from explicit occupation arithmetic.
Eigen::MatrixXcd dense_hopping(const FockBasis& b, int i, int j) {
    const auto dim = static_cast<Eigen::Index>(b.dim());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t s = 0; s < b.dim(); ++s) {
        std::vector<std::uint8_t> occ(b.occupation(s).begin(), b.occupation(s).end());
        if (occ[static_cast<std::size_t>(j)] == 0) continue;
        double amp = std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(j)]));
        occ[static_cast<std::size_t>(j)]--;
        amp *= std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(i)] + 1));
        occ[static_cast<std::size_t>(i)]++;
        const auto t = b.index_of(occ);
        REQUIRE(t.has_value());
        m(static_cast<Eigen::Index>(*t), static_cast<Eigen::Index>(s)) += amp;
    }
    return m;
}

// R(U) = exp(sum_ij X_ij a_i^dag a_j) with U = exp(X), applied to both qubit blocks.
ManyBodyState dense_rotation(const ManyBodyState& state, const Eigen::MatrixXcd& x) {
    const auto& b = *state.basis;
    const auto dim = static_cast<Eigen::Index>(b.dim());
    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < b.n_modes(); ++i)
        for (int j = 0; j < b.n_modes(); ++j) k += x(i, j) * dense_hopping(b, i, j);
    const Eigen::MatrixXcd r = exp_anti_hermitian(k);
    ManyBodyState out = state;
    out.block(0) = r * state.block(0);
    out.block(1) = r * state.block(1);
    return out;
}

} // namespace

TEST_CASE("basis ordering and dimension") {
    const FockBasis b(2, 1);
    REQUIRE(b.dim() == 3);
    CHECK(b.occupation(0, 0) == 0);
    CHECK(b.occupation(1, 0) == 1);
    CHECK(b.occupation(2, 1) == 1);

    const FockBasis c(2, 2);
    const std::vector<std::vector<int>> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    REQUIRE(c.dim() == expected.size());
    for (std::size_t s = 0; s < c.dim(); ++s) {
        CHECK(c.occupation(s, 0) == expected[s][0]);
        CHECK(c.occupation(s, 1) == expected[s][1]);
    }
    CHECK(fock_dimension(5, 3).value() == 56);
    CHECK(FockBasis(5, 3).dim() == 56);
    CHECK(fock_dimension(30, 4).value() == 46376);
    CHECK_FALSE(fock_dimension(200, 10).has_value());
    CHECK_THROWS_AS(build_basis(200, 10), std::length_error);
    CHECK_THROWS(FockBasis(0, 2));
}

TEST_CASE("index lookup and ladder tables agree") {
    const FockBasis b(4, 3);
    for (std::size_t s = 0; s < b.dim(); ++s) {
        CHECK(b.index_of(b.occupation(s)).value() == s);
        int total = 0;
        for (int k = 0; k < 4; ++k) {
            total += b.occupation(s, k);
            const auto low = b.lowered(s, k);
            if (b.occupation(s, k) == 0) {
                CHECK(low == -1);
            } else {
                REQUIRE(low >= 0);
                CHECK(b.raised(static_cast<std::size_t>(low), k) == static_cast<std::int32_t>(s));
                CHECK(b.occupation(static_cast<std::size_t>(low), k) == b.occupation(s, k) - 1);
            }
            if (b.total(s) == 3) CHECK(b.raised(s, k) == -1);
        }
        CHECK(total == b.total(s));
        std::size_t expected_lowerings = 0;
        for (int k = 0; k < 4; ++k) expected_lowerings += b.occupation(s, k) > 0;
        CHECK(b.lowerings(s).size() == expected_lowerings);
        for (const auto& l : b.lowerings(s)) {
            CHECK(l.target == b.lowered(s, l.mode));
            CHECK(l.amplitude == doctest::Approx(std::sqrt(b.occupation(s, l.mode))));
        }
    }
    const std::vector<std::uint8_t> over{2, 2, 0, 0};
    CHECK_FALSE(b.index_of(over).has_value());
}

TEST_CASE("ladder operators: commutator and number operator") {
    std::mt19937_64 rng(1);
    const auto basis = build_basis(3, 4);
    const auto psi = random_state(rng, basis);
    for (int k = 0; k < 3; ++k) {
        const auto n_psi = apply_ladder(psi, k, LadderKind::Number);
        const auto ada = apply_ladder(apply_ladder(psi, k, LadderKind::Annihilate), k, LadderKind::Create);
        CHECK((n_psi.amplitudes - ada.amplitudes).norm() < 1e-12);
        // [a, a^dag] = 1 on states below the cap
        const auto aad = apply_ladder(apply_ladder(psi, k, LadderKind::Create), k, LadderKind::Annihilate);
        for (std::size_t s = 0; s < basis->dim(); ++s) {
            if (basis->total(s) >= basis->n_cut()) continue;
            for (int q = 0; q < 2; ++q) {
                const auto i = static_cast<Eigen::Index>(q * basis->dim() + s);
                CHECK(std::abs(aad.amplitudes(i) - ada.amplitudes(i) - psi.amplitudes(i)) < 1e-12);
            }
        }
    }
    const auto vac = ManyBodyState::product_vacuum(basis, 0.6, 0.8);
    CHECK(apply_ladder(vac, 1, LadderKind::Annihilate).norm() == 0.0);
    CHECK(apply_ladder(vac, 1, LadderKind::Create).norm() == doctest::Approx(1.0));
    CHECK(total_quanta(vac) == 0.0);
    CHECK(vac.amplitudes(0) == cplx(0.6));
    CHECK(vac.amplitudes(static_cast<Eigen::Index>(basis->dim())) == cplx(0.8));
}

TEST_CASE("one-body density from explicit ladder products") {
    std::mt19937_64 rng(2);
    const auto basis = build_basis(4, 3);
    const auto psi = random_state(rng, basis);
    const Eigen::MatrixXcd d = one_body_density(psi);
    for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
            const auto ak = apply_ladder(psi, k, LadderKind::Annihilate);
            const auto al = apply_ladder(psi, l, LadderKind::Annihilate);
            CHECK(std::abs(d(k, l) - ak.amplitudes.dot(al.amplitudes)) < 1e-12);
        }
    CHECK(d.trace().real() == doctest::Approx(total_quanta(psi)));
}

TEST_CASE("mode rotation matches the dense exponential of the generator") {
    std::mt19937_64 rng(3);
    for (auto [m, cap] : {std::pair{2, 3}, std::pair{3, 2}, std::pair{4, 3}}) {
        const auto basis = build_basis(m, cap);
        const Eigen::MatrixXcd x = random_anti_hermitian(rng, m);
        const Eigen::MatrixXcd u = exp_anti_hermitian(x);
        const auto psi = random_state(rng, basis);
        const auto fast = rotate_modes(psi, u);
        const auto dense = dense_rotation(psi, x);
        CHECK((fast.amplitudes - dense.amplitudes).norm() < 1e-10);
        CHECK(fast.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mode rotation: single particles, composition and identity") {
    std::mt19937_64 rng(4);
    const int m = 5;
    const auto basis = build_basis(m, 3);
    const Eigen::MatrixXcd u = exp_anti_hermitian(random_anti_hermitian(rng, m));
    const Eigen::MatrixXcd v = exp_anti_hermitian(random_anti_hermitian(rng, m));
    const auto vac = ManyBodyState::product_vacuum(basis, 1.0, 0.0);
    CHECK((rotate_modes(vac, u).amplitudes - vac.amplitudes).norm() < 1e-12);
    for (int j = 0; j < m; ++j) {
        const auto one = apply_ladder(vac, j, LadderKind::Create);
        const auto rotated = rotate_modes(one, u);
        for (int i = 0; i < m; ++i) {
            const auto single = apply_ladder(vac, i, LadderKind::Create);
            CHECK(std::abs(single.amplitudes.dot(rotated.amplitudes) - u(i, j)) < 1e-12);
        }
    }
    const auto psi = random_state(rng, basis);
    const auto twice = rotate_modes(rotate_modes(psi, v), u);
    const auto once = rotate_modes(psi, Eigen::MatrixXcd(u * v));
    CHECK((twice.amplitudes - once.amplitudes).norm() < 1e-10);
    const auto back = rotate_modes(rotate_modes(psi, u), Eigen::MatrixXcd(u.adjoint()));
    CHECK((back.amplitudes - psi.amplitudes).norm() < 1e-10);
    CHECK((rotate_modes(psi, Eigen::MatrixXcd::Identity(m, m)).amplitudes - psi.amplitudes).norm() < 1e-12);

    Eigen::MatrixXcd bad = u;
    bad(0, 0) += 0.1;
    CHECK_THROWS_AS(plan_rotation(bad), std::invalid_argument);
    CHECK_THROWS_AS(rotate_modes(psi, Eigen::MatrixXcd::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("rotations conserve the one-body density covariantly") {
    std::mt19937_64 rng(5);
    const auto basis = build_basis(4, 3);
    const Eigen::MatrixXcd u = exp_anti_hermitian(random_anti_hermitian(rng, 4));
    const auto psi = random_state(rng, basis);
    const Eigen::MatrixXcd d = one_body_density(psi);
    const Eigen::MatrixXcd d_rot = one_body_density(rotate_modes(psi, u));
    // a_i -> sum_j conj(U_ij) a_j gives D' = conj(U) D U^T
    CHECK((d_rot - u.conjugate() * d * u.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("embedding pads occupations and keeps amplitudes") {
    std::mt19937_64 rng(6);
    const auto small = build_basis(2, 2);
    const auto large = build_basis(4, 3);
    const auto psi = random_state(rng, small);
    const auto big = embed(psi, large);
    CHECK(big.norm() == doctest::Approx(1.0));
    for (std::size_t s = 0; s < small->dim(); ++s) {
        const std::vector<std::uint8_t> occ{static_cast<std::uint8_t>(small->occupation(s, 0)),
                                            static_cast<std::uint8_t>(small->occupation(s, 1)), 0, 0};
        const auto t = large->index_of(occ).value();
        CHECK(big.amplitudes(static_cast<Eigen::Index>(t)) == psi.amplitudes(static_cast<Eigen::Index>(s)));
        CHECK(big.amplitudes(static_cast<Eigen::Index>(large->dim() + t)) ==
              psi.amplitudes(static_cast<Eigen::Index>(small->dim() + s)));
    }
    CHECK_THROWS_AS(embed(big, small), std::invalid_argument);
}

TEST_CASE("completing unitary starts with the given mode") {
    std::mt19937_64 rng(7);
    const Eigen::VectorXcd v = random_vector(rng, 6);
    const Eigen::MatrixXcd q = completing_unitary(v);
    CHECK((q.col(0) - v).norm() < 1e-14);
    CHECK((q.adjoint() * q - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(completing_unitary(Eigen::VectorXcd(2 * v)), std::invalid_argument);

    Eigen::MatrixXcd block(6, 3);
    for (int k = 0; k < 3; ++k) block.col(k) = random_vector(rng, 6);
    block = Eigen::HouseholderQR<Eigen::MatrixXcd>(block).householderQ() * Eigen::MatrixXcd::Identity(6, 3);
    const Eigen::MatrixXcd w = completing_unitary(block);
    CHECK((w.leftCols(3) - block).norm() == 0.0);
    CHECK((w.adjoint() * w - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(completing_unitary(Eigen::MatrixXcd(Eigen::MatrixXcd::Ones(6, 2))), std::invalid_argument);
}

TEST_CASE("states on different bases are rejected") {
    const auto a = ManyBodyState::product_vacuum(build_basis(2, 2), 1.0, 0.0);
    const auto b = ManyBodyState::product_vacuum(build_basis(3, 2), 1.0, 0.0);
    CHECK_THROWS_AS(require_same_basis(a, b), std::invalid_argument);
    CHECK_NOTHROW(require_same_basis(a, ManyBodyState::product_vacuum(build_basis(2, 2), 0.0, 1.0)));
}

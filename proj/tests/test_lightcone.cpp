#include "lch/lightcone.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lch;
using cplx = std::complex<double>;

namespace {

SpreadTrajectory make_traj(int n, double eps, double hop, double T, int steps) {
    return solve_spread(ChainEnvironment::uniform(n, eps, hop), TimeGrid{T, steps});
}

// Projector onto the column span.
Eigen::MatrixXcd span_projector(const Eigen::MatrixXcd& v) { return v * v.adjoint(); }

double orthonormality_error(const Eigen::MatrixXcd& v) {
    return (v.adjoint() * v - Eigen::MatrixXcd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("two-site spread matches the closed form") {
    const double eps = 1.0, j = 0.3;
    const auto traj = make_traj(2, eps, j, 20.0, 400);
    for (int i = 0; i <= 400; i += 37) {
        const double t = traj.grid.time(i);
        const cplx phase = std::polar(1.0, -eps * t);
        CHECK(std::abs(traj.alpha(0, i) - phase * std::cos(j * t)) < 1e-12);
        CHECK(std::abs(traj.alpha(1, i) - phase * cplx(0.0, -std::sin(j * t))) < 1e-12);
    }
    const Eigen::VectorXcd off = traj.at(3.3);
    CHECK(std::abs(off(0) - std::polar(1.0, -3.3 * eps) * std::cos(3.3 * j)) < 1e-12);
}

TEST_CASE("spread satisfies the equation of motion and stays normalized") {
    const auto traj = make_traj(8, 1.0, 0.05, 50.0, 1000);
    const Eigen::MatrixXd h = ChainEnvironment::uniform(8, 1.0, 0.05).hamiltonian();
    const double d = 1e-5;
    for (double t : {0.7, 13.1, 42.0}) {
        const Eigen::VectorXcd deriv = (traj.at(t + d) - traj.at(t - d)) / (2 * d);
        const Eigen::VectorXcd rhs = cplx(0, -1) * (h.cast<cplx>() * traj.at(t));
        CHECK((deriv - rhs).norm() < 1e-8);
    }
    for (int i = 0; i < traj.grid.size(); ++i) CHECK(std::abs(traj.alpha.col(i).norm() - 1.0) < 1e-12);
    CHECK(traj.alpha(0, 0) == cplx(1.0));
    // exp(i h t) undoes the spread
    const Eigen::VectorXcd back = traj.backward_propagator(13.1) * traj.at(13.1);
    CHECK(std::abs(back(0) - 1.0) < 1e-12);
}

TEST_CASE("two-site retarded density matches the analytic integral") {
    const double j = 0.3, T = 10.0;
    const auto traj = make_traj(2, 1.0, j, T, 20000);
    const auto rho = accumulate_density(traj, T, LightConeKind::Retarded);
    const double s = std::sin(2 * j * T) / (4 * j);
    CHECK(rho.matrix(0, 0).real() == doctest::Approx(T / 2 + s).epsilon(1e-7));
    CHECK(rho.matrix(1, 1).real() == doctest::Approx(T / 2 - s).epsilon(1e-7));
    const cplx off(0.0, (1 - std::cos(2 * j * T)) / (4 * j));
    CHECK(std::abs(rho.matrix(0, 1) - off) < 1e-6);
}

TEST_CASE("light-cone densities: trace, additivity, hermiticity") {
    const auto traj = make_traj(10, 1.0, 0.05, 40.0, 800);
    const auto full = accumulate_density_at(traj, 800, LightConeKind::Retarded);
    for (int i : {0, 1, 123, 400, 799, 800}) {
        const auto plus = accumulate_density_at(traj, i, LightConeKind::Retarded);
        const auto minus = accumulate_density_at(traj, i, LightConeKind::Advanced);
        CHECK(std::abs(plus.matrix.trace().real() - traj.grid.time(i)) < 1e-9);
        CHECK((plus.matrix + minus.matrix - full.matrix).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((plus.matrix - plus.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(plus.t_anchor == traj.grid.time(i));
    }
    CHECK_THROWS_AS(accumulate_density(traj, 0.0123, LightConeKind::Retarded), std::out_of_range);
}

TEST_CASE("accumulator marches to the same densities") {
    const auto traj = make_traj(6, 1.0, 0.05, 10.0, 200);
    RetardedAccumulator acc(traj);
    while (acc.index() < 150) acc.advance();
    CHECK((acc.matrix() - accumulate_density_at(traj, 150, LightConeKind::Retarded).matrix).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::MatrixXcd basis = Eigen::MatrixXcd::Identity(6, 6).leftCols(2);
    RetardedAccumulator proj(traj, basis);
    while (proj.advance()) {}
    CHECK(proj.index() == 200);
    const auto full = accumulate_density_at(traj, 200, LightConeKind::Retarded).matrix;
    CHECK((proj.matrix() - full.topLeftCorner(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normal modes diagonalize the density in descending order") {
    const auto traj = make_traj(12, 1.0, 0.05, 60.0, 1200);
    const auto rho = accumulate_density_at(traj, 1200, LightConeKind::Retarded);
    const auto nm = normal_modes(rho);
    REQUIRE(nm.size() == 12);
    CHECK(orthonormality_error(nm.vectors) < 1e-12);
    for (int p = 0; p < nm.size(); ++p) {
        const Eigen::VectorXcd v = nm.vectors.col(p);
        CHECK((rho.matrix * v - nm.significance[static_cast<std::size_t>(p)] * v).norm() < 1e-9);
        if (p > 0) CHECK(nm.significance[static_cast<std::size_t>(p)] <= nm.significance[static_cast<std::size_t>(p - 1)]);
        // phase convention: first largest-modulus entry is real positive
        Eigen::Index at = 0;
        const double top = v.cwiseAbs().maxCoeff(&at);
        CHECK(std::abs(v(at).imag()) < 1e-14);
        CHECK(v(at).real() == doctest::Approx(top));
    }
    double sum = 0;
    for (double s : nm.significance) sum += s;
    CHECK(sum == doctest::Approx(60.0).epsilon(1e-10));
}

TEST_CASE("normal modes reject non-physical densities") {
    LightConeDensity bad;
    bad.matrix = Eigen::MatrixXcd::Zero(2, 2);
    bad.matrix(0, 1) = 1.0;
    CHECK_THROWS_AS(normal_modes(bad), std::domain_error);
    bad.matrix = Eigen::MatrixXcd::Identity(2, 2);
    bad.matrix(1, 1) = -1.0;
    CHECK_THROWS_AS(normal_modes(bad), std::domain_error);
    LightConeDensity adv;
    adv.kind = LightConeKind::Advanced;
    adv.matrix = Eigen::MatrixXcd::Identity(2, 2);
    CHECK_THROWS_AS(interior_normal_modes(adv, Thresholds{}), std::invalid_argument);
}

TEST_CASE("interior retention: top mode always kept, others strictly above the cut") {
    LightConeDensity rho;
    rho.matrix = Eigen::MatrixXcd::Zero(4, 4);
    rho.matrix.diagonal() << 10.0, 1.0, 0.01, 0.001;
    Thresholds t;
    t.r_cut = 0.1;  // cut = 1.0, equal to the second eigenvalue -> dropped
    CHECK(interior_normal_modes(rho, t).size() == 1);
    t.r_cut = 0.0999;
    CHECK(interior_normal_modes(rho, t).size() == 2);
    t.a_cut = 100.0;
    CHECK(interior_normal_modes(rho, t).size() == 1);
    t.a_cut = 0.0;
    CHECK(interior_normal_modes(rho, t).size() == 4);
}

TEST_CASE("arrival and escape times follow the intensity scans") {
    const auto traj = make_traj(10, 1.0, 0.05, 40.0, 800);
    Eigen::VectorXcd site3 = Eigen::VectorXcd::Zero(10);
    site3(3) = 1.0;
    const auto in = retarded_intensity(site3, traj);
    const auto out = advanced_intensity(site3, traj);
    const double a_cut = 1e-4;
    const double t_in = arrival_time(site3, traj, a_cut);
    const int i_in = traj.grid.index_of(t_in);
    CHECK(in[static_cast<std::size_t>(i_in)] > a_cut);
    CHECK(in[static_cast<std::size_t>(i_in - 1)] <= a_cut);
    const double t_out = escape_time(site3, traj, 1.0);
    const int i_out = traj.grid.index_of(t_out);
    CHECK(out[static_cast<std::size_t>(i_out)] < 1.0);
    CHECK(out[static_cast<std::size_t>(i_out - 1)] >= 1.0);
    // a far site arrives later than a near one
    Eigen::VectorXcd site6 = Eigen::VectorXcd::Zero(10);
    site6(6) = 1.0;
    CHECK(arrival_time(site6, traj, a_cut) > t_in);
    // never-arriving mode reports T
    CHECK(arrival_time(site6, traj, 1e9) == 40.0);
}

TEST_CASE("minimal forward and escaped bases") {
    const auto traj = make_traj(12, 1.0, 0.05, 60.0, 1200);
    Thresholds th;
    th.r_cut = 1e-4;
    const auto lc = analyze_light_cone(traj, th);
    const int m = lc.interior.size();
    REQUIRE(m >= 3);
    CHECK(lc.a_cut == doctest::Approx(1e-4 * lc.spectrum(0)));
    CHECK(lc.forward.size() == m);
    CHECK(lc.escaped.size() == m);
    CHECK(orthonormality_error(lc.forward.vectors) < 1e-10);
    CHECK(orthonormality_error(lc.escaped.vectors) < 1e-10);
    const Eigen::MatrixXcd p_int = span_projector(lc.interior.vectors);
    CHECK((span_projector(lc.forward.vectors) - p_int).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((span_projector(lc.escaped.vectors) - p_int).cwiseAbs().maxCoeff() < 1e-9);

    for (int p = 0; p < m; ++p) {
        const auto pu = static_cast<std::size_t>(p);
        if (p > 0) CHECK(lc.forward.arrival[pu] >= lc.forward.arrival[pu - 1]);
        if (p > 0) CHECK(lc.escaped.escape[pu] >= lc.escaped.escape[pu - 1]);
        CHECK(lc.escaped.arrival[pu] <= lc.escaped.escape[pu]);
        // a forward mode stays below the cut until its arrival
        const auto in = retarded_intensity(lc.forward.vectors.col(p), traj);
        const int i_in = traj.grid.index_of(lc.forward.arrival[pu]);
        for (int i = 0; i < i_in; ++i) CHECK(in[static_cast<std::size_t>(i)] <= lc.a_cut * (1 + 1e-9));
        // an escaped mode has less than a_cut of coupling left after t_out
        const auto out = advanced_intensity(lc.escaped.vectors.col(p), traj);
        const int i_out = traj.grid.index_of(lc.escaped.escape[pu]);
        if (i_out < traj.grid.n_steps) CHECK(out[static_cast<std::size_t>(i_out)] < lc.a_cut * (1 + 1e-9));
    }
    // the arrivals are spread out rather than all at t = 0
    CHECK(lc.forward.arrival.back() > lc.forward.arrival.front());
}

TEST_CASE("coupling amplitudes and arrival counts") {
    const auto traj = make_traj(5, 1.0, 0.05, 5.0, 100);
    ModeBasis b;
    b.vectors = Eigen::MatrixXcd::Identity(5, 5).leftCols(2);
    const auto chi = coupling_amplitudes(traj, b);
    CHECK(chi.rows() == 2);
    CHECK((chi.row(1) - traj.alpha.row(1)).cwiseAbs().maxCoeff() == 0.0);
    const auto counts = count_before({0.0, 1.0, 1.0, 4.95}, traj.grid);
    CHECK(counts[0] == 1);
    CHECK(counts[19] == 1);
    CHECK(counts[20] == 3);
    CHECK(counts[99] == 4);
}

TEST_CASE("leading modes keep the per-mode data aligned") {
    const auto traj = make_traj(6, 1.0, 0.05, 20.0, 400);
    const auto nm = normal_modes(accumulate_density_at(traj, 400, LightConeKind::Retarded));
    const auto two = nm.leading(2);
    CHECK(two.size() == 2);
    CHECK(two.significance[1] == nm.significance[1]);
    CHECK_THROWS_AS(nm.leading(7), std::out_of_range);
}

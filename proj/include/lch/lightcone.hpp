// lightcone.hpp - single-particle operator spreading, light-cone density
// matrices and the interior / minimal-forward / escaped mode bases.

#pragma once

#include "lch/chain_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lch {

// Spread amplitudes alpha(t) of the coupling-site operator on the grid,
// i d/dt alpha = h alpha, alpha(0) = e_0.
struct SpreadTrajectory {
    TimeGrid grid;
    Eigen::MatrixXcd alpha;          // n_sites x grid.size()
    Eigen::VectorXd chain_energies;  // eigenvalues of h
    Eigen::MatrixXd chain_modes;     // eigenvectors of h (columns)

    int n_sites() const { return static_cast<int>(alpha.rows()); }
    // Exact amplitude at an arbitrary time.
    Eigen::VectorXcd at(double t) const;
    // exp(i h t) as a dense matrix.
    Eigen::MatrixXcd backward_propagator(double t) const;
};

SpreadTrajectory solve_spread(const ChainEnvironment& env, const TimeGrid& grid);

enum class LightConeKind { Retarded, Advanced };

struct LightConeDensity {
    LightConeKind kind = LightConeKind::Retarded;
    double t_anchor = 0.0;
    Eigen::MatrixXcd matrix;
};

// Trapezoid integral of |alpha><alpha| over [0, t] (Retarded) or [t, T]
// (Advanced). t must lie on the grid.
LightConeDensity accumulate_density(const SpreadTrajectory& traj, double t, LightConeKind kind);
LightConeDensity accumulate_density_at(const SpreadTrajectory& traj, int index, LightConeKind kind);

// Marches rho_+(t_i) forward one grid step at a time, optionally projected onto
// a fixed set of columns (rho restricted to span(basis), in basis coordinates).
class RetardedAccumulator {
public:
    explicit RetardedAccumulator(const SpreadTrajectory& traj);
    RetardedAccumulator(const SpreadTrajectory& traj, const Eigen::MatrixXcd& basis);

    int index() const { return index_; }
    const Eigen::MatrixXcd& matrix() const { return rho_; }
    // Advances to index() + 1; returns false at the end of the grid.
    bool advance();

private:
    Eigen::MatrixXcd amplitudes_;  // projected alpha, columns per grid point
    double dt_;
    int index_ = 0;
    Eigen::MatrixXcd rho_;
};

enum class ModeLabel { Normal, MinimalIn, EscapedOut };

// Ordered orthonormal single-particle modes (columns, chain coordinates).
struct ModeBasis {
    Eigen::MatrixXcd vectors;
    std::vector<double> significance;
    std::vector<double> arrival;
    std::vector<double> escape;
    std::vector<ModeLabel> labels;

    int size() const { return static_cast<int>(vectors.cols()); }
    // First m columns and their per-mode data.
    ModeBasis leading(int m) const;
};

// Multiplies v by a unit phase so its first largest-modulus entry is real positive.
void fix_phase(Eigen::Ref<Eigen::VectorXcd> v);

// All eigenpairs of rho, eigenvalue descending; ties broken by phase-fixed
// lexicographic order of the eigenvectors.
ModeBasis normal_modes(const LightConeDensity& rho);

// Eigenpairs above the significance cut. The cut is a_cut when absolute,
// r_cut * I_1 otherwise; retention is strict except the top mode, which is
// always kept. Throws std::domain_error when rho is not PSD to 1e-10.
ModeBasis interior_normal_modes(const LightConeDensity& rho, const Thresholds& thresholds);

// <kappa|rho_+(t_i)|kappa> for all grid points.
std::vector<double> retarded_intensity(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj);
// <kappa|rho_-(t_i)|kappa> for all grid points.
std::vector<double> advanced_intensity(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj);

// First grid time with <kappa|rho_+|kappa> > a_cut; T when the mode never arrives.
double arrival_time(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj, double a_cut);
// First grid time with <chi|rho_-|chi> < a_cut.
double escape_time(const Eigen::VectorXcd& mode, const SpreadTrajectory& traj, double a_cut);

// Greedy minimal light cone: rotates span(interior) so modes arrive one after
// another as late as possible. Result is ordered by arrival time.
ModeBasis minimal_forward_basis(const SpreadTrajectory& traj, const ModeBasis& interior, double a_cut);

// Escaped (record-carrying) modes inside the arrived span, ordered by escape time.
// Modes still coupled at T are assigned t_out = T.
ModeBasis backward_escape_basis(const SpreadTrajectory& traj, const ModeBasis& forward, double a_cut);

// chi_k(t_i) = <kappa_k|alpha(t_i)>, n_modes x grid.size().
Eigen::MatrixXcd coupling_amplitudes(const SpreadTrajectory& traj, const ModeBasis& basis);

// #{p : times[p] <= t} on every grid point.
std::vector<int> count_before(const std::vector<double>& times, const TimeGrid& grid);

// Everything the many-body stages need from the single-particle analysis.
struct LightConeAnalysis {
    double a_cut = 0.0;
    Eigen::VectorXd spectrum;   // all eigenvalues of rho_+(T), descending
    ModeBasis normal;           // all eigenpairs of rho_+(T)
    ModeBasis interior;         // the m(T) significant ones, with arrival times
    ModeBasis forward;          // minimal forward basis
    ModeBasis escaped;          // escaped basis (spans the interior)
};

LightConeAnalysis analyze_light_cone(const SpreadTrajectory& traj, const Thresholds& thresholds);

} // namespace lch

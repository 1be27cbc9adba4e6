// dynamics.hpp - time-dependent many-body Hamiltonians in rotated mode bases
// and their Schrodinger propagation.
//
// Conventions. The environment is treated in the interaction picture, so the
// coupling-site operator is a_0^dag(t) = sum_q conj(alpha_q(t)) a_q^dag with
// alpha from the spread equation. A Fock slot k is attached to a single-particle
// vector kappa_k (chain coordinates, column k of HamiltonianSpec::modes) via
// kappa_k^dag = sum_q conj(kappa_kq) a_q^dag. With this convention the slot
// amplitudes of a_0^dag(t) are conj(<kappa_k|alpha(t)>) and the intensity of a
// slot is the quadratic form of the light-cone density built from alpha.

#pragma once

#include "lch/chain_model.hpp"
#include "lch/fock.hpp"
#include "lch/krylov.hpp"
#include "lch/lightcone.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace lch {

enum class HamiltonianVariant { FullChain, NormalModes, MinimalForward, EffectiveRelevant, Perp };

// Single-particle projector applied to alpha from grid step `start_index` on.
struct ProjectorSegment {
    int start_index = 0;
    Eigen::MatrixXcd projector;
};

struct HamiltonianSpec {
    HamiltonianVariant variant = HamiltonianVariant::FullChain;
    OpenSystem system;
    std::shared_ptr<const SpreadTrajectory> trajectory;
    Eigen::MatrixXcd modes;                  // n_sites x n_modes
    std::vector<ProjectorSegment> schedule;  // sorted by start_index; empty = identity
    std::vector<int> active_from;            // per slot, first active grid step
    std::vector<int> active_until;           // per slot, first inactive grid step
    std::optional<Eigen::VectorXcd> dropped_mode;
    Eigen::MatrixXcd couplings;              // n_modes x (2 n_steps + 1), half-grid samples

    int n_modes() const { return static_cast<int>(modes.cols()); }
    const TimeGrid& grid() const { return trajectory->grid; }
    // Slot amplitudes c_k with a_0^dag(t) = sum_k c_k kappa_k^dag.
    // `step_index` selects the piecewise-constant schedule (the grid step that
    // contains t); the one-argument form derives it from t.
    Eigen::VectorXcd coupling_at(double t) const;
    Eigen::VectorXcd coupling_at(double t, int step_index) const;
    int step_of(double t) const;
    std::vector<int> active_modes(int grid_index) const;
};

// All chain sites as slots.
HamiltonianSpec full_chain_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj);
// Slots are the given orthonormal modes, coupled at all times (H_nor when the
// modes are the interior normal modes).
HamiltonianSpec normal_modes_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                  const Eigen::MatrixXcd& modes);
// Minimal-forward modes, each switched on for the grid step in which it arrives.
HamiltonianSpec minimal_forward_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                     const ModeBasis& forward);
// Slots are the escaped modes; only the arrived, not yet escaped part of the
// light cone couples: alpha is projected onto span(arrived) - span(escaped).
HamiltonianSpec effective_relevant_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                        const ModeBasis& forward, const ModeBasis& escaped);
// Whole chain, slots led by the escaped modes; each escaped slot is switched
// off at its escape step, nothing else is truncated.
HamiltonianSpec escaped_dropout_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                     const ModeBasis& escaped);
// Chain-site slots with the component along `dropped` removed from a_0^dag(t).
HamiltonianSpec perp_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                          const Eigen::VectorXcd& dropped);

// Matrix-free H(t) = H_s(t) + g (s+ A(t) + s- A^dag(t)), A^dag(t) = sum_k c_k(t) kappa_k^dag.
class HamiltonianAction {
public:
    HamiltonianAction(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t);
    HamiltonianAction(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t, int step_index);
    void apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const;
    const Eigen::VectorXcd& coupling() const { return coupling_; }

private:
    std::shared_ptr<const FockBasis> basis_;
    Eigen::VectorXcd coupling_;
    double g_;
    double drive_;
};

HamiltonianAction assemble(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t);

// Midpoint exponential stepping on the grid of the spec.
class Propagator {
public:
    explicit Propagator(const HamiltonianSpec& spec, KrylovOptions krylov = {});

    // t_i -> t_{i+1}; halves internally when a Krylov step fails or the norm
    // changes by more than 1e-5.
    void step(ManyBodyState& state, int i) const;
    void evolve(ManyBodyState& state, int from_index, int to_index) const;

private:
    void advance(ManyBodyState& state, double t, double h, int step_index, int depth) const;

    const HamiltonianSpec& spec_;
    KrylovOptions krylov_;
};

struct PropagateOptions {
    std::vector<int> snapshot_indices;  // the final state is always kept
    int occupation_stride = 0;          // 0 = no chain occupations
    bool schrodinger_picture = true;    // occupations of the free-evolving chain
    KrylovOptions krylov;
};

struct PropagationResult {
    std::vector<double> times;
    std::vector<double> sigma_z;  // every grid point
    std::vector<int> snapshot_indices;
    std::vector<ManyBodyState> snapshots;
    std::vector<int> occupation_indices;
    Eigen::MatrixXd occupations;  // n_sites x occupation_indices.size()
    double max_norm_drift = 0.0;
    ManyBodyState final_state;
};

PropagationResult propagate(const HamiltonianSpec& spec, const ManyBodyState& initial,
                            const PropagateOptions& options = {});

// (|e|^2 - |g|^2) / norm^2
double sigma_z(const ManyBodyState& state);

// n_p = <a_p^dag a_p> per chain site; optionally in the Schrodinger picture at time t.
Eigen::VectorXd chain_occupations(const ManyBodyState& state, const HamiltonianSpec& spec, double t,
                                  bool schrodinger_picture);

// |<a|b>|; throws on basis mismatch.
double sqrt_fidelity(const ManyBodyState& a, const ManyBodyState& b);
inline double infidelity(const ManyBodyState& a, const ManyBodyState& b) { return 1.0 - sqrt_fidelity(a, b); }

// Slot coordinates of a chain-coordinate mode for a spec's slot basis.
Eigen::VectorXcd slot_vector(const Eigen::MatrixXcd& modes, const Eigen::VectorXcd& chain_mode);

// Re-expresses a state from slots `from` into slots `to` (same span, same size).
ManyBodyState change_slots(const ManyBodyState& state, const Eigen::MatrixXcd& from, const Eigen::MatrixXcd& to);

enum class SweepFamily { NormalModes, MinimalForward };

struct SweepPoint {
    int m = 0;
    double infidelity = 0.0;
    double a_cut = 0.0;   // cut separating the kept modes (minimal family)
    double tail_mass = 0.0;  // sum of discarded eigenvalues of rho_+(T)
};

struct SweepRequest {
    SweepFamily family = SweepFamily::NormalModes;
    OpenSystem system;
    std::shared_ptr<const SpreadTrajectory> trajectory;
    ModeBasis normal;  // all eigenpairs of rho_+(T), descending
    int n_cut = 4;
    int m_max = 0;     // sweep m = 1..m_max
    cplx ground = 0.0;
    cplx excited = 1.0;
    int threads = 1;
};

// Infidelity of the m-mode truncation against the all-normal-modes reference.
std::vector<SweepPoint> guard_mode_sweep(const SweepRequest& request);

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

} // namespace lch

// histories.hpp - occupation projectors on escaped modes, branch enumeration,
// decoherence overlaps and the quantum-jump unraveling.

#pragma once

#include "lch/dynamics.hpp"
#include "lch/fock.hpp"
#include "lch/lightcone.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lch {

// Projector onto occupation n of the slot-coordinate mode v, i.e. of the
// operator sum_k v_k kappa_k^dag. Throws unless |v| = 1 to 1e-10.
ManyBodyState project_occupation(const ManyBodyState& state, const Eigen::VectorXcd& mode, int n);
// Same for an axis-aligned mode (slot index), without rotations.
ManyBodyState project_slot(const ManyBodyState& state, int slot, int n);

struct EscapeEvent {
    int grid_index = 0;
    double time = 0.0;
    int slot = 0;
};

// Escapes strictly before T, ordered by time and then slot. Slots are the
// columns of `escaped`; modes assigned t_out = T never escape.
std::vector<EscapeEvent> escape_events(const ModeBasis& escaped, const TimeGrid& grid);

struct HistoryOutcome {
    double t_out = 0.0;
    int mode_id = 0;
    int occupation = 0;
};

struct HistoryRecord {
    std::vector<HistoryOutcome> outcomes;
    double branch_amplitude_sq = 0.0;
    std::string label;  // occupations in event order, e.g. "010"
    ManyBodyState state;  // branch state at T, unnormalized
};

struct EnumerationOptions {
    int max_branches = 200;
    double prune_below = 1e-12;
    int threads = 1;  // branches evolve in parallel; results do not depend on it
};

struct HistoryEnumeration {
    std::vector<HistoryRecord> branches;  // descending weight
    double leakage = 0.0;                 // weight removed by pruning and the cap
    double reference_norm_sq = 0.0;       // |Psi(T)|^2 of the unprojected run
    double total_probability() const;
};

// Propagates with `spec`, splitting every branch into n = 0..n_cut at each
// escape event. After each split, branches below `prune_below` are dropped and
// only the `max_branches` heaviest are kept.
HistoryEnumeration enumerate_histories(const HamiltonianSpec& spec, const std::vector<EscapeEvent>& events,
                                       const ManyBodyState& initial, const EnumerationOptions& options = {});

enum class HistorySelection { TopWeight, Weighted };

// Indices of n branches: the heaviest, or drawn without replacement with
// probability proportional to weight.
std::vector<std::size_t> select_histories(const HistoryEnumeration& histories, int n, HistorySelection selection,
                                          std::uint64_t seed = 0);

struct DecoherenceReport {
    int n_histories = 0;
    double r_cut = 0.0;
    Eigen::MatrixXd overlaps;  // |<Psi_b|Psi_a>|, zero diagonal
    double mean_overlap = 0.0;
    double geometric_mean = 0.0;
    int pinned = 0;
    std::vector<std::string> labels;
    std::vector<double> probabilities;
};

// pinned < 0 picks the maximum-probability branch.
DecoherenceReport decoherence_overlap(const std::vector<const HistoryRecord*>& branches, double r_cut, int pinned = -1);

struct JumpEnsemble {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> standard_error;
    int n_samples = 0;
};

// Per-sample seeds derived from the master seed by counter splitting; results
// do not depend on the thread count.
JumpEnsemble quantum_jump_sample(const HamiltonianSpec& spec, const std::vector<EscapeEvent>& events,
                                 const ManyBodyState& initial, std::uint64_t seed, int n_samples, int threads = 1);

// splitmix64 finalizer
std::uint64_t splitmix64(std::uint64_t x);

} // namespace lch

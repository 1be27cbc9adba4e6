// histories.cpp

#include "lch/histories.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lch {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void check_occupation(const ManyBodyState& state, int n) {
    if (n < 0 || n > state.basis->n_cut()) throw std::out_of_range("projector: occupation outside [0, n_cut]");
}

} // namespace

ManyBodyState project_slot(const ManyBodyState& state, int slot, int n) {
    check_occupation(state, n);
    const auto& basis = *state.basis;
    if (slot < 0 || slot >= basis.n_modes()) throw std::out_of_range("project_slot: slot index");
    ManyBodyState out = state;
    const auto dim = basis.dim();
    for (std::size_t s = 0; s < dim; ++s)
        if (basis.occupation(s, slot) != n) {
            out.amplitudes(static_cast<Eigen::Index>(s)) = 0.0;
            out.amplitudes(static_cast<Eigen::Index>(dim + s)) = 0.0;
        }
    return out;
}

ManyBodyState project_occupation(const ManyBodyState& state, const Eigen::VectorXcd& mode, int n) {
    check_occupation(state, n);
    if (mode.size() != state.basis->n_modes()) throw std::invalid_argument("project_occupation: mode length");
    if (std::abs(mode.norm() - 1.0) > 1e-10) throw std::invalid_argument("project_occupation: mode must be normalized");
    // axis-aligned up to a phase: the number operator is unchanged by the phase
    Eigen::Index top = 0;
    if (std::abs(std::abs(mode.cwiseAbs().maxCoeff(&top)) - 1.0) < 1e-14) return project_slot(state, static_cast<int>(top), n);
    const Eigen::MatrixXcd w = completing_unitary(mode);
    const RotationPlan forward = plan_rotation(w.adjoint());
    const RotationPlan back = plan_rotation(w);
    return rotate_modes(project_slot(rotate_modes(state, forward), 0, n), back);
}

std::vector<EscapeEvent> escape_events(const ModeBasis& escaped, const TimeGrid& grid) {
    if (escaped.escape.size() != static_cast<std::size_t>(escaped.size()))
        throw std::invalid_argument("escape_events: escape times missing");
    std::vector<EscapeEvent> out;
    for (int k = 0; k < escaped.size(); ++k) {
        const double t = escaped.escape[static_cast<std::size_t>(k)];
        const int idx = static_cast<int>(std::lround(t / grid.dt()));
        if (idx >= grid.n_steps) continue;
        out.push_back({idx, grid.time(idx), k});
    }
    std::stable_sort(out.begin(), out.end(), [](const EscapeEvent& a, const EscapeEvent& b) {
        return a.grid_index != b.grid_index ? a.grid_index < b.grid_index : a.slot < b.slot;
    });
    return out;
}

double HistoryEnumeration::total_probability() const {
    double s = 0.0;
    for (const auto& b : branches) s += b.branch_amplitude_sq;
    return s;
}

HistoryEnumeration enumerate_histories(const HamiltonianSpec& spec, const std::vector<EscapeEvent>& events,
                                       const ManyBodyState& initial, const EnumerationOptions& options) {
    if (options.threads < 1) throw std::invalid_argument("enumerate_histories: threads must be positive");
    if (options.max_branches < 1) throw std::invalid_argument("enumerate_histories: max_branches must be positive");
    for (std::size_t i = 1; i < events.size(); ++i)
        if (events[i].grid_index < events[i - 1].grid_index)
            throw std::invalid_argument("enumerate_histories: events must be sorted by escape time");
    const int n_steps = spec.grid().n_steps;
    const int n_cut = initial.basis->n_cut();
    const Propagator prop(spec);

    HistoryEnumeration result;
    {
        ManyBodyState ref = initial;
        prop.evolve(ref, 0, n_steps);
        result.reference_norm_sq = ref.amplitudes.squaredNorm();
    }

    std::vector<HistoryRecord> live(1);
    live[0].state = initial;
    live[0].branch_amplitude_sq = initial.amplitudes.squaredNorm();
    int at = 0;
    for (const auto& ev : events) {
        if (ev.grid_index > at) {
            parallel_for(static_cast<int>(live.size()), options.threads, [&](int k) {
                prop.evolve(live[static_cast<std::size_t>(k)].state, at, ev.grid_index);
            });
            at = ev.grid_index;
        }
        std::vector<HistoryRecord> next;
        for (const auto& b : live) {
            for (int n = 0; n <= n_cut; ++n) {
                HistoryRecord child;
                child.state = project_slot(b.state, ev.slot, n);
                child.branch_amplitude_sq = child.state.amplitudes.squaredNorm();
                if (child.branch_amplitude_sq < options.prune_below) {
                    result.leakage += child.branch_amplitude_sq;
                    continue;
                }
                child.outcomes = b.outcomes;
                child.outcomes.push_back({ev.time, ev.slot, n});
                child.label = b.label + std::to_string(n);
                next.push_back(std::move(child));
            }
        }
        std::stable_sort(next.begin(), next.end(), [](const HistoryRecord& a, const HistoryRecord& b) {
            return a.branch_amplitude_sq > b.branch_amplitude_sq;
        });
        if (next.size() > static_cast<std::size_t>(options.max_branches)) {
            for (std::size_t i = static_cast<std::size_t>(options.max_branches); i < next.size(); ++i)
                result.leakage += next[i].branch_amplitude_sq;
            next.resize(static_cast<std::size_t>(options.max_branches));
        }
        live = std::move(next);
    }
    parallel_for(static_cast<int>(live.size()), options.threads, [&](int k) {
        auto& b = live[static_cast<std::size_t>(k)];
        prop.evolve(b.state, at, n_steps);
        b.branch_amplitude_sq = b.state.amplitudes.squaredNorm();
    });
    std::stable_sort(live.begin(), live.end(), [](const HistoryRecord& a, const HistoryRecord& b) {
        return a.branch_amplitude_sq > b.branch_amplitude_sq;
    });
    result.branches = std::move(live);
    return result;
}

std::vector<std::size_t> select_histories(const HistoryEnumeration& histories, int n, HistorySelection selection,
                                          std::uint64_t seed) {
    const std::size_t total = histories.branches.size();
    const std::size_t take = std::min(total, static_cast<std::size_t>(std::max(n, 0)));
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (selection == HistorySelection::TopWeight) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return histories.branches[a].branch_amplitude_sq > histories.branches[b].branch_amplitude_sq;
        });
        idx.resize(take);
        return idx;
    }
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<std::size_t> picked;
    std::vector<double> w(total);
    for (std::size_t i = 0; i < total; ++i) w[i] = histories.branches[i].branch_amplitude_sq;
    while (picked.size() < take) {
        const double sum = std::accumulate(w.begin(), w.end(), 0.0);
        if (sum <= 0.0) break;
        double u = unit_uniform(rng) * sum;
        std::size_t choice = total;
        for (std::size_t i = 0; i < total; ++i) {
            if (w[i] <= 0.0) continue;
            choice = i;
            if (u < w[i]) break;
            u -= w[i];
        }
        picked.push_back(choice);
        w[choice] = 0.0;
    }
    return picked;
}

DecoherenceReport decoherence_overlap(const std::vector<const HistoryRecord*>& branches, double r_cut, int pinned) {
    const int n = static_cast<int>(branches.size());
    if (n < 2) throw std::invalid_argument("decoherence_overlap: need at least two histories");
    for (const auto* b : branches) require_same_basis(branches[0]->state, b->state);

    DecoherenceReport rep;
    rep.n_histories = n;
    rep.r_cut = r_cut;
    rep.overlaps = Eigen::MatrixXd::Zero(n, n);
    double sum = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const double v = std::abs(branches[static_cast<std::size_t>(b)]->state.amplitudes.dot(
                branches[static_cast<std::size_t>(a)]->state.amplitudes));
            rep.overlaps(a, b) = rep.overlaps(b, a) = v;
            sum += 2.0 * v;
        }
    rep.mean_overlap = sum / (static_cast<double>(n) * n - n);

    for (const auto* b : branches) {
        rep.labels.push_back(b->label);
        rep.probabilities.push_back(b->branch_amplitude_sq);
    }
    if (pinned < 0) {
        pinned = static_cast<int>(std::max_element(rep.probabilities.begin(), rep.probabilities.end()) -
                                  rep.probabilities.begin());
    }
    if (pinned >= n) throw std::out_of_range("decoherence_overlap: pinned history index");
    rep.pinned = pinned;
    double log_sum = 0.0;
    for (int b = 0; b < n; ++b)
        if (b != pinned) log_sum += std::log(std::max(rep.overlaps(pinned, b), 1e-16));
    rep.geometric_mean = std::exp(log_sum / (n - 1));
    return rep;
}

JumpEnsemble quantum_jump_sample(const HamiltonianSpec& spec, const std::vector<EscapeEvent>& events,
                                 const ManyBodyState& initial, std::uint64_t seed, int n_samples, int threads) {
    if (n_samples < 1) throw std::invalid_argument("quantum_jump_sample: n_samples must be >= 1");
    const TimeGrid& grid = spec.grid();
    const int n_steps = grid.n_steps;
    const int n_cut = initial.basis->n_cut();
    const Propagator prop(spec);

    Eigen::MatrixXd traces(grid.size(), n_samples);
    parallel_for(n_samples, threads, [&](int s) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s) + 1)));
        ManyBodyState psi = initial;
        psi.amplitudes /= psi.norm();
        std::size_t next = 0;
        for (int i = 0; i <= n_steps; ++i) {
            if (i > 0) prop.step(psi, i - 1);
            for (; next < events.size() && events[next].grid_index <= i; ++next) {
                std::vector<ManyBodyState> parts;
                std::vector<double> probs;
                const double total = psi.amplitudes.squaredNorm();
                for (int n = 0; n <= n_cut; ++n) {
                    parts.push_back(project_slot(psi, events[next].slot, n));
                    probs.push_back(parts.back().amplitudes.squaredNorm() / total);
                }
                double u = unit_uniform(rng);
                int pick = -1;
                for (int n = 0; n <= n_cut; ++n) {
                    if (probs[static_cast<std::size_t>(n)] <= 0.0) continue;
                    pick = n;
                    if (u < probs[static_cast<std::size_t>(n)]) break;
                    u -= probs[static_cast<std::size_t>(n)];
                }
                // rounding can leave u past the last bin; the last nonzero outcome absorbs it
                if (pick < 0) throw std::runtime_error("quantum_jump_sample: all outcomes have zero probability");
                psi = std::move(parts[static_cast<std::size_t>(pick)]);
                psi.amplitudes /= psi.norm();
            }
            traces(i, s) = sigma_z(psi);
        }
    });

    JumpEnsemble out;
    out.n_samples = n_samples;
    for (int i = 0; i <= n_steps; ++i) {
        const Eigen::VectorXd row = traces.row(i).transpose();
        const double mean = row.mean();
        double se = 0.0;
        if (n_samples > 1) se = std::sqrt((row.array() - mean).square().sum() / (n_samples - 1) / n_samples);
        out.times.push_back(grid.time(i));
        out.mean.push_back(mean);
        out.standard_error.push_back(se);
    }
    return out;
}

} // namespace lch

// dynamics.cpp

#include "lch/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace lch {

namespace {

int grid_index_of(const TimeGrid& grid, double t) {
    return static_cast<int>(std::lround(t / grid.dt()));
}

// Projector valid on grid step i (identity when no schedule applies).
const Eigen::MatrixXcd* projector_for(const HamiltonianSpec& spec, int step_index) {
    const Eigen::MatrixXcd* found = nullptr;
    for (const auto& seg : spec.schedule) {
        if (seg.start_index > step_index) break;
        found = &seg.projector;
    }
    return found;
}

Eigen::VectorXcd compute_coupling(const HamiltonianSpec& spec, const Eigen::VectorXcd& alpha, int step_index) {
    Eigen::VectorXcd a = alpha;
    if (const auto* proj = projector_for(spec, step_index)) a = (*proj) * alpha;
    Eigen::VectorXcd c = (spec.modes.adjoint() * a).conjugate();
    for (int k = 0; k < spec.n_modes(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (step_index < spec.active_from[ku] || step_index >= spec.active_until[ku]) c(k) = 0.0;
    }
    return c;
}

// A mode arriving at t_in couples on the step that ends at t_in, since its
// intensity crosses the cut inside that step.
int first_active_step(const TimeGrid& grid, double t_in) { return std::max(0, grid_index_of(grid, t_in) - 1); }

void fill_couplings(HamiltonianSpec& spec) {
    const TimeGrid& grid = spec.grid();
    const int samples = 2 * grid.n_steps + 1;
    spec.couplings.resize(spec.n_modes(), samples);
    for (int j = 0; j < samples; ++j) {
        const double t = 0.5 * grid.dt() * j;
        const int step = std::min(j / 2, grid.n_steps);
        const Eigen::VectorXcd alpha = (j % 2 == 0) ? Eigen::VectorXcd(spec.trajectory->alpha.col(j / 2))
                                                    : spec.trajectory->at(t);
        spec.couplings.col(j) = compute_coupling(spec, alpha, step);
    }
}

HamiltonianSpec base_spec(HamiltonianVariant variant, const OpenSystem& system,
                          std::shared_ptr<const SpreadTrajectory> traj, const Eigen::MatrixXcd& modes) {
    if (!traj) throw std::invalid_argument("Hamiltonian: missing spread trajectory");
    system.validate();
    if (modes.rows() != traj->n_sites()) throw std::invalid_argument("Hamiltonian: mode vectors have wrong length");
    if (modes.cols() == 0) throw std::invalid_argument("Hamiltonian: no modes");
    const Eigen::MatrixXcd gram = modes.adjoint() * modes;
    if ((gram - Eigen::MatrixXcd::Identity(modes.cols(), modes.cols())).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("Hamiltonian: modes are not orthonormal");
    HamiltonianSpec spec;
    spec.variant = variant;
    spec.system = system;
    spec.trajectory = std::move(traj);
    spec.modes = modes;
    spec.active_from.assign(static_cast<std::size_t>(modes.cols()), 0);
    spec.active_until.assign(static_cast<std::size_t>(modes.cols()), spec.grid().n_steps + 1);
    return spec;
}

} // namespace

int HamiltonianSpec::step_of(double t) const {
    const TimeGrid& g = grid();
    const int i = static_cast<int>(std::floor(t / g.dt() + 1e-9));
    return std::clamp(i, 0, g.n_steps);
}

Eigen::VectorXcd HamiltonianSpec::coupling_at(double t) const { return coupling_at(t, step_of(t)); }

Eigen::VectorXcd HamiltonianSpec::coupling_at(double t, int step_index) const {
    const TimeGrid& g = grid();
    const double half = 2.0 * t / g.dt();
    const double j = std::round(half);
    if (std::abs(half - j) < 1e-9 && j >= 0 && j <= 2.0 * g.n_steps) {
        const int ji = static_cast<int>(j);
        // the tabulated sample at a grid point belongs to the step that starts there
        if (std::min(ji / 2, g.n_steps) == step_index) return couplings.col(ji);
    }
    return compute_coupling(*this, trajectory->at(t), step_index);
}

std::vector<int> HamiltonianSpec::active_modes(int grid_index) const {
    std::vector<int> out;
    for (int k = 0; k < n_modes(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (grid_index >= active_from[ku] && grid_index < active_until[ku]) out.push_back(k);
    }
    return out;
}

HamiltonianSpec full_chain_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj) {
    const int n = traj ? traj->n_sites() : 0;
    auto spec = base_spec(HamiltonianVariant::FullChain, system, std::move(traj), Eigen::MatrixXcd::Identity(n, n));
    fill_couplings(spec);
    return spec;
}

HamiltonianSpec normal_modes_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                  const Eigen::MatrixXcd& modes) {
    auto spec = base_spec(HamiltonianVariant::NormalModes, system, std::move(traj), modes);
    fill_couplings(spec);
    return spec;
}

HamiltonianSpec minimal_forward_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                     const ModeBasis& forward) {
    auto spec = base_spec(HamiltonianVariant::MinimalForward, system, std::move(traj), forward.vectors);
    if (forward.arrival.size() != static_cast<std::size_t>(forward.size()))
        throw std::invalid_argument("minimal_forward_spec: arrival times missing");
    for (int k = 0; k < forward.size(); ++k)
        spec.active_from[static_cast<std::size_t>(k)] = first_active_step(spec.grid(), forward.arrival[static_cast<std::size_t>(k)]);
    fill_couplings(spec);
    return spec;
}

HamiltonianSpec escaped_dropout_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                     const ModeBasis& escaped) {
    if (escaped.escape.size() != static_cast<std::size_t>(escaped.size()))
        throw std::invalid_argument("escaped_dropout_spec: escape times missing");
    auto spec = base_spec(HamiltonianVariant::NormalModes, system, std::move(traj), completing_unitary(escaped.vectors));
    const int n_steps = spec.grid().n_steps;
    for (int k = 0; k < escaped.size(); ++k) {
        const int e = grid_index_of(spec.grid(), escaped.escape[static_cast<std::size_t>(k)]);
        spec.active_until[static_cast<std::size_t>(k)] = e >= n_steps ? n_steps + 1 : e;
    }
    fill_couplings(spec);
    return spec;
}

HamiltonianSpec effective_relevant_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                                        const ModeBasis& forward, const ModeBasis& escaped) {
    auto spec = base_spec(HamiltonianVariant::EffectiveRelevant, system, std::move(traj), escaped.vectors);
    const TimeGrid& grid = spec.grid();
    const int n_steps = grid.n_steps;
    if (forward.arrival.size() != static_cast<std::size_t>(forward.size()) ||
        escaped.escape.size() != static_cast<std::size_t>(escaped.size()))
        throw std::invalid_argument("effective_relevant_spec: mode times missing");

    std::vector<int> in_index, out_index;
    for (double t : forward.arrival) in_index.push_back(first_active_step(grid, t));
    for (double t : escaped.escape) {
        // modes still coupled at T never leave
        const int e = grid_index_of(grid, t);
        out_index.push_back(e >= n_steps ? n_steps + 1 : e);
    }
    for (int k = 0; k < escaped.size(); ++k)
        spec.active_until[static_cast<std::size_t>(k)] = out_index[static_cast<std::size_t>(k)];

    std::vector<int> changes{0};
    changes.insert(changes.end(), in_index.begin(), in_index.end());
    for (int e : out_index)
        if (e <= n_steps) changes.push_back(e);
    std::sort(changes.begin(), changes.end());
    changes.erase(std::unique(changes.begin(), changes.end()), changes.end());

    const int n = spec.trajectory->n_sites();
    for (int start : changes) {
        Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(n, n);
        for (int k = 0; k < forward.size(); ++k)
            if (in_index[static_cast<std::size_t>(k)] <= start) {
                const auto v = forward.vectors.col(k);
                proj += v * v.adjoint();
            }
        for (int k = 0; k < escaped.size(); ++k)
            if (out_index[static_cast<std::size_t>(k)] <= start) {
                const auto v = escaped.vectors.col(k);
                proj -= v * v.adjoint();
            }
        spec.schedule.push_back({start, std::move(proj)});
    }
    fill_couplings(spec);
    return spec;
}

HamiltonianSpec perp_spec(const OpenSystem& system, std::shared_ptr<const SpreadTrajectory> traj,
                          const Eigen::VectorXcd& dropped) {
    const int n = traj ? traj->n_sites() : 0;
    auto spec = base_spec(HamiltonianVariant::Perp, system, std::move(traj), Eigen::MatrixXcd::Identity(n, n));
    if (dropped.size() != n) throw std::invalid_argument("perp_spec: dropped mode has wrong length");
    const double nrm = dropped.norm();
    if (nrm == 0.0) throw std::invalid_argument("perp_spec: dropped mode is zero");
    const Eigen::VectorXcd k = dropped / nrm;
    spec.dropped_mode = k;
    spec.schedule.push_back({0, Eigen::MatrixXcd::Identity(n, n) - k * k.adjoint()});
    fill_couplings(spec);
    return spec;
}

HamiltonianAction::HamiltonianAction(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t)
    : HamiltonianAction(spec, std::move(basis), t, spec.step_of(t)) {}

HamiltonianAction::HamiltonianAction(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t,
                                     int step_index)
    : basis_(std::move(basis)),
      coupling_(spec.coupling_at(t, step_index)),
      g_(spec.system.coupling),
      drive_(spec.system.drive_amplitude * std::cos(spec.system.drive_frequency * t)) {
    if (!basis_ || basis_->n_modes() != spec.n_modes())
        throw std::invalid_argument("HamiltonianAction: Fock basis does not match the mode count");
}

namespace {

// plain product; avoids the NaN-recovery call of std::complex operator*
inline cplx mul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

} // namespace

void HamiltonianAction::apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
    const auto dim = static_cast<Eigen::Index>(basis_->dim());
    out.resize(in.size());
    const cplx* down_in = in.data();
    const cplx* up_in = in.data() + dim;
    cplx* down_out = out.data();
    cplx* up_out = out.data() + dim;
    for (Eigen::Index s = 0; s < dim; ++s) {
        down_out[s] = drive_ * up_in[s];
        up_out[s] = up_in[s] + drive_ * down_in[s];
    }
    const int m = static_cast<int>(coupling_.size());
    std::vector<cplx> raise(static_cast<std::size_t>(m)), lower(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        raise[static_cast<std::size_t>(k)] = g_ * coupling_(k);
        lower[static_cast<std::size_t>(k)] = g_ * std::conj(coupling_(k));
    }
    for (Eigen::Index s = 0; s < dim; ++s) {
        const cplx d = down_in[s];
        double acc_re = 0.0, acc_im = 0.0;
        for (const auto& l : basis_->lowerings(static_cast<std::size_t>(s))) {
            // s+ A: kappa_k lowers the down block into the up block
            up_out[l.target] += l.amplitude * mul(lower[static_cast<std::size_t>(l.mode)], d);
            // s- A^dag: kappa_k^dag raises the up block into the down block
            const cplx r = mul(raise[static_cast<std::size_t>(l.mode)], up_in[l.target]);
            acc_re += l.amplitude * r.real();
            acc_im += l.amplitude * r.imag();
        }
        down_out[s] += cplx(acc_re, acc_im);
    }
}

HamiltonianAction assemble(const HamiltonianSpec& spec, std::shared_ptr<const FockBasis> basis, double t) {
    return HamiltonianAction(spec, std::move(basis), t);
}

Propagator::Propagator(const HamiltonianSpec& spec, KrylovOptions krylov) : spec_(spec), krylov_(krylov) {}

void Propagator::advance(ManyBodyState& state, double t, double h, int step_index, int depth) const {
    const HamiltonianAction action(spec_, state.basis, t + 0.5 * h, step_index);
    Eigen::VectorXcd psi = state.amplitudes;
    const double before = psi.norm();
    const auto res = krylov_exp_step([&action](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { action.apply(in, out); },
                                     psi, h, krylov_);
    if (res.converged && std::abs(psi.norm() - before) <= 1e-5 * std::max(before, 1e-300)) {
        state.amplitudes = std::move(psi);
        return;
    }
    if (depth >= 30) throw std::runtime_error("Propagator: step did not converge after repeated halving");
    advance(state, t, 0.5 * h, step_index, depth + 1);
    advance(state, t + 0.5 * h, 0.5 * h, step_index, depth + 1);
}

void Propagator::step(ManyBodyState& state, int i) const {
    const TimeGrid& g = spec_.grid();
    if (i < 0 || i >= g.n_steps) throw std::out_of_range("Propagator::step: index outside the grid");
    advance(state, g.time(i), g.time(i + 1) - g.time(i), i, 0);
}

void Propagator::evolve(ManyBodyState& state, int from_index, int to_index) const {
    for (int i = from_index; i < to_index; ++i) step(state, i);
}

double sigma_z(const ManyBodyState& state) {
    const double up = state.block(1).squaredNorm();
    const double down = state.block(0).squaredNorm();
    const double total = up + down;
    if (total == 0.0) throw std::domain_error("sigma_z: zero state");
    return (up - down) / total;
}

Eigen::VectorXd chain_occupations(const ManyBodyState& state, const HamiltonianSpec& spec, double t,
                                  bool schrodinger_picture) {
    const Eigen::MatrixXcd d = one_body_density(state);
    const Eigen::MatrixXcd& b = spec.modes;
    Eigen::MatrixXcd g = b * d * b.adjoint();
    if (schrodinger_picture) {
        const Eigen::MatrixXcd w = spec.trajectory->backward_propagator(t);
        g = w.transpose() * g * w.conjugate();
    }
    return g.diagonal().real();
}

PropagationResult propagate(const HamiltonianSpec& spec, const ManyBodyState& initial, const PropagateOptions& options) {
    if (!initial.basis || initial.basis->n_modes() != spec.n_modes())
        throw std::invalid_argument("propagate: initial state does not match the mode count");
    const TimeGrid& grid = spec.grid();
    const int n = grid.n_steps;
    for (int idx : options.snapshot_indices)
        if (idx < 0 || idx > n) throw std::out_of_range("propagate: snapshot index outside the grid");

    PropagationResult result;
    std::vector<int> occ_idx;
    if (options.occupation_stride > 0) {
        for (int i = 0; i <= n; i += options.occupation_stride) occ_idx.push_back(i);
        if (occ_idx.back() != n) occ_idx.push_back(n);
    }
    result.occupation_indices = occ_idx;
    result.occupations.resize(spec.trajectory->n_sites(), static_cast<Eigen::Index>(occ_idx.size()));

    const Propagator prop(spec, options.krylov);
    ManyBodyState state = initial;
    const double norm0 = state.norm();
    std::size_t next_occ = 0;
    for (int i = 0; i <= n; ++i) {
        if (i > 0) prop.step(state, i - 1);
        const double t = grid.time(i);
        result.times.push_back(t);
        result.sigma_z.push_back(sigma_z(state));
        result.max_norm_drift = std::max(result.max_norm_drift, std::abs(state.norm() - norm0));
        if (next_occ < occ_idx.size() && occ_idx[next_occ] == i) {
            result.occupations.col(static_cast<Eigen::Index>(next_occ)) =
                chain_occupations(state, spec, t, options.schrodinger_picture);
            ++next_occ;
        }
        for (int idx : options.snapshot_indices)
            if (idx == i) {
                result.snapshot_indices.push_back(i);
                result.snapshots.push_back(state);
            }
    }
    result.final_state = std::move(state);
    return result;
}

double sqrt_fidelity(const ManyBodyState& a, const ManyBodyState& b) {
    require_same_basis(a, b);
    return std::abs(a.amplitudes.dot(b.amplitudes));
}

Eigen::VectorXcd slot_vector(const Eigen::MatrixXcd& modes, const Eigen::VectorXcd& chain_mode) {
    return (modes.adjoint() * chain_mode).conjugate();
}

ManyBodyState change_slots(const ManyBodyState& state, const Eigen::MatrixXcd& from, const Eigen::MatrixXcd& to) {
    if (from.cols() != to.cols() || from.rows() != to.rows())
        throw std::invalid_argument("change_slots: slot sets differ in shape");
    return rotate_modes(state, Eigen::MatrixXcd((to.adjoint() * from).conjugate()));
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<SweepPoint> guard_mode_sweep(const SweepRequest& request) {
    const auto& normal = request.normal;
    const int n_all = normal.size();
    if (request.m_max < 1 || request.m_max > n_all) throw std::invalid_argument("guard_mode_sweep: m_max out of range");
    if (!request.trajectory) throw std::invalid_argument("guard_mode_sweep: missing trajectory");

    const auto ref_basis = build_basis(n_all, request.n_cut);
    const auto ref_spec = normal_modes_spec(request.system, request.trajectory, normal.vectors);
    const auto reference =
        propagate(ref_spec, ManyBodyState::product_vacuum(ref_basis, request.ground, request.excited)).final_state;

    std::vector<SweepPoint> points(static_cast<std::size_t>(request.m_max));
    parallel_for(request.m_max, request.threads, [&](int idx) {
        const int m = idx + 1;
        SweepPoint& p = points[static_cast<std::size_t>(idx)];
        p.m = m;
        for (int q = m; q < n_all; ++q) p.tail_mass += normal.significance[static_cast<std::size_t>(q)];
        const ModeBasis kept = normal.leading(m);
        const auto basis = build_basis(m, request.n_cut);
        const auto init = ManyBodyState::product_vacuum(basis, request.ground, request.excited);
        ManyBodyState final_state;
        if (request.family == SweepFamily::NormalModes) {
            final_state = propagate(normal_modes_spec(request.system, request.trajectory, kept.vectors), init).final_state;
        } else {
            const double hi = normal.significance[static_cast<std::size_t>(m - 1)];
            const double lo = m < n_all ? normal.significance[static_cast<std::size_t>(m)] : 0.5 * hi;
            p.a_cut = std::sqrt(std::max(hi, 0.0) * std::max(lo, 0.0));
            if (p.a_cut <= 0.0) p.a_cut = 0.5 * hi;
            const ModeBasis forward = minimal_forward_basis(*request.trajectory, kept, p.a_cut);
            const auto spec = minimal_forward_spec(request.system, request.trajectory, forward);
            final_state = change_slots(propagate(spec, init).final_state, forward.vectors, kept.vectors);
        }
        p.infidelity = infidelity(reference, embed(final_state, ref_basis));
    });
    return points;
}

} // namespace lch

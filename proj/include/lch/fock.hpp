// fock.hpp - truncated bosonic Fock space under a total-quanta cap, ladder
// operators and passive (number-conserving) mode rotations.

#pragma once

#include "lch/chain_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lch {

// Occupation tuples (n_1..n_M) with sum <= n_cut, graded by total quanta and
// ordered lexicographically descending within a shell:
// (2 modes, cap 1) -> (0,0), (1,0), (0,1).
class FockBasis {
public:
    static constexpr std::size_t kMaxDimension = 10'000'000;

    FockBasis(int n_modes, int n_cut);

    int n_modes() const { return n_modes_; }
    int n_cut() const { return n_cut_; }
    std::size_t dim() const { return dim_; }

    std::span<const std::uint8_t> occupation(std::size_t index) const {
        return {occupations_.data() + index * static_cast<std::size_t>(n_modes_), static_cast<std::size_t>(n_modes_)};
    }
    int occupation(std::size_t index, int mode) const {
        return occupations_[index * static_cast<std::size_t>(n_modes_) + static_cast<std::size_t>(mode)];
    }
    int total(std::size_t index) const { return totals_[index]; }
    std::optional<std::size_t> index_of(std::span<const std::uint8_t> occupation) const;

    // Index of the state with one quantum less / more in `mode`, or -1.
    std::int32_t lowered(std::size_t index, int mode) const {
        return lower_[index * static_cast<std::size_t>(n_modes_) + static_cast<std::size_t>(mode)];
    }
    std::int32_t raised(std::size_t index, int mode) const {
        return raise_[index * static_cast<std::size_t>(n_modes_) + static_cast<std::size_t>(mode)];
    }

    // Sparse annihilation structure: for state s, entries (mode, s - e_mode, sqrt(n_mode)).
    struct Lowering {
        std::int32_t mode;
        std::int32_t target;
        double amplitude;
    };
    std::span<const Lowering> lowerings(std::size_t index) const {
        return {lowerings_.data() + lowering_offsets_[index], lowering_offsets_[index + 1] - lowering_offsets_[index]};
    }

    bool operator==(const FockBasis& other) const { return n_modes_ == other.n_modes_ && n_cut_ == other.n_cut_; }

private:
    int n_modes_;
    int n_cut_;
    std::size_t dim_ = 0;
    std::vector<std::uint8_t> occupations_;
    std::vector<std::uint8_t> totals_;
    std::unordered_map<std::string, std::size_t> lookup_;
    std::vector<std::int32_t> lower_;
    std::vector<std::int32_t> raise_;
    std::vector<Lowering> lowerings_;
    std::vector<std::size_t> lowering_offsets_;
};

// C(n_modes + n_cut, n_cut), or nullopt past the dimension guard.
std::optional<std::size_t> fock_dimension(int n_modes, int n_cut);

std::shared_ptr<const FockBasis> build_basis(int n_modes, int n_cut);

// Qubit (index 0 = ground, 1 = excited) times environment Fock space.
// amplitudes[q * dim + s].
struct ManyBodyState {
    std::shared_ptr<const FockBasis> basis;
    Eigen::VectorXcd amplitudes;

    static ManyBodyState zero(std::shared_ptr<const FockBasis> basis);
    // |qubit> (x) |vacuum>, qubit = ground_amp |g> + excited_amp |e>.
    static ManyBodyState product_vacuum(std::shared_ptr<const FockBasis> basis, cplx ground_amp, cplx excited_amp);

    std::size_t env_dim() const { return basis->dim(); }
    double norm() const { return amplitudes.norm(); }
    auto block(int qubit) { return amplitudes.segment(static_cast<Eigen::Index>(qubit * env_dim()), static_cast<Eigen::Index>(env_dim())); }
    auto block(int qubit) const { return amplitudes.segment(static_cast<Eigen::Index>(qubit * env_dim()), static_cast<Eigen::Index>(env_dim())); }
};

// Throws std::invalid_argument unless both states live on equal bases.
void require_same_basis(const ManyBodyState& a, const ManyBodyState& b);

enum class LadderKind { Create, Annihilate, Number };

// Bosonic matrix elements sqrt(n+1), sqrt(n), n; creation past the cap drops
// the component.
ManyBodyState apply_ladder(const ManyBodyState& state, int mode, LadderKind kind);

// One-body density matrix D_kl = <a_k^dag a_l>.
Eigen::MatrixXcd one_body_density(const ManyBodyState& state);

// Total environment quanta <sum_k n_k>.
double total_quanta(const ManyBodyState& state);

// Two-mode elimination step of a unitary: modes (p, q) mixed by the 2x2
// matrix u (columns are the images of e_p, e_q).
struct GivensRotation {
    int p;
    int q;
    Eigen::Matrix2cd u;
};

// U = G_1 ... G_K D with column-major elimination of the sub-diagonal.
struct RotationPlan {
    int n_modes = 0;
    std::vector<GivensRotation> rotations;  // applied last-to-first
    Eigen::VectorXcd phases;                // D
};

// Throws std::invalid_argument when U is not unitary to 1e-10.
RotationPlan plan_rotation(const Eigen::MatrixXcd& unitary);

// Many-body representation R(U) with R a_j^dag R^dag = sum_i U_ij a_i^dag and
// R |vac> = |vac>.
ManyBodyState rotate_modes(const ManyBodyState& state, const Eigen::MatrixXcd& unitary);
ManyBodyState rotate_modes(const ManyBodyState& state, const RotationPlan& plan);
void apply_two_mode(Eigen::VectorXcd& amplitudes, const FockBasis& basis, const GivensRotation& rotation);

// Pads occupation tuples with zeros for the extra modes of `target`.
ManyBodyState embed(const ManyBodyState& state, std::shared_ptr<const FockBasis> target);

// Unitary whose first column is `mode` (unit norm).
Eigen::MatrixXcd completing_unitary(const Eigen::VectorXcd& mode);
// Unitary whose leading columns are the given orthonormal columns.
Eigen::MatrixXcd completing_unitary(const Eigen::MatrixXcd& columns);

} // namespace lch

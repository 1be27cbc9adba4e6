// krylov.hpp - Lanczos approximation of exp(-i dt H) |psi> for a Hermitian,
// matrix-free H.

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace lch {

using HermitianAction = std::function<void(const Eigen::VectorXcd& in, Eigen::VectorXcd& out)>;

struct KrylovOptions {
    int max_dim = 20;
    double tolerance = 1e-10;
};

struct KrylovStep {
    bool converged = false;
    int dim = 0;
    double error_estimate = 0.0;
};

// On convergence psi is replaced by exp(-i dt H) psi; otherwise psi is left
// untouched and the caller should shorten the step.
KrylovStep krylov_exp_step(const HermitianAction& apply, Eigen::VectorXcd& psi, double dt,
                           const KrylovOptions& options = {});

} // namespace lch

// krylov.cpp - short-iteration Lanczos exponential

#include "lch/krylov.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace lch {

namespace {

// y -= c x; Eigen's generic complex-scalar path is several times slower here
void subtract_scaled(std::complex<double> c, const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    const double cr = c.real(), ci = c.imag();
    const double* xp = reinterpret_cast<const double*>(x.data());
    double* yp = reinterpret_cast<double*>(y.data());
    const Eigen::Index n = x.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xr = xp[2 * i], xi = xp[2 * i + 1];
        yp[2 * i] -= cr * xr - ci * xi;
        yp[2 * i + 1] -= cr * xi + ci * xr;
    }
}

} // namespace

KrylovStep krylov_exp_step(const HermitianAction& apply, Eigen::VectorXcd& psi, double dt,
                           const KrylovOptions& options) {
    using cplx = std::complex<double>;
    KrylovStep result;
    const double beta0 = psi.norm();
    if (beta0 == 0.0) {
        result.converged = true;
        return result;
    }

    std::vector<Eigen::VectorXcd> basis;
    basis.reserve(static_cast<std::size_t>(options.max_dim));
    basis.push_back(psi / beta0);
    std::vector<double> diag;
    std::vector<double> offdiag;
    Eigen::VectorXcd w(psi.size());

    for (int j = 0; j < options.max_dim; ++j) {
        apply(basis[static_cast<std::size_t>(j)], w);
        const auto& vj = basis[static_cast<std::size_t>(j)];
        if (j > 0) w -= offdiag.back() * basis[static_cast<std::size_t>(j - 1)];
        const double a = vj.dot(w).real();
        w -= a * vj;
        // one round of reorthogonalization against the newest vector; short
        // recurrences stay orthogonal enough at these subspace sizes
        subtract_scaled(vj.dot(w), vj, w);
        diag.push_back(a);
        const double b = w.norm();

        const int k = j + 1;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i) t(i, i) = diag[static_cast<std::size_t>(i)];
        for (int i = 0; i + 1 < k; ++i) t(i, i + 1) = t(i + 1, i) = offdiag[static_cast<std::size_t>(i)];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
        const Eigen::MatrixXd& s = small.eigenvectors();
        Eigen::VectorXcd coeff(k);
        for (int i = 0; i < k; ++i) coeff(i) = std::polar(1.0, -small.eigenvalues()(i) * dt) * s(0, i);
        const Eigen::VectorXcd y = s.cast<cplx>() * coeff;

        const double error = b * std::abs(y(k - 1));
        const bool invariant = b <= 1e-14 * (std::abs(a) + 1.0);
        if (error < options.tolerance || invariant) {
            psi.setZero();
            for (int i = 0; i < k; ++i) subtract_scaled(-beta0 * y(i), basis[static_cast<std::size_t>(i)], psi);
            result.converged = true;
            result.dim = k;
            result.error_estimate = error;
            return result;
        }
        offdiag.push_back(b);
        if (k < options.max_dim) basis.push_back(w / b);
        result.error_estimate = error;
        result.dim = k;
    }
    return result;
}

} // namespace lch

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fpv/chain.hpp"
#include "fpv/errors.hpp"

namespace fpv {

enum class EigenMethod { dense, power };

inline const char* to_string(EigenMethod m) {
    return m == EigenMethod::dense ? "dense" : "power";
}

struct SpectralOptions {
    /// Up to this many transient states the full dense eigendecomposition is
    /// used; beyond it, power iteration with deflation.
    Eigen::Index dense_cutoff = 64;
    std::size_t max_iterations = 1'000'000;
    double residual_tolerance = k_residual_tolerance;
    /// Force the iterative path regardless of size (mainly for testing).
    bool force_power = false;
    /// When the iterative method stalls, retry densely instead of throwing.
    bool allow_dense_fallback = true;
};

struct PerronResult {
    double lambda2 = 0.0;
    Eigen::VectorXd z;  ///< non-negative, L1-normalized
    EigenMethod method = EigenMethod::dense;
    std::size_t iterations = 0;
};

namespace detail {

/// Clamps magnitudes below k_eigen_clamp to exact zero and L1-normalizes.
inline void clamp_and_normalize(Eigen::VectorXd& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (std::abs(z(i)) < k_eigen_clamp) z(i) = 0.0;
    }
    const double norm = z.cwiseAbs().sum();
    if (norm > 0.0) z /= norm;
}

/// Power iteration for the Perron pair of a non-negative matrix. The uniform
/// positive start vector guarantees a component along the Perron direction,
/// and every iterate stays entrywise non-negative.
inline bool power_perron(const Eigen::MatrixXd& a, std::size_t max_iterations, double tol,
                         PerronResult& out) {
    const Eigen::Index n = a.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        Eigen::VectorXd ax = a * x;
        const double lambda = ax.sum();  // L1 norm: ax is non-negative
        if (lambda < std::numeric_limits<double>::min()) {
            // Nilpotent-type block: spectral radius zero.
            out = PerronResult{0.0, std::move(x), EigenMethod::power, it};
            detail::clamp_and_normalize(out.z);
            return true;
        }
        const double residual = (ax - lambda * x).lpNorm<Eigen::Infinity>();
        if (residual <= tol) {
            out = PerronResult{lambda, std::move(x), EigenMethod::power, it};
            detail::clamp_and_normalize(out.z);
            return true;
        }
        x = ax / lambda;
    }
    return false;
}

/// Eigenvalue moduli of a dense matrix, sorted descending.
inline std::vector<double> modulus_spectrum_of(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
    std::vector<double> mods(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        mods[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()(i));
    }
    std::sort(mods.begin(), mods.end(), std::greater<>());
    return mods;
}

/// Full dense solve: Perron pair from the eigendecomposition. The eigenvector
/// is rotated to the real axis, sign-oriented, clamped and normalized. If it
/// still has a genuinely negative entry (near-degenerate spectral radius can
/// mix eigenvectors), a power refinement recovers the non-negative direction.
inline PerronResult dense_perron(const Eigen::MatrixXd& a, const SpectralOptions& opt) {
    const Eigen::Index n = a.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
    Eigen::Index top = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(solver.eigenvalues()(i)) > std::abs(solver.eigenvalues()(top))) top = i;
    }
    PerronResult out;
    out.lambda2 = std::abs(solver.eigenvalues()(top));
    out.method = EigenMethod::dense;

    Eigen::VectorXcd v = solver.eigenvectors().col(top);
    Eigen::Index big = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(v(i)) > std::abs(v(big))) big = i;
    }
    if (std::abs(v(big)) > 0.0) v *= std::conj(v(big)) / std::abs(v(big));
    Eigen::VectorXd z = v.real();
    if (z.sum() < 0.0) z = -z;
    clamp_and_normalize(z);
    const double residual_bound = std::max(opt.residual_tolerance, 1e-12);
    if ((z.array() < 0.0).any() ||
        (a * z - out.lambda2 * z).lpNorm<Eigen::Infinity>() > residual_bound) {
        // Near-degenerate or defective spectral radius: the solver may hand
        // back a mixed eigenvector. Power iteration recovers the
        // non-negative direction.
        PerronResult refined;
        if (power_perron(a, opt.max_iterations, residual_bound, refined)) {
            refined.method = EigenMethod::dense;
            return refined;
        }
        throw ConvergenceError("Perron vector could not be resolved to a non-negative direction");
    }
    out.z = std::move(z);
    return out;
}

/// Largest eigenvalue modulus of a general real matrix by orthogonal (block)
/// subspace iteration; a 2-column block tracks complex conjugate pairs.
inline bool subspace_radius(const Eigen::MatrixXd& a, std::size_t max_iterations, double tol,
                            double& radius_out) {
    const Eigen::Index n = a.rows();
    if (n == 0) {
        radius_out = 0.0;
        return true;
    }
    const Eigen::Index block = std::min<Eigen::Index>(2, n);
    Eigen::MatrixXd q(n, block);
    for (Eigen::Index i = 0; i < n; ++i) {
        q(i, 0) = 1.0;
        if (block > 1) q(i, 1) = (i % 2 == 0) ? 1.0 : -1.0;
    }
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(n, block);

    double prev = std::numeric_limits<double>::quiet_NaN();
    std::size_t stable = 0;
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        Eigen::MatrixXd aq = a * q;
        const double scale = aq.norm();
        if (scale < std::numeric_limits<double>::min()) {
            radius_out = 0.0;
            return true;
        }
        Eigen::MatrixXd h = q.transpose() * aq;  // block x block projection
        double estimate = 0.0;
        if (block == 1) {
            estimate = std::abs(h(0, 0));
        } else {
            const double tr = h(0, 0) + h(1, 1);
            const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
            const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det));
            estimate = std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
        }
        if (std::isfinite(prev) && std::abs(estimate - prev) <= tol * std::max(1.0, estimate)) {
            if (++stable >= 4) {
                radius_out = estimate;
                return true;
            }
        } else {
            stable = 0;
        }
        prev = estimate;
        q = Eigen::HouseholderQR<Eigen::MatrixXd>(aq).householderQ() *
            Eigen::MatrixXd::Identity(n, block);
    }
    return false;
}

}  // namespace detail

/// Perron pair of the transient block: the spectral radius lambda2 and its
/// non-negative eigenvector z with ||z||_1 = 1. Dense decomposition for small
/// blocks, power iteration beyond the cutoff.
inline PerronResult perron(const Eigen::MatrixXd& t_hat, const SpectralOptions& opt = {}) {
    if (t_hat.rows() != t_hat.cols() || t_hat.rows() < 1) {
        throw ShapeError("perron expects a non-empty square matrix");
    }
    if ((t_hat.array() < 0.0).any()) {
        throw NegativeEntryError("perron expects a non-negative matrix");
    }
    const bool use_dense = !opt.force_power && t_hat.rows() <= opt.dense_cutoff;
    if (use_dense) return detail::dense_perron(t_hat, opt);

    PerronResult out;
    if (detail::power_perron(t_hat, opt.max_iterations, opt.residual_tolerance, out)) return out;
    if (opt.allow_dense_fallback) return detail::dense_perron(t_hat, opt);
    throw ConvergenceError("power iteration did not reach residual " +
                           std::to_string(opt.residual_tolerance) + " in " +
                           std::to_string(opt.max_iterations) + " iterations");
}

/// Spectral quantities of a canonicalized chain.
struct SpectralSummary {
    double lambda2 = 0.0;
    double lambda3_modulus = 0.0;
    StateDistribution phi;  ///< canonical order; halt entry exactly 0
    double escape_prob = 1.0;
    double memory_constant = std::numeric_limits<double>::quiet_NaN();  ///< NaN when lambda2 == 1
    EigenMethod eigen_method = EigenMethod::dense;
    /// Sorted eigenvalue moduli of the transient block (dense path only).
    std::vector<double> modulus_spectrum;

    bool lambda2_is_one() const noexcept { return lambda2 == 1.0; }
};

namespace detail {

/// Second-largest eigenvalue modulus on the iterative path: Wielandt
/// deflation with the left and right Perron vectors removes one copy of
/// lambda2, then subspace iteration estimates the radius of the remainder.
inline double power_lambda3(const Eigen::MatrixXd& t_hat, const PerronResult& right,
                            const SpectralOptions& opt) {
    PerronResult left;
    if (!detail::power_perron(t_hat.transpose(), opt.max_iterations, opt.residual_tolerance,
                              left)) {
        throw ConvergenceError("left Perron vector did not converge");
    }
    const double wz = left.z.dot(right.z);
    if (std::abs(wz) < 1e-300) {
        throw ConvergenceError("deflation failed: left/right Perron vectors are orthogonal");
    }
    const Eigen::MatrixXd deflated =
        t_hat - (right.lambda2 / wz) * (right.z * left.z.transpose());
    double radius = 0.0;
    if (!detail::subspace_radius(deflated, opt.max_iterations,
                                 std::max(opt.residual_tolerance, 1e-13), radius)) {
        throw ConvergenceError("subspace iteration for the third eigenvalue did not converge");
    }
    return radius;
}

}  // namespace detail

/// Computes lambda2, |lambda3|, the metastable distribution and the memory
/// constant in one pass.
inline SpectralSummary analyze_spectrum(const CanonicalChain& chain,
                                        const SpectralOptions& opt = {}) {
    const Eigen::Index n = chain.transient_count();
    SpectralSummary out;

    const bool use_dense = !opt.force_power && n <= opt.dense_cutoff;
    PerronResult pr;
    if (use_dense) {
        pr = detail::dense_perron(chain.t_hat, opt);
        out.modulus_spectrum = detail::modulus_spectrum_of(chain.t_hat);
        out.lambda3_modulus = n >= 2 ? out.modulus_spectrum[1] : 0.0;
    } else {
        if (!detail::power_perron(chain.t_hat, opt.max_iterations, opt.residual_tolerance, pr)) {
            if (!opt.allow_dense_fallback) {
                throw ConvergenceError("power iteration did not converge for lambda2");
            }
            pr = detail::dense_perron(chain.t_hat, opt);
            out.modulus_spectrum = detail::modulus_spectrum_of(chain.t_hat);
            out.lambda3_modulus = n >= 2 ? out.modulus_spectrum[1] : 0.0;
            pr.method = EigenMethod::dense;
        } else if (n >= 2) {
            try {
                out.lambda3_modulus = detail::power_lambda3(chain.t_hat, pr, opt);
            } catch (const ConvergenceError&) {
                if (!opt.allow_dense_fallback) throw;
                out.modulus_spectrum = detail::modulus_spectrum_of(chain.t_hat);
                out.lambda3_modulus = out.modulus_spectrum[1];
            }
        }
    }

    out.eigen_method = pr.method;
    // Row-sum slack within eps_row can push the computed radius a hair above
    // one; a chain that close to non-escaping is reported as lambda2 = 1.
    out.lambda2 = std::min(pr.lambda2, 1.0);
    if (std::abs(1.0 - out.lambda2) < k_unit_eigenvalue_tolerance) out.lambda2 = 1.0;
    out.lambda3_modulus = std::min(out.lambda3_modulus, out.lambda2);
    out.escape_prob = 1.0 - out.lambda2;

    Eigen::VectorXd phi(chain.size());
    phi(0) = 0.0;
    phi.tail(n) = pr.z;
    out.phi = StateDistribution{std::move(phi)};

    if (out.lambda2 < 1.0) {
        out.memory_constant = out.lambda3_modulus >= 1.0
                                  ? std::numeric_limits<double>::infinity()
                                  : (1.0 - out.lambda2) / (1.0 - out.lambda3_modulus);
    }
    return out;
}

/// The metastable distribution: zero at the halt state, the normalized Perron
/// vector on the transient states (canonical order).
inline StateDistribution metastable_distribution(const CanonicalChain& chain,
                                                 const SpectralOptions& opt = {}) {
    return analyze_spectrum(chain, opt).phi;
}

/// Largest eigenvalue modulus of the transient block strictly after the
/// spectral radius in the modulus ordering; equals lambda2 when the spectral
/// radius has multiplicity above one. Zero by convention for a single
/// transient state.
inline double lambda3_modulus(const CanonicalChain& chain, const SpectralOptions& opt = {}) {
    return analyze_spectrum(chain, opt).lambda3_modulus;
}

/// Memory constant (1 - lambda2) / (1 - |lambda3|): how fast the initial
/// distribution is forgotten relative to the survival time.
inline double memory_constant(const CanonicalChain& chain, const SpectralOptions& opt = {}) {
    const SpectralSummary s = analyze_spectrum(chain, opt);
    if (s.lambda2_is_one()) {
        throw UndefinedError("memory constant is undefined when lambda2 = 1");
    }
    return s.memory_constant;
}

}  // namespace fpv

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "fpv/chain.hpp"
#include "fpv/errors.hpp"
#include "fpv/spectral.hpp"

namespace fpv {

/// What a passage statistic accumulates: plain step counts or a named
/// per-transition value.
struct ValueKind {
    bool is_steps = true;
    std::string name;  ///< empty for steps
    std::string unit;

    static ValueKind steps() { return ValueKind{}; }
    static ValueKind custom(std::string name, std::string unit) {
        return ValueKind{false, std::move(name), std::move(unit)};
    }
};

/// First-passage statistics of a chain: system-wide mean M, per-state vector
/// m (canonical order, halt entry 0) and, for step counts, the standard
/// deviation of the first passage time.
struct PassageSummary {
    double mean = std::numeric_limits<double>::infinity();
    Eigen::VectorXd per_state;
    std::optional<double> fpt_std;
    ValueKind kind;
};

/// System-wide mean first passage time 1/(1 - lambda2); infinite when escape
/// is impossible.
inline double mfpt_scalar(const SpectralSummary& spectral) {
    if (spectral.lambda2_is_one()) return std::numeric_limits<double>::infinity();
    return 1.0 / (1.0 - spectral.lambda2);
}

/// Standard deviation of the first passage time, M * sqrt(lambda2). For
/// metastable chains this is close to the mean itself.
inline double fpt_std(const SpectralSummary& spectral) {
    if (spectral.lambda2_is_one()) {
        throw UndefinedError("FPT standard deviation is undefined when lambda2 = 1");
    }
    return mfpt_scalar(spectral) * std::sqrt(spectral.lambda2);
}

namespace detail {

/// Solves (I - Q) x = b where Q is the transient block in row form.
/// Factorization instead of an explicit inverse; a vanishing pivot means the
/// chain cannot escape (lambda2 = 1).
inline Eigen::VectorXd solve_passage_system(const CanonicalChain& chain,
                                            const Eigen::VectorXd& b) {
    const Eigen::Index n = chain.transient_count();
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(n, n) - chain.t_hat.transpose();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double scale = a.cwiseAbs().rowwise().sum().maxCoeff();
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < 1e-13 * scale) {
        throw SingularError("passage system is singular: lambda2 = 1, mean passage is infinite");
    }
    Eigen::VectorXd x = lu.solve(b);
    const double residual = (a * x - b).lpNorm<Eigen::Infinity>();
    const double bound = 1e-8 * static_cast<double>(chain.size()) *
                         std::max(1.0, b.lpNorm<Eigen::Infinity>());
    if (!(residual <= bound)) {
        throw SingularError("passage solve residual " + std::to_string(residual) +
                            " exceeds bound " + std::to_string(bound));
    }
    return x;
}

}  // namespace detail

/// Per-state mean first passage time vector m: zero at the halt state, the
/// solution of (I - Q) m = 1 on the transient states.
inline Eigen::VectorXd mfpt_vector(const CanonicalChain& chain) {
    const Eigen::Index n = chain.transient_count();
    Eigen::VectorXd m(chain.size());
    m(0) = 0.0;
    m.tail(n) = detail::solve_passage_system(chain, Eigen::VectorXd::Ones(n));
    return m;
}

/// Per-state mean first passage value vector for the chain's value matrix:
/// the expected one-step value b_i = sum_j T_s(i,j) T_v(i,j) replaces the
/// all-ones right-hand side. With a value matrix of all ones this reduces to
/// the MFPT vector exactly.
inline Eigen::VectorXd mfpv_vector(const CanonicalChain& chain) {
    if (!chain.model.value) {
        throw MissingValueMatrixError("chain has no value matrix");
    }
    const Eigen::Index n = chain.transient_count();
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        b(i) = chain.model.transition.row(i + 1).cwiseProduct(chain.model.value->row(i + 1)).sum();
    }
    Eigen::VectorXd m(chain.size());
    m(0) = 0.0;
    m.tail(n) = detail::solve_passage_system(chain, b);
    return m;
}

/// System-wide value m' phi: the per-state values weighted by the metastable
/// distribution.
inline double systemwide_value(const Eigen::VectorXd& m, const StateDistribution& phi) {
    if (m.size() != phi.p.size()) {
        throw ShapeError("per-state vector has length " + std::to_string(m.size()) +
                         ", distribution has " + std::to_string(phi.p.size()));
    }
    return m.dot(phi.p);
}

/// Assembles the step-count passage summary.
inline PassageSummary analyze_passage(const CanonicalChain& chain,
                                      const SpectralSummary& spectral) {
    PassageSummary out;
    out.kind = ValueKind::steps();
    out.mean = mfpt_scalar(spectral);
    if (spectral.lambda2_is_one()) {
        out.per_state = Eigen::VectorXd();
        return out;
    }
    out.per_state = mfpt_vector(chain);
    out.fpt_std = fpt_std(spectral);
    return out;
}

/// Assembles the passage summary for the chain's value matrix; the mean is
/// m' phi (the step-count scalar is the special case of an all-ones matrix).
inline PassageSummary analyze_passage_value(const CanonicalChain& chain,
                                            const SpectralSummary& spectral) {
    if (spectral.lambda2_is_one()) {
        throw SingularError("mean first passage value is undefined when lambda2 = 1");
    }
    PassageSummary out;
    out.kind = ValueKind::custom(chain.model.value_name.empty() ? "value" : chain.model.value_name,
                                 chain.model.value_unit);
    out.per_state = mfpv_vector(chain);
    out.mean = systemwide_value(out.per_state, spectral.phi);
    return out;
}

}  // namespace fpv

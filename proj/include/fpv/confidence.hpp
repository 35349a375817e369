#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "fpv/errors.hpp"

namespace fpv {

/// Confidence bounds on first passage time and, once scaled, on first
/// passage value. lfpt/ufpt hold with probability pr each under the
/// geometric escape model; valid_ordering records whether lfpt < ufpt,
/// which requires pr > lambda2 / (1 + lambda2).
struct FpvBounds {
    double pr = 0.0;
    double lfpt = 0.0;
    double ufpt = 0.0;
    double lfpv = std::numeric_limits<double>::quiet_NaN();
    double ufpv = std::numeric_limits<double>::quiet_NaN();
    bool valid_ordering = false;
    bool pr_at_boundary = false;  ///< pr == 1: lfpt pinned to 0, ufpt infinite
};

/// Bounds on the number of steps held with confidence pr:
///   lfpt = log_lambda2(pr),  ufpt = log_lambda2(1 - pr) + 1.
/// Returned as reals; callers may floor/ceil. pr = 1 yields the boundary pair
/// (0, +inf); lambda2 = 0 yields (0, 1) by continuity.
inline FpvBounds fpt_bounds(double lambda2, double pr) {
    if (!(pr > 0.0) || pr > 1.0) {
        throw DomainError("confidence level must lie in (0,1], got " + std::to_string(pr));
    }
    if (!(lambda2 >= 0.0) || lambda2 >= 1.0) {
        throw DomainError("lambda2 must lie in [0,1) for confidence bounds, got " +
                          std::to_string(lambda2));
    }
    FpvBounds out;
    out.pr = pr;
    out.valid_ordering = pr > lambda2 / (1.0 + lambda2);
    if (pr == 1.0) {
        out.lfpt = 0.0;
        out.ufpt = std::numeric_limits<double>::infinity();
        out.pr_at_boundary = true;
        return out;
    }
    if (lambda2 == 0.0) {
        out.lfpt = 0.0;
        out.ufpt = 1.0;
        return out;
    }
    const double log_lambda = std::log1p(lambda2 - 1.0);
    out.lfpt = std::log(pr) / log_lambda;
    out.ufpt = std::log1p(-pr) / log_lambda + 1.0;
    return out;
}

/// Scales FPT bounds to value bounds with the system-wide rate mfpv/mfpt.
inline std::pair<double, double> fpv_bounds(const FpvBounds& bounds, double mfpv, double mfpt) {
    if (!std::isfinite(mfpt) || mfpt <= 0.0) {
        throw DomainError("value-per-step rate needs a finite positive MFPT, got " +
                          std::to_string(mfpt));
    }
    const double rate = mfpv / mfpt;
    return {bounds.lfpt * rate, bounds.ufpt * rate};
}

/// Convenience: FPT bounds with the FPV fields filled in.
inline FpvBounds make_fpv_bounds(double lambda2, double pr, double mfpv, double mfpt) {
    FpvBounds out = fpt_bounds(lambda2, pr);
    const auto [lo, hi] = fpv_bounds(out, mfpv, mfpt);
    out.lfpv = lo;
    out.ufpv = hi;
    return out;
}

/// Probability that the passage takes more than M = 1/(1 - lambda2) steps,
/// lambda2^M. Increases towards its limit 1/e as lambda2 approaches one.
inline double survival_at_mean(double lambda2) {
    if (!(lambda2 >= 0.0) || lambda2 >= 1.0) {
        throw DomainError("lambda2 must lie in [0,1), got " + std::to_string(lambda2));
    }
    if (lambda2 == 0.0) return 0.0;
    return std::exp(std::log1p(lambda2 - 1.0) / (1.0 - lambda2));
}

}  // namespace fpv

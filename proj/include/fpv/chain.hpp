#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fpv/errors.hpp"

namespace fpv {

/// Tolerance for row sums of stochastic matrices. Model files store
/// probabilities in decimal, so anything tighter rejects legitimate input.
inline constexpr double k_row_tolerance = 1e-9;

/// Perron-vector entries with magnitude below this are snapped to exact zero.
inline constexpr double k_eigen_clamp = 1e-12;

/// Residual tolerance for iterative eigenvalue solves.
inline constexpr double k_residual_tolerance = 1e-12;

/// lambda2 closer to one than this is treated as exactly one (no escape).
inline constexpr double k_unit_eigenvalue_tolerance = 1e-13;

/// An absorbing Markov chain: named states, a row-stochastic transition
/// matrix, one absorbing halt state, and an optional per-transition value
/// matrix (units task-defined, e.g. km or days).
struct ChainModel {
    std::vector<std::string> state_names;
    Eigen::MatrixXd transition;  ///< row i = outgoing distribution of state i
    Eigen::Index halt_index = 0;
    std::optional<Eigen::MatrixXd> value;  ///< same shape as transition when present
    std::string value_name;                ///< reporting label, e.g. "distance"
    std::string value_unit;                ///< reporting label, e.g. "km"

    Eigen::Index size() const noexcept { return transition.rows(); }
};

/// A probability distribution over the states of a chain.
struct StateDistribution {
    Eigen::VectorXd p;
};

/// Checks that a vector is a valid state distribution for an l-state chain.
inline void validate_distribution(const Eigen::VectorXd& p, Eigen::Index l) {
    if (p.size() != l) {
        throw ShapeError("state distribution has length " + std::to_string(p.size()) +
                         ", chain has " + std::to_string(l) + " states");
    }
    if ((p.array() < 0.0).any()) {
        throw NegativeEntryError("state distribution has a negative entry");
    }
    if (std::abs(p.sum() - 1.0) > k_row_tolerance) {
        throw DomainError("state distribution sums to " + std::to_string(p.sum()) +
                          ", expected 1");
    }
}

/// Validates all ChainModel invariants and returns the model unchanged.
/// Rows are never silently renormalized; offending rows are reported.
inline ChainModel validate_chain(ChainModel model) {
    const Eigen::Index l = model.transition.rows();
    if (model.transition.cols() != l) {
        throw ShapeError("transition matrix is " + std::to_string(l) + "x" +
                         std::to_string(model.transition.cols()) + ", expected square");
    }
    if (l <= 1) {
        throw ShapeError("chain needs more than one state, got " + std::to_string(l));
    }
    if (static_cast<Eigen::Index>(model.state_names.size()) != l) {
        throw ShapeError("have " + std::to_string(model.state_names.size()) +
                         " state names for " + std::to_string(l) + " states");
    }
    {
        std::set<std::string> seen;
        for (const auto& name : model.state_names) {
            if (name.empty()) throw ShapeError("empty state name");
            if (!seen.insert(name).second) throw ShapeError("duplicate state name '" + name + "'");
        }
    }
    if (model.halt_index < 0 || model.halt_index >= l) {
        throw ShapeError("halt index " + std::to_string(model.halt_index) + " out of range");
    }
    for (Eigen::Index i = 0; i < l; ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < l; ++j) {
            const double p = model.transition(i, j);
            if (!(p >= 0.0)) {  // catches NaN as well
                throw NegativeEntryError("transition (" + model.state_names[i] + " -> " +
                                         model.state_names[j] + ") = " + std::to_string(p));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > k_row_tolerance) {
            throw RowSumError("row of state '" + model.state_names[i] + "' sums to " +
                                  std::to_string(sum) + ", expected 1",
                              i);
        }
    }
    for (Eigen::Index j = 0; j < l; ++j) {
        const double expected = (j == model.halt_index) ? 1.0 : 0.0;
        if (model.transition(model.halt_index, j) != expected) {
            throw HaltNotAbsorbingError("halt state '" + model.state_names[model.halt_index] +
                                        "' is not a unit self-loop");
        }
    }
    if (model.value) {
        if (model.value->rows() != l || model.value->cols() != l) {
            throw ShapeError("value matrix shape does not match transition matrix");
        }
        if (!model.value->allFinite()) {
            throw DomainError("value matrix has a non-finite entry");
        }
    }
    return model;
}

/// A validated chain reordered so the halt state sits at index 0, with the
/// blocks of the transposed transition matrix extracted: t1 is the
/// escape-probability row and t_hat the transient-to-transient block.
struct CanonicalChain {
    ChainModel model;  ///< reordered; halt at index 0
    Eigen::RowVectorXd t1;
    Eigen::MatrixXd t_hat;
    std::vector<Eigen::Index> to_canonical;  ///< original index -> canonical index
    std::vector<Eigen::Index> to_original;   ///< canonical index -> original index

    Eigen::Index size() const noexcept { return model.size(); }
    Eigen::Index transient_count() const noexcept { return t_hat.rows(); }

    /// Reorders a canonical per-state vector back to the original ordering.
    Eigen::VectorXd to_original_order(const Eigen::VectorXd& canonical) const {
        Eigen::VectorXd out(canonical.size());
        for (Eigen::Index i = 0; i < canonical.size(); ++i) {
            out(i) = canonical(to_canonical[static_cast<std::size_t>(i)]);
        }
        return out;
    }
};

/// Moves the halt state to index 0 by a symmetric row/column permutation and
/// extracts t1 and t_hat. The permutation is recorded so results can be
/// reported in the original ordering. Idempotent for halt-first models.
inline CanonicalChain canonicalize(ChainModel model) {
    model = validate_chain(std::move(model));
    const Eigen::Index l = model.size();

    std::vector<Eigen::Index> to_original(static_cast<std::size_t>(l));
    to_original[0] = model.halt_index;
    for (Eigen::Index i = 0, k = 1; i < l; ++i) {
        if (i != model.halt_index) to_original[static_cast<std::size_t>(k++)] = i;
    }
    std::vector<Eigen::Index> to_canonical(static_cast<std::size_t>(l));
    for (Eigen::Index c = 0; c < l; ++c) {
        to_canonical[static_cast<std::size_t>(to_original[static_cast<std::size_t>(c)])] = c;
    }

    CanonicalChain out;
    out.to_original = std::move(to_original);
    out.to_canonical = std::move(to_canonical);

    ChainModel reordered;
    reordered.state_names.resize(static_cast<std::size_t>(l));
    reordered.transition.resize(l, l);
    reordered.halt_index = 0;
    reordered.value_name = model.value_name;
    reordered.value_unit = model.value_unit;
    if (model.value) reordered.value = Eigen::MatrixXd(l, l);
    for (Eigen::Index i = 0; i < l; ++i) {
        const Eigen::Index oi = out.to_original[static_cast<std::size_t>(i)];
        reordered.state_names[static_cast<std::size_t>(i)] =
            model.state_names[static_cast<std::size_t>(oi)];
        for (Eigen::Index j = 0; j < l; ++j) {
            const Eigen::Index oj = out.to_original[static_cast<std::size_t>(j)];
            reordered.transition(i, j) = model.transition(oi, oj);
            if (model.value) (*reordered.value)(i, j) = (*model.value)(oi, oj);
        }
    }

    // Blocks of the transposed matrix: the transient block of the transpose is
    // the transpose of the transient block.
    out.t1 = reordered.transition.block(1, 0, l - 1, 1).transpose();
    out.t_hat = reordered.transition.block(1, 1, l - 1, l - 1).transpose();
    out.model = std::move(reordered);
    return out;
}

/// One step of the distribution dynamics: returns the transposed transition
/// matrix applied to p. Tiny negative round-off is clamped to zero.
inline StateDistribution step_distribution(const ChainModel& model, const StateDistribution& p) {
    validate_distribution(p.p, model.size());
    Eigen::VectorXd next = model.transition.transpose() * p.p;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
        if (next(i) < 0.0) next(i) = 0.0;
    }
    return StateDistribution{std::move(next)};
}

}  // namespace fpv

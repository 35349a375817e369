#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fpv/chain.hpp"
#include "fpv/errors.hpp"

namespace fpv {

/// Finite Markov Decision Process with a deterministic successor table:
/// next = h(state, randomness, action), plus the distribution of the
/// randomness outcomes and an optional per-transition value table.
struct MdpModel {
    std::vector<std::string> state_names;  ///< halt state included
    std::vector<std::string> action_names;
    std::vector<std::string> randomness_names;
    Eigen::Index halt_index = 0;
    std::vector<Eigen::Index> successor;  ///< flattened [state][randomness][action]
    std::vector<double> gamma_dist;       ///< probability of each randomness outcome
    std::optional<std::vector<double>> values;  ///< same layout as successor

    Eigen::Index state_count() const noexcept {
        return static_cast<Eigen::Index>(state_names.size());
    }
    Eigen::Index action_count() const noexcept {
        return static_cast<Eigen::Index>(action_names.size());
    }
    Eigen::Index randomness_count() const noexcept {
        return static_cast<Eigen::Index>(randomness_names.size());
    }

    std::size_t flat(Eigen::Index s, Eigen::Index g, Eigen::Index a) const noexcept {
        return static_cast<std::size_t>((s * randomness_count() + g) * action_count() + a);
    }
    Eigen::Index next(Eigen::Index s, Eigen::Index g, Eigen::Index a) const {
        return successor[flat(s, g, a)];
    }
};

/// A policy: which action to take for each (non-halt state, randomness) pair.
/// Entries for the halt state are ignored; nothing can be done there.
struct Policy {
    std::vector<int> action;  ///< flattened [state][randomness]; -1 = not covered

    static Policy empty(Eigen::Index states, Eigen::Index randomness) {
        Policy p;
        p.action.assign(static_cast<std::size_t>(states * randomness), -1);
        return p;
    }
    int& at(Eigen::Index s, Eigen::Index g, Eigen::Index randomness_count) {
        return action[static_cast<std::size_t>(s * randomness_count + g)];
    }
    int at(Eigen::Index s, Eigen::Index g, Eigen::Index randomness_count) const {
        return action[static_cast<std::size_t>(s * randomness_count + g)];
    }
};

/// Validates MdpModel invariants and returns the model unchanged.
inline MdpModel validate_mdp(MdpModel mdp) {
    const Eigen::Index s_count = mdp.state_count();
    const Eigen::Index g_count = mdp.randomness_count();
    const Eigen::Index a_count = mdp.action_count();
    if (s_count < 2) throw ShapeError("MDP needs at least two states");
    if (g_count < 1 || a_count < 1) {
        throw ShapeError("MDP needs at least one randomness outcome and one action");
    }
    for (const auto* names : {&mdp.state_names, &mdp.action_names, &mdp.randomness_names}) {
        std::set<std::string> seen;
        for (const auto& name : *names) {
            if (name.empty()) throw ShapeError("empty name in MDP");
            if (!seen.insert(name).second) throw ShapeError("duplicate name '" + name + "' in MDP");
        }
    }
    if (mdp.halt_index < 0 || mdp.halt_index >= s_count) {
        throw ShapeError("halt index out of range");
    }
    const std::size_t table = static_cast<std::size_t>(s_count * g_count * a_count);
    if (mdp.successor.size() != table) {
        throw ShapeError("successor table has " + std::to_string(mdp.successor.size()) +
                         " entries, expected " + std::to_string(table));
    }
    if (mdp.values && mdp.values->size() != table) {
        throw ShapeError("value table does not match the successor table");
    }
    if (static_cast<Eigen::Index>(mdp.gamma_dist.size()) != g_count) {
        throw ShapeError("randomness distribution length does not match outcomes");
    }
    double gamma_sum = 0.0;
    for (double g : mdp.gamma_dist) {
        if (!(g >= 0.0)) throw NegativeEntryError("randomness probability is negative");
        gamma_sum += g;
    }
    if (std::abs(gamma_sum - 1.0) > k_row_tolerance) {
        throw RowSumError("randomness distribution sums to " + std::to_string(gamma_sum), -1);
    }
    for (Eigen::Index s = 0; s < s_count; ++s) {
        for (Eigen::Index g = 0; g < g_count; ++g) {
            for (Eigen::Index a = 0; a < a_count; ++a) {
                const Eigen::Index nxt = mdp.next(s, g, a);
                if (nxt < 0 || nxt >= s_count) {
                    throw ShapeError("successor out of range for state '" +
                                     mdp.state_names[static_cast<std::size_t>(s)] + "'");
                }
                if (s == mdp.halt_index && nxt != mdp.halt_index) {
                    throw HaltNotAbsorbingError("halt state does not map to itself under (" +
                                                mdp.randomness_names[static_cast<std::size_t>(g)] +
                                                ", " +
                                                mdp.action_names[static_cast<std::size_t>(a)] +
                                                ")");
                }
                if (mdp.values && !std::isfinite((*mdp.values)[mdp.flat(s, g, a)])) {
                    throw DomainError("MDP value table has a non-finite entry");
                }
            }
        }
    }
    return mdp;
}

/// The MDP after a policy closes the loop: a deterministic successor per
/// (state, randomness) pair.
struct ClosedLoopTable {
    std::vector<std::string> state_names;
    std::vector<std::string> randomness_names;
    Eigen::Index halt_index = 0;
    std::vector<Eigen::Index> next;  ///< flattened [state][randomness]
    std::vector<double> gamma_dist;  ///< carried over from the MDP
    std::optional<std::vector<double>> values;

    Eigen::Index state_count() const noexcept {
        return static_cast<Eigen::Index>(state_names.size());
    }
    Eigen::Index randomness_count() const noexcept {
        return static_cast<Eigen::Index>(randomness_names.size());
    }
    std::size_t flat(Eigen::Index s, Eigen::Index g) const noexcept {
        return static_cast<std::size_t>(s * randomness_count() + g);
    }
};

/// Applies a policy to the successor table. The policy must name an action
/// for every (non-halt state, randomness) pair; the halt state keeps its
/// self-loop under every outcome.
inline ClosedLoopTable apply_policy(const MdpModel& mdp_in, const Policy& policy) {
    const MdpModel mdp = validate_mdp(mdp_in);
    const Eigen::Index g_count = mdp.randomness_count();
    if (static_cast<Eigen::Index>(policy.action.size()) != mdp.state_count() * g_count) {
        throw ShapeError("policy table does not match the MDP dimensions");
    }

    std::string missing;
    for (Eigen::Index s = 0; s < mdp.state_count(); ++s) {
        if (s == mdp.halt_index) continue;
        for (Eigen::Index g = 0; g < g_count; ++g) {
            const int a = policy.at(s, g, g_count);
            if (a < 0 || a >= mdp.action_count()) {
                if (!missing.empty()) missing += ", ";
                missing += "(" + mdp.state_names[static_cast<std::size_t>(s)] + ", " +
                           mdp.randomness_names[static_cast<std::size_t>(g)] + ")";
            }
        }
    }
    if (!missing.empty()) {
        throw IncompletePolicyError("policy does not cover: " + missing);
    }

    ClosedLoopTable out;
    out.state_names = mdp.state_names;
    out.randomness_names = mdp.randomness_names;
    out.halt_index = mdp.halt_index;
    out.gamma_dist = mdp.gamma_dist;
    out.next.resize(static_cast<std::size_t>(mdp.state_count() * g_count));
    if (mdp.values) out.values.emplace(out.next.size(), 0.0);
    for (Eigen::Index s = 0; s < mdp.state_count(); ++s) {
        for (Eigen::Index g = 0; g < g_count; ++g) {
            const Eigen::Index a =
                (s == mdp.halt_index) ? 0 : static_cast<Eigen::Index>(policy.at(s, g, g_count));
            out.next[out.flat(s, g)] = mdp.next(s, g, a);
            if (mdp.values) (*out.values)[out.flat(s, g)] = (*mdp.values)[mdp.flat(s, g, a)];
        }
    }
    return out;
}

/// Sums the closed-loop transitions over the randomness distribution:
/// T_s(i,j) = sum of gamma probabilities of the outcomes sending i to j.
/// When two outcomes realize the same transition with different values, the
/// value entry is their probability-weighted mean, preserving the expected
/// one-step value.
inline ChainModel marginalize(const ClosedLoopTable& table, const std::vector<double>& gamma_dist) {
    const Eigen::Index l = table.state_count();
    const Eigen::Index g_count = table.randomness_count();
    if (static_cast<Eigen::Index>(gamma_dist.size()) != g_count) {
        throw ShapeError("randomness distribution length does not match the table");
    }

    ChainModel chain;
    chain.state_names = table.state_names;
    chain.halt_index = table.halt_index;
    chain.transition = Eigen::MatrixXd::Zero(l, l);
    Eigen::MatrixXd weighted_value = Eigen::MatrixXd::Zero(l, l);
    for (Eigen::Index s = 0; s < l; ++s) {
        if (s == table.halt_index) {
            chain.transition(s, s) = 1.0;
            continue;
        }
        for (Eigen::Index g = 0; g < g_count; ++g) {
            const Eigen::Index j = table.next[table.flat(s, g)];
            chain.transition(s, j) += gamma_dist[static_cast<std::size_t>(g)];
            if (table.values) {
                weighted_value(s, j) += gamma_dist[static_cast<std::size_t>(g)] *
                                        (*table.values)[table.flat(s, g)];
            }
        }
    }
    if (table.values) {
        Eigen::MatrixXd value = Eigen::MatrixXd::Zero(l, l);
        for (Eigen::Index i = 0; i < l; ++i) {
            for (Eigen::Index j = 0; j < l; ++j) {
                if (chain.transition(i, j) > 0.0) {
                    value(i, j) = weighted_value(i, j) / chain.transition(i, j);
                }
            }
        }
        chain.value = std::move(value);
    }
    return validate_chain(std::move(chain));
}

/// Marginalizes with the distribution carried in the table.
inline ChainModel marginalize(const ClosedLoopTable& table) {
    return marginalize(table, table.gamma_dist);
}

}  // namespace fpv

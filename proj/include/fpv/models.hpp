#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpv/chain.hpp"
#include "fpv/errors.hpp"
#include "fpv/mdp.hpp"

namespace fpv::models {

/// Unfair coin toss, counting flips until two heads in a row. Three states:
/// heads-heads (halt), tails last, tails-then-heads.
inline ChainModel coin_toss(double p_heads) {
    if (!(p_heads > 0.0 && p_heads < 1.0)) {
        throw DomainError("p_heads must lie in (0,1), got " + std::to_string(p_heads));
    }
    ChainModel chain;
    chain.state_names = {"HH", "T", "TH"};
    chain.halt_index = 0;
    chain.transition.resize(3, 3);
    chain.transition << 1.0, 0.0, 0.0,                      //
        0.0, 1.0 - p_heads, p_heads,                        //
        p_heads, 1.0 - p_heads, 0.0;
    return validate_chain(std::move(chain));
}

/// Two-node susceptible-infected-susceptible model, counting steps until both
/// nodes are healthy. delta = per-step recovery probability, beta = per-step
/// infection probability from an infected neighbour. States: SS (halt), SI,
/// IS, II (first letter = node 1).
inline ChainModel sis_two_node(double delta, double beta) {
    if (!(delta > 0.0 && delta <= 1.0) || !(beta > 0.0 && beta <= 1.0)) {
        throw DomainError("delta and beta must lie in (0,1]");
    }
    ChainModel chain;
    chain.state_names = {"SS", "SI", "IS", "II"};
    chain.halt_index = 0;
    chain.transition.resize(4, 4);
    const double d = delta, b = beta;
    chain.transition << 1.0, 0.0, 0.0, 0.0,                                   //
        (1 - b) * d, (1 - d) * (1 - b), b * d, b * (1 - d),                   //
        (1 - b) * d, b * d, (1 - d) * (1 - b), b * (1 - d),                   //
        d * d, d * (1 - d), d * (1 - d), (1 - d) * (1 - d);
    return validate_chain(std::move(chain));
}

/// One road of the Europe tour map: an undirected edge with its travel time
/// and distance.
struct EuropeEdge {
    std::string a;
    std::string b;
    double hours;
    double km;
};

/// City-proper population estimates (circa 2013), ordered by size. The London
/// row of the walk (stay 0.5922, Berlin 0.2507, Paris 0.1571) pins the
/// London:Berlin:Paris ratio; the remaining figures are calibrated so the
/// documented tour statistics come out right.
inline const std::map<std::string, double>& europe_default_populations() {
    static const std::map<std::string, double> populations = {
        {"Istanbul", 13'866'000.0}, {"London", 8'255'000.0}, {"Athens", 3'676'000.0},
        {"Berlin", 3'495'000.0},    {"Madrid", 3'085'000.0}, {"Kiev", 2'954'000.0},
        {"Rome", 2'920'000.0},      {"Paris", 2'190'000.0},
    };
    return populations;
}

/// The ten roads of the tour with travel times (hours) and distances (km).
inline const std::vector<EuropeEdge>& europe_default_edges() {
    static const std::vector<EuropeEdge> edges = {
        {"London", "Paris", 5.0 + 6.0 / 60.0, 454.0},
        {"London", "Berlin", 10.0 + 25.0 / 60.0, 1098.0},
        {"Madrid", "Paris", 11.0 + 10.0 / 60.0, 1270.0},
        {"Rome", "Paris", 12.0 + 46.0 / 60.0, 1419.0},
        {"Berlin", "Paris", 9.0 + 18.0 / 60.0, 1055.0},
        {"Berlin", "Kiev", 14.0 + 41.0 / 60.0, 1329.0},
        {"Berlin", "Istanbul", 21.0 + 39.0 / 60.0, 2210.0},
        {"Kiev", "Istanbul", 19.0, 1459.0},
        {"Rome", "Istanbul", 22.0 + 46.0 / 60.0, 2262.0},
        {"Athens", "Istanbul", 11.0 + 13.0 / 60.0, 1095.0},
    };
    return edges;
}

/// Configuration of the Europe tour generator. Each day the traveller stays
/// or moves to a neighbouring city with probability proportional to the
/// population of the destination; Istanbul is the halt state.
struct EuropeConfig {
    std::map<std::string, double> populations = europe_default_populations();
    std::vector<EuropeEdge> edges = europe_default_edges();
    /// Value assigned to staying a day in a city in the travel-time matrix.
    double stay_days = 0.0;
    /// Replacement population for Paris (the modified tour uses 1e9).
    std::optional<double> paris_population;
};

namespace detail {

/// States ordered by population rank, Istanbul (the halt) first.
inline const std::array<const char*, 8>& europe_city_order() {
    static const std::array<const char*, 8> order = {
        "Istanbul", "London", "Athens", "Berlin", "Madrid", "Kiev", "Rome", "Paris"};
    return order;
}

inline void validate_europe_config(const EuropeConfig& config) {
    for (const char* city : europe_city_order()) {
        auto it = config.populations.find(city);
        if (it == config.populations.end()) {
            throw DomainError(std::string("missing population for ") + city);
        }
        if (!(it->second > 0.0) || !std::isfinite(it->second)) {
            throw DomainError(std::string("population of ") + city + " must be positive");
        }
    }
    if (config.populations.size() != europe_city_order().size()) {
        throw DomainError("Europe tour expects exactly the eight mapped cities");
    }
    auto key = [](const EuropeEdge& e) {
        return e.a < e.b ? std::make_pair(e.a, e.b) : std::make_pair(e.b, e.a);
    };
    std::map<std::pair<std::string, std::string>, const EuropeEdge*> seen;
    for (const auto& e : config.edges) {
        if (!(e.hours > 0.0) || !(e.km > 0.0)) {
            throw DomainError("edge " + e.a + "-" + e.b + " needs positive time and distance");
        }
        if (!seen.emplace(key(e), &e).second) {
            throw DomainError("duplicate edge " + e.a + "-" + e.b);
        }
    }
    for (const auto& canonical : europe_default_edges()) {
        if (seen.find(key(canonical)) == seen.end()) {
            throw DomainError("road map must contain the edge " + canonical.a + "-" +
                              canonical.b);
        }
    }
    if (seen.size() != europe_default_edges().size()) {
        throw DomainError("road map must contain exactly the ten mapped roads");
    }
    if (!(config.stay_days >= 0.0) || !std::isfinite(config.stay_days)) {
        throw DomainError("stay_days must be non-negative");
    }
    if (config.paris_population && !(*config.paris_population > 0.0)) {
        throw DomainError("Paris override must be positive");
    }
}

inline std::map<std::string, double> effective_populations(const EuropeConfig& config) {
    std::map<std::string, double> pops = config.populations;
    if (config.paris_population) pops["Paris"] = *config.paris_population;
    return pops;
}

inline Eigen::Index europe_index(const std::string& city) {
    const auto& order = europe_city_order();
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (city == order[i]) return static_cast<Eigen::Index>(i);
    }
    throw DomainError("unknown city '" + city + "'");
}

}  // namespace detail

/// The eight-city tour chain, Istanbul absorbing. The value matrix is not
/// attached here; see europe_distance_matrix / europe_time_matrix.
inline ChainModel europe_tour(const EuropeConfig& config = {}) {
    detail::validate_europe_config(config);
    const auto pops = detail::effective_populations(config);
    const auto& order = detail::europe_city_order();
    const Eigen::Index l = static_cast<Eigen::Index>(order.size());

    ChainModel chain;
    chain.state_names.assign(order.begin(), order.end());
    chain.halt_index = 0;
    chain.transition = Eigen::MatrixXd::Zero(l, l);
    chain.transition(0, 0) = 1.0;
    for (Eigen::Index i = 1; i < l; ++i) {
        const std::string& city = chain.state_names[static_cast<std::size_t>(i)];
        std::vector<Eigen::Index> support = {i};
        for (const auto& e : config.edges) {
            if (e.a == city) support.push_back(detail::europe_index(e.b));
            if (e.b == city) support.push_back(detail::europe_index(e.a));
        }
        double total = 0.0;
        for (Eigen::Index j : support) {
            total += pops.at(chain.state_names[static_cast<std::size_t>(j)]);
        }
        for (Eigen::Index j : support) {
            chain.transition(i, j) = pops.at(chain.state_names[static_cast<std::size_t>(j)]) / total;
        }
    }
    return validate_chain(std::move(chain));
}

/// Per-transition distances in km (diagonal zero: staying covers no distance).
inline Eigen::MatrixXd europe_distance_matrix(const EuropeConfig& config = {}) {
    detail::validate_europe_config(config);
    const Eigen::Index l = static_cast<Eigen::Index>(detail::europe_city_order().size());
    Eigen::MatrixXd value = Eigen::MatrixXd::Zero(l, l);
    for (const auto& e : config.edges) {
        const Eigen::Index i = detail::europe_index(e.a);
        const Eigen::Index j = detail::europe_index(e.b);
        value(i, j) = value(j, i) = e.km;
    }
    return value;
}

/// Per-transition travel times in days (hours / 24); the diagonal carries the
/// configured value of a day spent staying.
inline Eigen::MatrixXd europe_time_matrix(const EuropeConfig& config = {}) {
    detail::validate_europe_config(config);
    const Eigen::Index l = static_cast<Eigen::Index>(detail::europe_city_order().size());
    Eigen::MatrixXd value = Eigen::MatrixXd::Zero(l, l);
    for (const auto& e : config.edges) {
        const Eigen::Index i = detail::europe_index(e.a);
        const Eigen::Index j = detail::europe_index(e.b);
        value(i, j) = value(j, i) = e.hours / 24.0;
    }
    for (Eigen::Index i = 0; i < l; ++i) value(i, i) = config.stay_days;
    return value;
}

/// The tour with the population of Paris hypothetically set to one billion,
/// which turns the walk metastable around Paris.
inline ChainModel europe_tour_modified(EuropeConfig config = {}) {
    config.paris_population = 1e9;
    return europe_tour(config);
}

/// Attaches a value matrix plus reporting labels to a chain.
inline ChainModel with_value_matrix(ChainModel chain, Eigen::MatrixXd value, std::string name,
                                    std::string unit) {
    chain.value = std::move(value);
    chain.value_name = std::move(name);
    chain.value_unit = std::move(unit);
    return validate_chain(std::move(chain));
}

/// The three-state, two-action, two-randomness MDP example together with the
/// policy that closes it into the unfair-coin chain once the randomness is
/// marginalized with P(g2) = p_gamma2.
inline std::pair<MdpModel, Policy> figure5_mdp(double p_gamma2 = 0.01) {
    if (!(p_gamma2 >= 0.0 && p_gamma2 <= 1.0)) {
        throw DomainError("P(g2) must lie in [0,1]");
    }
    MdpModel mdp;
    mdp.state_names = {"x1", "x2", "x3"};
    mdp.action_names = {"z1", "z2"};
    mdp.randomness_names = {"g1", "g2"};
    mdp.halt_index = 0;
    mdp.gamma_dist = {1.0 - p_gamma2, p_gamma2};
    mdp.successor.assign(3 * 2 * 2, 0);
    auto set = [&mdp](Eigen::Index s, Eigen::Index g, Eigen::Index a, Eigen::Index nxt) {
        mdp.successor[mdp.flat(s, g, a)] = nxt;
    };
    // Halt state loops to itself under every combination.
    set(0, 0, 0, 0), set(0, 0, 1, 0), set(0, 1, 0, 0), set(0, 1, 1, 0);
    // Action z1.
    set(1, 0, 0, 0);  // x2, g1: escape
    set(1, 1, 0, 2);  // x2, g2: to x3
    set(2, 0, 0, 1);  // x3, g1: to x2
    set(2, 1, 0, 0);  // x3, g2: escape
    // Action z2.
    set(1, 0, 1, 1);  // x2, g1: stay
    set(1, 1, 1, 0);  // x2, g2: escape
    set(2, 0, 1, 0);  // x3, g1: escape
    set(2, 1, 1, 0);  // x3, g2: escape
    mdp = validate_mdp(std::move(mdp));

    Policy policy = Policy::empty(3, 2);
    policy.at(1, 0, 2) = 1;  // x2, g1 -> z2
    policy.at(1, 1, 2) = 0;  // x2, g2 -> z1
    policy.at(2, 0, 2) = 0;  // x3, g1 -> z1
    policy.at(2, 1, 2) = 1;  // x3, g2 -> z2
    return {std::move(mdp), std::move(policy)};
}

}  // namespace fpv::models

#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fpv/chain.hpp"
#include "fpv/confidence.hpp"
#include "fpv/errors.hpp"
#include "fpv/mdp.hpp"
#include "fpv/passage.hpp"
#include "fpv/sim.hpp"
#include "fpv/spectral.hpp"

namespace fpv::io {

using nlohmann::json;

namespace detail {

inline json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

inline const json& require(const json& j, const char* key, const std::string& what) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(what + ": missing required key '" + key + "'");
    return *it;
}

inline std::vector<std::string> parse_names(const json& j, const char* key,
                                            const std::string& what) {
    const json& arr = require(j, key, what);
    if (!arr.is_array() || arr.empty()) throw ParseError(what + ": '" + key + "' must be a non-empty array");
    std::vector<std::string> names;
    for (const auto& item : arr) {
        if (!item.is_string()) throw ParseError(what + ": '" + key + "' entries must be strings");
        names.push_back(item.get<std::string>());
    }
    return names;
}

inline Eigen::Index index_of(const std::vector<std::string>& names, const std::string& name,
                             const std::string& what) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw ParseError(what + ": unknown name '" + name + "'");
}

inline double parse_number(const json& j, const char* key, const std::string& what) {
    const json& v = require(j, key, what);
    if (!v.is_number()) throw ParseError(what + ": '" + key + "' must be a number");
    return v.get<double>();
}

inline std::string parse_string(const json& j, const char* key, const std::string& what) {
    const json& v = require(j, key, what);
    if (!v.is_string()) throw ParseError(what + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Parses a model file: named states, sparse transition entries, optional
/// sparse values. Unspecified (from, to) pairs mean probability/value zero;
/// duplicated pairs are rejected. The result is fully validated.
inline ChainModel parse_model_json(const json& j) {
    const std::string what = "model file";
    ChainModel chain;
    chain.state_names = detail::parse_names(j, "states", what);
    const Eigen::Index l = static_cast<Eigen::Index>(chain.state_names.size());
    chain.halt_index = detail::index_of(chain.state_names,
                                        detail::parse_string(j, "halt", what), what);
    chain.transition = Eigen::MatrixXd::Zero(l, l);

    const json& transitions = detail::require(j, "transitions", what);
    if (!transitions.is_array()) throw ParseError(what + ": 'transitions' must be an array");
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(l, l);
    for (const auto& t : transitions) {
        const Eigen::Index from = detail::index_of(chain.state_names,
                                                   detail::parse_string(t, "from", what), what);
        const Eigen::Index to = detail::index_of(chain.state_names,
                                                 detail::parse_string(t, "to", what), what);
        if (seen(from, to)++) {
            throw ParseError(what + ": duplicate transition " + chain.state_names[from] + " -> " +
                             chain.state_names[to]);
        }
        chain.transition(from, to) = detail::parse_number(t, "p", what);
    }

    if (j.contains("values")) {
        Eigen::MatrixXd value = Eigen::MatrixXd::Zero(l, l);
        Eigen::MatrixXi seen_value = Eigen::MatrixXi::Zero(l, l);
        for (const auto& t : j.at("values")) {
            const Eigen::Index from = detail::index_of(
                chain.state_names, detail::parse_string(t, "from", what), what);
            const Eigen::Index to = detail::index_of(chain.state_names,
                                                     detail::parse_string(t, "to", what), what);
            if (seen_value(from, to)++) {
                throw ParseError(what + ": duplicate value entry " + chain.state_names[from] +
                                 " -> " + chain.state_names[to]);
            }
            value(from, to) = detail::parse_number(t, "v", what);
        }
        chain.value = std::move(value);
    }
    if (j.contains("metadata")) {
        const json& meta = j.at("metadata");
        if (meta.contains("value")) chain.value_name = meta.at("value").get<std::string>();
        if (meta.contains("unit")) chain.value_unit = meta.at("unit").get<std::string>();
    }
    return validate_chain(std::move(chain));
}

/// Serializes a chain as a sparse model document. Zero probabilities and zero
/// values are omitted; extra metadata keys are carried through as given.
inline json write_model_json(const ChainModel& chain, json metadata = json::object()) {
    json j;
    j["states"] = chain.state_names;
    j["halt"] = chain.state_names[static_cast<std::size_t>(chain.halt_index)];
    json transitions = json::array();
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
        for (Eigen::Index k = 0; k < chain.size(); ++k) {
            if (chain.transition(i, k) > 0.0) {
                transitions.push_back({{"from", chain.state_names[static_cast<std::size_t>(i)]},
                                       {"to", chain.state_names[static_cast<std::size_t>(k)]},
                                       {"p", chain.transition(i, k)}});
            }
        }
    }
    j["transitions"] = std::move(transitions);
    if (chain.value) {
        json values = json::array();
        for (Eigen::Index i = 0; i < chain.size(); ++i) {
            for (Eigen::Index k = 0; k < chain.size(); ++k) {
                if ((*chain.value)(i, k) != 0.0) {
                    values.push_back({{"from", chain.state_names[static_cast<std::size_t>(i)]},
                                      {"to", chain.state_names[static_cast<std::size_t>(k)]},
                                      {"v", (*chain.value)(i, k)}});
                }
            }
        }
        j["values"] = std::move(values);
    }
    if (!chain.value_name.empty()) metadata["value"] = chain.value_name;
    if (!chain.value_unit.empty()) metadata["unit"] = chain.value_unit;
    if (!metadata.empty()) j["metadata"] = std::move(metadata);
    return j;
}

/// Parses an MDP file: state/action/randomness names, the complete successor
/// table and the randomness distribution.
inline MdpModel parse_mdp_json(const json& j) {
    const std::string what = "mdp file";
    MdpModel mdp;
    mdp.state_names = detail::parse_names(j, "states", what);
    mdp.action_names = detail::parse_names(j, "actions", what);
    mdp.halt_index = detail::index_of(mdp.state_names, detail::parse_string(j, "halt", what), what);

    const json& randomness = detail::require(j, "randomness", what);
    if (!randomness.is_array() || randomness.empty()) {
        throw ParseError(what + ": 'randomness' must be a non-empty array");
    }
    for (const auto& g : randomness) {
        mdp.randomness_names.push_back(detail::parse_string(g, "name", what));
        mdp.gamma_dist.push_back(detail::parse_number(g, "p", what));
    }

    const std::size_t table =
        static_cast<std::size_t>(mdp.state_count() * mdp.randomness_count() * mdp.action_count());
    mdp.successor.assign(table, -1);
    for (const auto& s : detail::require(j, "successors", what)) {
        const Eigen::Index state = detail::index_of(mdp.state_names,
                                                    detail::parse_string(s, "state", what), what);
        const Eigen::Index gamma = detail::index_of(
            mdp.randomness_names, detail::parse_string(s, "gamma", what), what);
        const Eigen::Index action = detail::index_of(mdp.action_names,
                                                     detail::parse_string(s, "action", what), what);
        const Eigen::Index next = detail::index_of(mdp.state_names,
                                                   detail::parse_string(s, "next", what), what);
        auto& slot = mdp.successor[mdp.flat(state, gamma, action)];
        if (slot != -1) throw ParseError(what + ": duplicate successor entry");
        slot = next;
    }
    const auto missing = static_cast<std::size_t>(
        std::count(mdp.successor.begin(), mdp.successor.end(), static_cast<Eigen::Index>(-1)));
    if (missing > 0) {
        throw ParseError(what + ": successor table is incomplete (" + std::to_string(missing) +
                         " of " + std::to_string(table) + " entries missing)");
    }
    if (j.contains("values")) {
        std::vector<double> values(table, 0.0);
        for (const auto& s : j.at("values")) {
            const Eigen::Index state = detail::index_of(
                mdp.state_names, detail::parse_string(s, "state", what), what);
            const Eigen::Index gamma = detail::index_of(
                mdp.randomness_names, detail::parse_string(s, "gamma", what), what);
            const Eigen::Index action = detail::index_of(
                mdp.action_names, detail::parse_string(s, "action", what), what);
            values[mdp.flat(state, gamma, action)] = detail::parse_number(s, "v", what);
        }
        mdp.values = std::move(values);
    }
    return validate_mdp(std::move(mdp));
}

inline json write_mdp_json(const MdpModel& mdp) {
    json j;
    j["states"] = mdp.state_names;
    j["halt"] = mdp.state_names[static_cast<std::size_t>(mdp.halt_index)];
    j["actions"] = mdp.action_names;
    json randomness = json::array();
    for (Eigen::Index g = 0; g < mdp.randomness_count(); ++g) {
        randomness.push_back({{"name", mdp.randomness_names[static_cast<std::size_t>(g)]},
                              {"p", mdp.gamma_dist[static_cast<std::size_t>(g)]}});
    }
    j["randomness"] = std::move(randomness);
    json successors = json::array();
    for (Eigen::Index s = 0; s < mdp.state_count(); ++s) {
        for (Eigen::Index g = 0; g < mdp.randomness_count(); ++g) {
            for (Eigen::Index a = 0; a < mdp.action_count(); ++a) {
                successors.push_back(
                    {{"state", mdp.state_names[static_cast<std::size_t>(s)]},
                     {"gamma", mdp.randomness_names[static_cast<std::size_t>(g)]},
                     {"action", mdp.action_names[static_cast<std::size_t>(a)]},
                     {"next", mdp.state_names[static_cast<std::size_t>(mdp.next(s, g, a))]}});
            }
        }
    }
    j["successors"] = std::move(successors);
    if (mdp.values) {
        json values = json::array();
        for (Eigen::Index s = 0; s < mdp.state_count(); ++s) {
            for (Eigen::Index g = 0; g < mdp.randomness_count(); ++g) {
                for (Eigen::Index a = 0; a < mdp.action_count(); ++a) {
                    const double v = (*mdp.values)[mdp.flat(s, g, a)];
                    if (v != 0.0) {
                        values.push_back(
                            {{"state", mdp.state_names[static_cast<std::size_t>(s)]},
                             {"gamma", mdp.randomness_names[static_cast<std::size_t>(g)]},
                             {"action", mdp.action_names[static_cast<std::size_t>(a)]},
                             {"v", v}});
                    }
                }
            }
        }
        j["values"] = std::move(values);
    }
    return j;
}

/// Parses a policy file against its MDP (names are resolved through the MDP).
inline Policy parse_policy_json(const json& j, const MdpModel& mdp) {
    const std::string what = "policy file";
    Policy policy = Policy::empty(mdp.state_count(), mdp.randomness_count());
    for (const auto& entry : detail::require(j, "policy", what)) {
        const Eigen::Index state = detail::index_of(mdp.state_names,
                                                    detail::parse_string(entry, "state", what), what);
        const Eigen::Index gamma = detail::index_of(
            mdp.randomness_names, detail::parse_string(entry, "gamma", what), what);
        const Eigen::Index action = detail::index_of(
            mdp.action_names, detail::parse_string(entry, "action", what), what);
        auto& slot = policy.at(state, gamma, mdp.randomness_count());
        if (slot != -1) throw ParseError(what + ": duplicate policy entry");
        slot = static_cast<int>(action);
    }
    return policy;
}

inline json write_policy_json(const MdpModel& mdp, const Policy& policy) {
    json entries = json::array();
    for (Eigen::Index s = 0; s < mdp.state_count(); ++s) {
        if (s == mdp.halt_index) continue;
        for (Eigen::Index g = 0; g < mdp.randomness_count(); ++g) {
            const int a = policy.at(s, g, mdp.randomness_count());
            if (a >= 0) {
                entries.push_back({{"state", mdp.state_names[static_cast<std::size_t>(s)]},
                                   {"gamma", mdp.randomness_names[static_cast<std::size_t>(g)]},
                                   {"action", mdp.action_names[static_cast<std::size_t>(a)]}});
            }
        }
    }
    return json{{"policy", std::move(entries)}};
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return detail::parse_json_text(buffer.str(), path);
}

// ---------------------------------------------------------------------------
// Analysis / simulation reports.
//
// Reports are written by hand so JSON numbers carry 17 significant digits
// (full double precision); the text format uses 6 significant digits. The
// key layout depends only on the requested flags, never on model contents.
// ---------------------------------------------------------------------------

struct AnalysisReport {
    std::vector<std::string> state_names;  ///< input order
    std::string halt_name;
    SpectralSummary spectral;
    Eigen::VectorXd phi;  ///< input order
    double mfpt = std::numeric_limits<double>::infinity();
    std::optional<double> fpt_std;
    Eigen::VectorXd m;  ///< input order; empty when lambda2 = 1
    std::optional<PassageSummary> mfpv;
    Eigen::VectorXd mv;  ///< input order; only with mfpv
    std::vector<FpvBounds> bounds;
    bool bounds_requested = false;
};

/// Runs the full pipeline on a validated model. Confidence bounds and the
/// value-matrix summary are skipped when escape is impossible.
inline AnalysisReport analyze_model(const ChainModel& model,
                                    const std::vector<double>& confidence_levels,
                                    bool with_value, const SpectralOptions& options = {}) {
    AnalysisReport report;
    report.state_names = model.state_names;
    report.halt_name = model.state_names[static_cast<std::size_t>(model.halt_index)];
    report.bounds_requested = !confidence_levels.empty();

    const CanonicalChain chain = canonicalize(model);
    report.spectral = analyze_spectrum(chain, options);
    report.phi = chain.to_original_order(report.spectral.phi.p);
    report.mfpt = mfpt_scalar(report.spectral);
    if (report.spectral.lambda2_is_one()) return report;

    report.fpt_std = fpt_std(report.spectral);
    report.m = chain.to_original_order(mfpt_vector(chain));
    if (with_value) {
        if (!model.value) throw MissingValueMatrixError("model file carries no value matrix");
        report.mfpv = analyze_passage_value(chain, report.spectral);
        report.mv = chain.to_original_order(report.mfpv->per_state);
    }
    for (double pr : confidence_levels) {
        FpvBounds b = report.mfpv
                          ? make_fpv_bounds(report.spectral.lambda2, pr, report.mfpv->mean,
                                            report.mfpt)
                          : fpt_bounds(report.spectral.lambda2, pr);
        report.bounds.push_back(b);
    }
    return report;
}

namespace detail {

inline std::string json_number(double v) {
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
        } else {
            out += c;
        }
    }
    return out + "\"";
}

inline std::string json_vector_map(const std::vector<std::string>& names,
                                   const Eigen::VectorXd& values) {
    if (values.size() == 0) return "null";
    std::string out = "{";
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += json_escape(names[static_cast<std::size_t>(i)]) + ": " + json_number(values(i));
    }
    return out + "}";
}

inline std::string text_number(double v) {
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

inline std::string to_json(const AnalysisReport& r) {
    std::string out = "{\n";
    out += "  \"model\": {\"states\": [";
    for (std::size_t i = 0; i < r.state_names.size(); ++i) {
        if (i) out += ", ";
        out += detail::json_escape(r.state_names[i]);
    }
    out += "], \"halt\": " + detail::json_escape(r.halt_name) + "},\n";
    out += "  \"spectral\": {";
    out += "\"lambda2\": " + detail::json_number(r.spectral.lambda2);
    out += ", \"lambda3_modulus\": " + detail::json_number(r.spectral.lambda3_modulus);
    out += ", \"escape_prob\": " + detail::json_number(r.spectral.escape_prob);
    out += ", \"memory_constant\": " + detail::json_number(r.spectral.memory_constant);
    out += std::string(", \"eigen_method\": \"") + to_string(r.spectral.eigen_method) + "\"";
    out += ", \"phi\": " + detail::json_vector_map(r.state_names, r.phi);
    out += "},\n";
    out += "  \"passage\": {";
    out += "\"M\": " + detail::json_number(r.mfpt);
    out += ", \"fpt_std\": " + detail::json_number(r.fpt_std.value_or(
                                   std::numeric_limits<double>::quiet_NaN()));
    out += ", \"m\": " + detail::json_vector_map(r.state_names, r.m);
    out += "}";
    if (r.mfpv) {
        out += ",\n  \"mfpv\": {";
        out += "\"name\": " + detail::json_escape(r.mfpv->kind.name);
        out += ", \"unit\": " + detail::json_escape(r.mfpv->kind.unit);
        out += ", \"M\": " + detail::json_number(r.mfpv->mean);
        out += ", \"m\": " + detail::json_vector_map(r.state_names, r.mv);
        out += "}";
    }
    if (r.bounds_requested) {
        out += ",\n  \"bounds\": [";
        for (std::size_t i = 0; i < r.bounds.size(); ++i) {
            const FpvBounds& b = r.bounds[i];
            if (i) out += ", ";
            out += "{\"pr\": " + detail::json_number(b.pr);
            out += ", \"lfpt\": " + detail::json_number(b.lfpt);
            out += ", \"ufpt\": " + detail::json_number(b.ufpt);
            out += std::string(", \"valid_ordering\": ") + (b.valid_ordering ? "true" : "false");
            if (r.mfpv) {
                out += ", \"lfpv\": " + detail::json_number(b.lfpv);
                out += ", \"ufpv\": " + detail::json_number(b.ufpv);
            }
            out += "}";
        }
        out += "]";
    }
    out += "\n}\n";
    return out;
}

inline std::string to_text(const AnalysisReport& r) {
    std::ostringstream out;
    out << "states: " << r.state_names.size() << " (halt: " << r.halt_name << ")\n";
    out << "lambda2:          " << detail::text_number(r.spectral.lambda2) << "\n";
    out << "lambda3_modulus:  " << detail::text_number(r.spectral.lambda3_modulus) << "\n";
    out << "escape_prob:      " << detail::text_number(r.spectral.escape_prob) << "\n";
    out << "memory_constant:  " << detail::text_number(r.spectral.memory_constant) << "\n";
    out << "eigen_method:     " << to_string(r.spectral.eigen_method) << "\n";
    out << "MFPT M:           " << detail::text_number(r.mfpt) << "\n";
    out << "fpt_std:          "
        << detail::text_number(r.fpt_std.value_or(std::numeric_limits<double>::quiet_NaN()))
        << "\n";
    if (r.mfpv) {
        out << "MFPV (" << r.mfpv->kind.name << ", " << r.mfpv->kind.unit
            << "): " << detail::text_number(r.mfpv->mean) << "\n";
    }
    out << "per-state (phi | m";
    if (r.mfpv) out << " | mfpv";
    out << "):\n";
    for (std::size_t i = 0; i < r.state_names.size(); ++i) {
        out << "  " << r.state_names[i] << ": "
            << detail::text_number(r.phi(static_cast<Eigen::Index>(i)));
        out << " | "
            << (r.m.size() ? detail::text_number(r.m(static_cast<Eigen::Index>(i))) : "n/a");
        if (r.mfpv) out << " | " << detail::text_number(r.mv(static_cast<Eigen::Index>(i)));
        out << "\n";
    }
    for (const FpvBounds& b : r.bounds) {
        out << "bounds pr=" << detail::text_number(b.pr) << ": FPT in ["
            << detail::text_number(b.lfpt) << ", " << detail::text_number(b.ufpt) << "]";
        if (r.mfpv) {
            out << ", FPV in [" << detail::text_number(b.lfpv) << ", "
                << detail::text_number(b.ufpv) << "]";
        }
        if (!b.valid_ordering) out << " (ordering invalid at this confidence)";
        out << "\n";
    }
    return out.str();
}

inline std::string to_json(const SimReport& r, const std::vector<std::string>& state_names) {
    std::string out = "{\n";
    out += "  \"trials\": " + std::to_string(r.trials);
    out += ", \"seed\": " + std::to_string(r.seed);
    out += ", \"max_steps\": " + std::to_string(r.max_steps);
    out += ", \"censored\": " + std::to_string(r.censored);
    out += ",\n  \"mean_fpt\": " + detail::json_number(r.mean_fpt);
    out += ", \"std_fpt\": " + detail::json_number(r.std_fpt);
    out += ", \"mean_fpv\": " +
           detail::json_number(r.mean_fpv.value_or(std::numeric_limits<double>::quiet_NaN()));
    out += ", \"std_fpv\": " +
           detail::json_number(r.std_fpv.value_or(std::numeric_limits<double>::quiet_NaN()));
    out += ",\n  \"fpt_quantiles\": {";
    bool first = true;
    for (const auto& [pr, steps] : r.fpt_quantiles) {
        if (!first) out += ", ";
        first = false;
        char key[32];
        std::snprintf(key, sizeof key, "\"%g\"", pr);
        out += std::string(key) + ": " + detail::json_number(steps);
    }
    out += "},\n  \"start\": " + detail::json_vector_map(state_names, r.start.p);
    out += "\n}\n";
    return out;
}

inline std::string to_text(const SimReport& r) {
    std::ostringstream out;
    out << "trials:   " << r.trials << " (seed " << r.seed << ", censored " << r.censored
        << " at cap " << r.max_steps << ")\n";
    out << "mean_fpt: " << detail::text_number(r.mean_fpt) << "\n";
    out << "std_fpt:  " << detail::text_number(r.std_fpt) << "\n";
    if (r.mean_fpv) {
        out << "mean_fpv: " << detail::text_number(*r.mean_fpv) << "\n";
        out << "std_fpv:  " << detail::text_number(*r.std_fpv) << "\n";
    }
    for (const auto& [pr, steps] : r.fpt_quantiles) {
        out << "quantile " << detail::text_number(pr) << ": " << detail::text_number(steps)
            << "\n";
    }
    return out.str();
}

}  // namespace fpv::io

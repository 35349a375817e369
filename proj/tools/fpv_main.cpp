// Command-line front end: model analysis, example generation, MDP reduction
// and Monte Carlo simulation. Data goes to stdout, diagnostics to stderr.
//
// Exit codes: 0 success; 1 invalid input; 2 analysis with lambda2 = 1
// (partial report, no passage vector or bounds); 3 simulation censoring
// above one percent.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "fpv/fpv.hpp"

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitNoEscape = 2;
constexpr int kExitCensored = 3;

struct AnalyzeArgs {
    std::string model_path;
    std::vector<double> confidence;
    std::string value = "steps";
    std::string format = "json";
};

int run_analyze(const AnalyzeArgs& args) {
    const fpv::ChainModel model = fpv::io::parse_model_json(fpv::io::read_json_file(args.model_path));
    const bool with_value = args.value != "steps";
    if (with_value && !model.value_name.empty() && model.value_name != args.value) {
        throw fpv::DomainError("model file carries value matrix '" + model.value_name +
                               "', not '" + args.value + "'");
    }
    if (with_value && !model.value) {
        throw fpv::MissingValueMatrixError("model file carries no value matrix");
    }
    const fpv::io::AnalysisReport report = fpv::io::analyze_model(model, args.confidence, with_value);
    std::cout << (args.format == "text" ? fpv::io::to_text(report) : fpv::io::to_json(report));
    if (report.spectral.lambda2_is_one()) {
        std::cerr << "lambda2 = 1: escape is impossible, mean passage infinite; "
                     "report is partial\n";
        return kExitNoEscape;
    }
    return 0;
}

struct ExampleArgs {
    std::string name;
    double p_heads = 0.01;
    double delta = 0.01;
    double beta = 0.8;
    double gamma2 = 0.01;
    double stay_days = 0.0;
    std::string value = "none";
    std::string part = "mdp";
    std::vector<std::string> populations;
    double paris_population = 0.0;  // 0 = no override
};

fpv::models::EuropeConfig europe_config_from(const ExampleArgs& args) {
    fpv::models::EuropeConfig config;
    config.stay_days = args.stay_days;
    for (const std::string& spec : args.populations) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw fpv::DomainError("--population expects City=Number, got '" + spec + "'");
        }
        const std::string city = spec.substr(0, eq);
        if (config.populations.find(city) == config.populations.end()) {
            throw fpv::DomainError("unknown city '" + city + "'");
        }
        try {
            config.populations[city] = std::stod(spec.substr(eq + 1));
        } catch (const std::exception&) {
            throw fpv::DomainError("bad population number in '" + spec + "'");
        }
    }
    if (args.paris_population > 0.0) config.paris_population = args.paris_population;
    return config;
}

fpv::ChainModel attach_europe_value(fpv::ChainModel chain, const fpv::models::EuropeConfig& config,
                                    const std::string& value) {
    if (value == "none") return chain;
    if (value == "distance") {
        return fpv::models::with_value_matrix(std::move(chain),
                                              fpv::models::europe_distance_matrix(config),
                                              "distance", "km");
    }
    if (value == "time") {
        return fpv::models::with_value_matrix(std::move(chain),
                                              fpv::models::europe_time_matrix(config), "time",
                                              "days");
    }
    throw fpv::DomainError("unknown value matrix '" + value + "' (none|distance|time)");
}

int run_example(const ExampleArgs& args) {
    nlohmann::json out;
    if (args.name == "coin") {
        out = fpv::io::write_model_json(fpv::models::coin_toss(args.p_heads));
    } else if (args.name == "epidemics") {
        out = fpv::io::write_model_json(fpv::models::sis_two_node(args.delta, args.beta));
    } else if (args.name == "europe" || args.name == "europe-mod") {
        fpv::models::EuropeConfig config = europe_config_from(args);
        fpv::ChainModel chain = args.name == "europe" ? fpv::models::europe_tour(config)
                                                      : fpv::models::europe_tour_modified(config);
        out = fpv::io::write_model_json(attach_europe_value(std::move(chain), config, args.value));
    } else if (args.name == "mdp-fig5") {
        const auto [mdp, policy] = fpv::models::figure5_mdp(args.gamma2);
        if (args.part == "mdp") {
            out = fpv::io::write_mdp_json(mdp);
        } else if (args.part == "policy") {
            out = fpv::io::write_policy_json(mdp, policy);
        } else {
            throw fpv::DomainError("--part must be mdp or policy");
        }
    } else {
        throw fpv::DomainError("unknown example '" + args.name +
                               "' (coin|epidemics|europe|europe-mod|mdp-fig5)");
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_reduce(const std::string& mdp_path, const std::string& policy_path) {
    const fpv::MdpModel mdp = fpv::io::parse_mdp_json(fpv::io::read_json_file(mdp_path));
    const fpv::Policy policy =
        fpv::io::parse_policy_json(fpv::io::read_json_file(policy_path), mdp);
    const fpv::ChainModel chain = fpv::marginalize(fpv::apply_policy(mdp, policy));

    nlohmann::json metadata;
    metadata["source_mdp"] = mdp_path;
    metadata["source_policy"] = policy_path;
    nlohmann::json gamma;
    for (Eigen::Index g = 0; g < mdp.randomness_count(); ++g) {
        gamma[mdp.randomness_names[static_cast<std::size_t>(g)]] =
            mdp.gamma_dist[static_cast<std::size_t>(g)];
    }
    metadata["gamma"] = std::move(gamma);
    std::cout << fpv::io::write_model_json(chain, std::move(metadata)).dump(2) << "\n";
    return 0;
}

struct SimulateArgs {
    std::string model_path;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    std::uint64_t max_steps = 0;
    std::vector<std::string> start = {"phi"};
    std::vector<double> confidence;
    std::string format = "json";
};

fpv::StateDistribution resolve_start(const fpv::ChainModel& model,
                                     const std::vector<std::string>& tokens) {
    const Eigen::Index l = model.size();
    if (tokens.size() == 1 && tokens[0] == "phi") {
        const fpv::CanonicalChain chain = fpv::canonicalize(model);
        return fpv::StateDistribution{
            chain.to_original_order(fpv::metastable_distribution(chain).p)};
    }
    if (tokens.size() == 1 && tokens[0] == "uniform") {
        Eigen::VectorXd p = Eigen::VectorXd::Constant(l, 1.0 / static_cast<double>(l - 1));
        p(model.halt_index) = 0.0;
        return fpv::StateDistribution{p};
    }
    if (tokens.size() == 2 && tokens[0] == "state") {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(l);
        for (Eigen::Index i = 0; i < l; ++i) {
            if (model.state_names[static_cast<std::size_t>(i)] == tokens[1]) {
                if (i == model.halt_index) {
                    throw fpv::DomainError("start state is the halt state");
                }
                p(i) = 1.0;
                return fpv::StateDistribution{p};
            }
        }
        throw fpv::DomainError("unknown start state '" + tokens[1] + "'");
    }
    throw fpv::DomainError("--start expects 'phi', 'uniform' or 'state NAME'");
}

int run_simulate(const SimulateArgs& args) {
    const fpv::ChainModel model = fpv::io::parse_model_json(fpv::io::read_json_file(args.model_path));
    const fpv::StateDistribution start = resolve_start(model, args.start);
    std::vector<double> levels = args.confidence;
    if (levels.empty()) levels = {0.9, 0.99};
    const fpv::SimReport report =
        fpv::simulate(model, start, args.trials, args.seed, args.max_steps, levels);
    std::cout << (args.format == "text" ? fpv::io::to_text(report)
                                        : fpv::io::to_json(report, model.state_names));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"First-passage analysis of absorbing Markov chains"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "Analyze a model file");
    analyze->add_option("model", analyze_args.model_path, "model file (JSON)")->required();
    analyze->add_option("--confidence", analyze_args.confidence,
                        "confidence level in (0,1); repeatable");
    analyze->add_option("--value", analyze_args.value, "value matrix name, or 'steps'");
    analyze->add_option("--format", analyze_args.format, "json|text")
        ->check(CLI::IsMember({"json", "text"}));

    ExampleArgs example_args;
    CLI::App* example = app.add_subcommand("example", "Emit a built-in example model");
    example->add_option("name", example_args.name, "coin|epidemics|europe|europe-mod|mdp-fig5")
        ->required();
    example->add_option("--p-heads", example_args.p_heads, "coin: probability of heads");
    example->add_option("--delta", example_args.delta, "epidemics: recovery probability");
    example->add_option("--beta", example_args.beta, "epidemics: infection probability");
    example->add_option("--gamma2", example_args.gamma2, "mdp-fig5: P(g2)");
    example->add_option("--part", example_args.part, "mdp-fig5: mdp|policy");
    example->add_option("--stay-days", example_args.stay_days,
                        "europe: value of a day spent staying (time matrix)");
    example->add_option("--value", example_args.value, "europe: none|distance|time");
    example->add_option("--population", example_args.populations,
                        "europe: City=Number override; repeatable");
    example->add_option("--paris-population", example_args.paris_population,
                        "europe: Paris override");

    std::string mdp_path, policy_path;
    CLI::App* reduce = app.add_subcommand("reduce", "Close an MDP with a policy and marginalize");
    reduce->add_option("mdp", mdp_path, "MDP file (JSON)")->required();
    reduce->add_option("policy", policy_path, "policy file (JSON)")->required();

    SimulateArgs simulate_args;
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo first-passage simulation");
    simulate->add_option("model", simulate_args.model_path, "model file (JSON)")->required();
    simulate->add_option("--trials", simulate_args.trials, "number of trajectories")->required();
    simulate->add_option("--seed", simulate_args.seed, "random seed");
    simulate->add_option("--max-steps", simulate_args.max_steps,
                         "step cap per trajectory (0 = auto)");
    simulate->add_option("--start", simulate_args.start, "phi | uniform | state NAME")
        ->expected(1, 2);
    simulate->add_option("--confidence", simulate_args.confidence,
                         "quantile level in (0,1); repeatable");
    simulate->add_option("--format", simulate_args.format, "json|text")
        ->check(CLI::IsMember({"json", "text"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) return run_analyze(analyze_args);
        if (*example) return run_example(example_args);
        if (*reduce) return run_reduce(mdp_path, policy_path);
        if (*simulate) return run_simulate(simulate_args);
    } catch (const fpv::CensoringError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCensored;
    } catch (const fpv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}

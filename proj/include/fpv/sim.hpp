#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fpv/chain.hpp"
#include "fpv/errors.hpp"
#include "fpv/spectral.hpp"

namespace fpv {

namespace detail {

/// Per-trial pseudo-random stream. Every trial derives its own generator
/// state from (seed, trial index) alone, so batching across threads cannot
/// change any trajectory and runs reproduce exactly.
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) {
        state_ = mix(seed + 0x9E3779B97F4A7C15ULL * (trial + 1));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
};

/// Sparse cumulative row for inverse-CDF sampling.
struct SamplerRow {
    std::vector<double> cumulative;
    std::vector<Eigen::Index> next;

    Eigen::Index sample(double u) const {
        if (cumulative.size() <= 8) {
            for (std::size_t k = 0; k < cumulative.size(); ++k) {
                if (u < cumulative[k]) return next[k];
            }
            return next.back();
        }
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        return next[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                          next.size() - 1)];
    }
};

inline SamplerRow make_sampler_row(const Eigen::VectorXd& row) {
    SamplerRow out;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (row(j) > 0.0) {
            acc += row(j);
            out.cumulative.push_back(acc);
            out.next.push_back(j);
        }
    }
    return out;
}

/// All rows of a chain packed contiguously for the hot trajectory loop. Each
/// row ends with a sentinel (cumulative 2.0, pointing at the row's last
/// target), so the scan needs no bounds check and a short row costs a single
/// predictable comparison. Rows of small-support chains are padded to a
/// common stride, which turns the row lookup into a shift-free multiply and
/// drops one dependent load from the per-step critical path.
struct FlatChainSampler {
    struct Slot {
        std::uint64_t threshold;  ///< cumulative probability scaled to 53 bits
        std::int32_t next;
        std::int32_t pad = 0;
    };
    static constexpr double k_scale = 9007199254740992.0;  // 2^53

    static std::uint64_t to_threshold(double cumulative) {
        if (cumulative >= 1.0) return std::uint64_t{1} << 53;
        return static_cast<std::uint64_t>(std::ceil(cumulative * k_scale));
    }

    /// How a state advances: one sampled transition per step, a geometrically
    /// sampled run of self-loops followed by one exit (identical trajectory
    /// law, far fewer draws for metastable states), or a trap that can never
    /// leave (unit self-loop on a non-halt state).
    enum class StateMode : std::uint8_t { plain, dwell, trap };

    std::vector<Slot> slots;
    std::vector<double> step_value;  ///< parallel to slots; empty without values
    std::vector<std::int32_t> row_offset;
    std::int32_t stride = 0;  ///< > 0: row i starts at i * stride

    std::vector<StateMode> mode;
    std::vector<double> inv_log_self;  ///< 1 / ln(p_ii) for dwell states
    std::vector<double> self_value;    ///< value of the self transition

    explicit FlatChainSampler(const ChainModel& model) {
        const Eigen::Index l = model.size();
        std::int32_t max_row = 0;
        for (Eigen::Index i = 0; i < l; ++i) {
            max_row = std::max(max_row,
                               static_cast<std::int32_t>((model.transition.row(i).array() > 0.0)
                                                             .count()));
        }
        if (max_row + 1 <= 8) {
            stride = 2;
            while (stride < max_row + 1) stride *= 2;  // power of two: shift, not multiply
        }
        row_offset.resize(static_cast<std::size_t>(l));
        mode.resize(static_cast<std::size_t>(l), StateMode::plain);
        inv_log_self.resize(static_cast<std::size_t>(l), 0.0);
        self_value.resize(static_cast<std::size_t>(l), 0.0);
        for (Eigen::Index i = 0; i < l; ++i) {
            row_offset[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(slots.size());
            const double self = model.transition(i, i);
            if (model.value) self_value[static_cast<std::size_t>(i)] = (*model.value)(i, i);

            std::vector<Eigen::Index> support;
            for (Eigen::Index j = 0; j < l; ++j) {
                if (j != i && model.transition(i, j) > 0.0) support.push_back(j);
            }
            const bool use_dwell =
                i != model.halt_index && self >= 0.5 && self < 1.0 && !support.empty();
            if (i != model.halt_index && support.empty()) {
                mode[static_cast<std::size_t>(i)] = StateMode::trap;
            } else if (use_dwell) {
                mode[static_cast<std::size_t>(i)] = StateMode::dwell;
                inv_log_self[static_cast<std::size_t>(i)] = 1.0 / std::log1p(self - 1.0);
            } else if (self > 0.0) {
                support.push_back(i);  // plain rows sample the self-loop too
            }
            // Most-probable transition first: the scan usually stops at the
            // first slot. Dwell rows hold the exit distribution conditioned
            // on leaving.
            std::sort(support.begin(), support.end(), [&](Eigen::Index a, Eigen::Index b) {
                return model.transition(i, a) > model.transition(i, b);
            });
            const double scale = use_dwell ? 1.0 - self : 1.0;
            double acc = 0.0;
            for (const Eigen::Index j : support) {
                acc += model.transition(i, j) / scale;
                slots.push_back({to_threshold(acc), static_cast<std::int32_t>(j)});
                if (model.value) step_value.push_back((*model.value)(i, j));
            }
            if (support.empty()) {  // halt row or trap: a self slot keeps rows non-empty
                slots.push_back({to_threshold(1.0), static_cast<std::int32_t>(i)});
                if (model.value) step_value.push_back(self_value[static_cast<std::size_t>(i)]);
            }
            // Sentinel plus padding up to the stride; all clamp round-off in u.
            const std::size_t row_end =
                stride > 0 ? static_cast<std::size_t>((i + 1) * stride) : slots.size() + 1;
            while (slots.size() < row_end) {
                slots.push_back({~std::uint64_t{0}, slots.back().next});
                if (model.value) step_value.push_back(step_value.back());
            }
        }
    }
};

/// One trajectory; returns the step count, leaves the final state in `state`
/// (censoring shows as state != halt) and accumulates transition values when
/// WithValues is set.
template <bool WithValues, bool Strided>
inline std::uint64_t run_trajectory(const FlatChainSampler& sampler, std::int32_t& state,
                                    std::int32_t halt, std::uint64_t max_steps, TrialRng& rng,
                                    double& value_acc) {
    const FlatChainSampler::Slot* slots = sampler.slots.data();
    const std::int32_t* offsets = sampler.row_offset.data();
    const std::int32_t stride = sampler.stride;
    const FlatChainSampler::StateMode* modes = sampler.mode.data();
    std::uint64_t steps = 0;
    // The draw for the next step is produced while the current lookup is in
    // flight, keeping the generator off the state-to-state critical path.
    std::uint64_t u = rng.next_u64() >> 11;
    while (state != halt && steps < max_steps) {
        const FlatChainSampler::StateMode m = modes[state];
        if (m == FlatChainSampler::StateMode::plain) {
            std::int32_t k = Strided ? state * stride : offsets[state];
            while (u >= slots[k].threshold) ++k;
            u = rng.next_u64() >> 11;
            if constexpr (WithValues) value_acc += sampler.step_value[static_cast<std::size_t>(k)];
            state = slots[k].next;
            ++steps;
        } else if (m == FlatChainSampler::StateMode::dwell) {
            // Length of the self-loop run before the exit, sampled from its
            // geometric law by inversion; then one draw picks the exit.
            const double uf = static_cast<double>(u + 1) * 0x1.0p-53;  // in (0, 1]
            const double run = std::floor(std::log(uf) * sampler.inv_log_self[state]);
            const std::uint64_t remaining = max_steps - steps;
            if (!(run < static_cast<double>(remaining))) {
                if constexpr (WithValues) {
                    value_acc += static_cast<double>(remaining) * sampler.self_value[state];
                }
                steps = max_steps;  // censored mid-run
                break;
            }
            const std::uint64_t stays = static_cast<std::uint64_t>(run);
            u = rng.next_u64() >> 11;
            std::int32_t k = Strided ? state * stride : offsets[state];
            while (u >= slots[k].threshold) ++k;
            u = rng.next_u64() >> 11;
            if constexpr (WithValues) {
                value_acc += static_cast<double>(stays) * sampler.self_value[state] +
                             sampler.step_value[static_cast<std::size_t>(k)];
            }
            state = slots[k].next;
            steps += stays + 1;
        } else {  // trap: a non-halt unit self-loop can never leave
            if constexpr (WithValues) {
                value_acc +=
                    static_cast<double>(max_steps - steps) * sampler.self_value[state];
            }
            steps = max_steps;
            break;
        }
    }
    return steps;
}

template <bool WithValues>
inline std::uint64_t run_trajectory(const FlatChainSampler& sampler, std::int32_t& state,
                                    std::int32_t halt, std::uint64_t max_steps, TrialRng& rng,
                                    double& value_acc) {
    return sampler.stride > 0
               ? run_trajectory<WithValues, true>(sampler, state, halt, max_steps, rng, value_acc)
               : run_trajectory<WithValues, false>(sampler, state, halt, max_steps, rng,
                                                   value_acc);
}

}  // namespace detail

/// Monte Carlo estimates of first-passage statistics. Trajectories that hit
/// the step cap are counted as censored and excluded from the moments and
/// quantiles.
struct SimReport {
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    std::uint64_t max_steps = 0;
    std::uint64_t censored = 0;
    double mean_fpt = 0.0;
    double std_fpt = 0.0;
    std::optional<double> mean_fpv;  ///< present when the chain carries values
    std::optional<double> std_fpv;
    std::map<double, double> fpt_quantiles;  ///< confidence level -> steps
    StateDistribution start;
    std::vector<std::uint64_t> fpt_samples;  ///< uncensored, sorted ascending
};

/// Samples `trials` trajectories from `start` until absorption or max_steps.
/// max_steps = 0 picks 1000 * MFPT when escape is certain, 1e7 otherwise.
/// Deterministic for a given (model, start, trials, seed, max_steps),
/// independent of how many threads execute the batches.
inline SimReport simulate(const ChainModel& model_in, const StateDistribution& start,
                          std::uint64_t trials, std::uint64_t seed, std::uint64_t max_steps = 0,
                          std::vector<double> quantile_levels = {0.9, 0.99}) {
    const ChainModel model = validate_chain(model_in);
    validate_distribution(start.p, model.size());
    if (trials == 0) throw DomainError("need at least one trial");
    if (start.p(model.halt_index) > 0.0) {
        throw DomainError("start distribution puts mass on the halt state");
    }
    for (double pr : quantile_levels) {
        if (!(pr > 0.0 && pr < 1.0)) throw DomainError("quantile levels must lie in (0,1)");
    }

    if (max_steps == 0) {
        const SpectralSummary s = analyze_spectrum(canonicalize(model));
        max_steps = s.lambda2_is_one()
                        ? 10'000'000ULL
                        : static_cast<std::uint64_t>(
                              std::ceil(1000.0 / (1.0 - s.lambda2)));
    }

    const detail::FlatChainSampler sampler(model);
    const detail::SamplerRow start_row = detail::make_sampler_row(start.p);
    const bool with_values = model.value.has_value();
    const std::int32_t halt = static_cast<std::int32_t>(model.halt_index);

    std::vector<std::uint64_t> fpt(trials);
    std::vector<double> fpv(with_values ? trials : 0);
    std::vector<std::uint8_t> cut(trials, 0);

    auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            detail::TrialRng rng(seed, t);
            std::int32_t s = static_cast<std::int32_t>(start_row.sample(rng.next_double()));
            double acc = 0.0;
            const std::uint64_t steps =
                with_values
                    ? detail::run_trajectory<true>(sampler, s, halt, max_steps, rng, acc)
                    : detail::run_trajectory<false>(sampler, s, halt, max_steps, rng, acc);
            cut[t] = static_cast<std::uint8_t>(s != halt);
            fpt[t] = steps;
            if (with_values) fpv[t] = acc;
        }
    };

    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, trials));
    if (workers <= 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::uint64_t chunk = (trials + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint64_t begin = chunk * w;
            const std::uint64_t end = std::min(trials, begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    SimReport report;
    report.trials = trials;
    report.seed = seed;
    report.max_steps = max_steps;
    report.start = start;
    report.fpt_samples.reserve(trials);

    // Sequential reduction in trial order keeps the result independent of the
    // thread split. Step counts are integers, so the sums are exact.
    std::uint64_t sum = 0;
    unsigned __int128 sum_sq = 0;
    double value_sum = 0.0, value_sum_sq = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        if (cut[t]) {
            ++report.censored;
            continue;
        }
        report.fpt_samples.push_back(fpt[t]);
        sum += fpt[t];
        sum_sq += static_cast<unsigned __int128>(fpt[t]) * fpt[t];
        if (with_values) {
            value_sum += fpv[t];
            value_sum_sq += fpv[t] * fpv[t];
        }
    }
    if (report.censored * 100 > trials) {
        throw CensoringError(std::to_string(report.censored) + " of " + std::to_string(trials) +
                             " trajectories were cut at " + std::to_string(max_steps) +
                             " steps (over 1%)");
    }
    const double n = static_cast<double>(report.fpt_samples.size());
    if (n > 0) {
        report.mean_fpt = static_cast<double>(sum) / n;
        const double ex2 = static_cast<double>(sum_sq) / n;
        report.std_fpt = std::sqrt(std::max(0.0, ex2 - report.mean_fpt * report.mean_fpt));
        if (with_values) {
            report.mean_fpv = value_sum / n;
            report.std_fpv =
                std::sqrt(std::max(0.0, value_sum_sq / n - *report.mean_fpv * *report.mean_fpv));
        }
    }
    std::sort(report.fpt_samples.begin(), report.fpt_samples.end());
    for (double pr : quantile_levels) {
        if (!report.fpt_samples.empty()) {
            const std::size_t idx = static_cast<std::size_t>(
                std::min<double>(std::ceil(pr * n) - 1.0, n - 1.0));
            report.fpt_quantiles[pr] = static_cast<double>(report.fpt_samples[std::max<std::size_t>(idx, 0)]);
        }
    }
    return report;
}

/// Empirical counterparts of the confidence bounds: the (1 - pr) and pr
/// quantiles of the first-passage-time sample.
inline std::pair<double, double> empirical_quantiles(const SimReport& report, double pr) {
    if (!(pr > 0.0 && pr < 1.0)) throw DomainError("confidence level must lie in (0,1)");
    if (report.fpt_samples.empty()) throw DomainError("report holds no uncensored samples");
    const double n = static_cast<double>(report.fpt_samples.size());
    auto quantile = [&](double level) {
        const std::size_t idx = static_cast<std::size_t>(
            std::clamp(std::ceil(level * n) - 1.0, 0.0, n - 1.0));
        return static_cast<double>(report.fpt_samples[idx]);
    };
    return {quantile(1.0 - pr), quantile(pr)};
}

}  // namespace fpv

#include <catch_amalgamated.hpp>

#include <random>

#include "fpv/confidence.hpp"
#include "fpv/models.hpp"
#include "fpv/passage.hpp"
#include "fpv/sim.hpp"
#include "fpv/spectral.hpp"
#include "support/test_support.hpp"

namespace {

fpv::StateDistribution phi_of(const fpv::ChainModel& model) {
    const fpv::CanonicalChain chain = fpv::canonicalize(model);
    return fpv::StateDistribution{
        chain.to_original_order(fpv::metastable_distribution(chain).p)};
}

}  // namespace

TEST_CASE("forced absorption gives FPT = 1 on every trajectory") {
    fpv::ChainModel chain;
    chain.state_names = {"halt", "live"};
    chain.halt_index = 0;
    chain.transition.resize(2, 2);
    chain.transition << 1.0, 0.0, 1.0, 0.0;
    Eigen::VectorXd start(2);
    start << 0.0, 1.0;
    const fpv::SimReport report = fpv::simulate(chain, {start}, 1000, 99);
    CHECK(report.mean_fpt == 1.0);
    CHECK(report.std_fpt == 0.0);
    CHECK(report.censored == 0);
    CHECK(report.fpt_samples.front() == 1);
    CHECK(report.fpt_samples.back() == 1);
}

TEST_CASE("identical inputs give bit-identical reports") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.2);
    const fpv::StateDistribution start = phi_of(chain);
    const fpv::SimReport a = fpv::simulate(chain, start, 5000, 1234);
    const fpv::SimReport b = fpv::simulate(chain, start, 5000, 1234);
    CHECK(a.mean_fpt == b.mean_fpt);
    CHECK(a.std_fpt == b.std_fpt);
    CHECK(a.fpt_samples == b.fpt_samples);
    const fpv::SimReport c = fpv::simulate(chain, start, 5000, 4321);
    CHECK(a.mean_fpt != c.mean_fpt);
}

TEST_CASE("simulated coin-toss passage agrees with the analytic mean and spread") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.01);
    const fpv::StateDistribution start = phi_of(chain);
    const fpv::SpectralSummary s = fpv::analyze_spectrum(fpv::canonicalize(chain));
    const double m = fpv::mfpt_scalar(s);
    const std::uint64_t trials = 100'000;
    const fpv::SimReport report = fpv::simulate(chain, start, trials, 7);

    const double se = report.std_fpt / std::sqrt(static_cast<double>(trials));
    CHECK(std::abs(report.mean_fpt - m) <= 4.0 * se);

    // The spread estimator concentrates at rate sigma / sqrt(2n).
    const double sigma = fpv::fpt_std(s);
    CHECK(std::abs(report.std_fpt - sigma) <= 4.0 * sigma / std::sqrt(2.0 * trials));
}

TEST_CASE("accumulated values agree with the analytic per-state expectation") {
    std::mt19937_64 rng(77);
    fpv::ChainModel model = fpv::test::random_chain(rng, 5);
    model.value = fpv::test::random_value_matrix(rng, 5);
    const fpv::CanonicalChain chain = fpv::canonicalize(model);
    const Eigen::VectorXd mv = fpv::mfpv_vector(chain);

    // Start from a single transient state so the target is one entry of m.
    const Eigen::Index canonical_start = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index original_start =
        chain.to_original[static_cast<std::size_t>(canonical_start)];
    Eigen::VectorXd start = Eigen::VectorXd::Zero(5);
    start(original_start) = 1.0;

    const std::uint64_t trials = 200'000;
    const fpv::SimReport report = fpv::simulate(model, {start}, trials, 11);
    REQUIRE(report.mean_fpv.has_value());
    const double se = *report.std_fpv / std::sqrt(static_cast<double>(trials));
    CHECK(std::abs(*report.mean_fpv - mv(canonical_start)) <= 4.0 * se);
}

TEST_CASE("empirical quantiles straddle the analytic bounds") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.01);
    const fpv::StateDistribution start = phi_of(chain);
    const fpv::SpectralSummary s = fpv::analyze_spectrum(fpv::canonicalize(chain));
    const fpv::SimReport report = fpv::simulate(chain, start, 100'000, 3);

    const fpv::FpvBounds bounds = fpv::fpt_bounds(s.lambda2, 0.9);
    const auto [lo, hi] = fpv::empirical_quantiles(report, 0.9);
    CHECK(std::abs(lo - bounds.lfpt) / bounds.lfpt <= 0.05);
    CHECK(std::abs(hi - (bounds.ufpt - 1.0)) / bounds.ufpt <= 0.05);

    // Median consistency: the pr = 0.5 outputs coincide.
    const auto [mlo, mhi] = fpv::empirical_quantiles(report, 0.5);
    CHECK(mlo == mhi);

    // Direct coverage counts.
    std::size_t above = 0, below = 0;
    for (const std::uint64_t fpt : report.fpt_samples) {
        if (static_cast<double>(fpt) >= bounds.lfpt) ++above;
        if (static_cast<double>(fpt) <= bounds.ufpt) ++below;
    }
    const double n = static_cast<double>(report.fpt_samples.size());
    const double se = std::sqrt(0.9 * 0.1 / n);
    CHECK(static_cast<double>(above) / n >= 0.9 - 3.0 * se);
    CHECK(static_cast<double>(below) / n >= 0.9 - 3.0 * se);
}

TEST_CASE("a tight step cap censors and trips the one-percent rule") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.01);
    const fpv::StateDistribution start = phi_of(chain);
    CHECK_THROWS_AS(fpv::simulate(chain, start, 2000, 5, /*max_steps=*/50), fpv::CensoringError);
}

TEST_CASE("the automatic step cap is a thousand mean passage times") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.2);
    const fpv::StateDistribution start = phi_of(chain);
    const fpv::SimReport report = fpv::simulate(chain, start, 10, 1);
    const double m =
        fpv::mfpt_scalar(fpv::analyze_spectrum(fpv::canonicalize(chain)));
    CHECK(report.max_steps == static_cast<std::uint64_t>(std::ceil(1000.0 * m)));
}

TEST_CASE("a near-unit self-loop within the row tolerance censors cleanly") {
    // Row sums to 1 + 1e-10 (legal): the self-loop is exactly 1, so the
    // trajectory can never leave the transient state.
    fpv::ChainModel chain;
    chain.state_names = {"halt", "sticky"};
    chain.halt_index = 0;
    chain.transition.resize(2, 2);
    chain.transition << 1.0, 0.0, 1e-10, 1.0;
    Eigen::VectorXd start(2);
    start << 0.0, 1.0;
    CHECK_THROWS_AS(fpv::simulate(chain, {start}, 100, 3, /*max_steps=*/1000),
                    fpv::CensoringError);
}

TEST_CASE("simulation input validation") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.01);
    Eigen::VectorXd on_halt = Eigen::VectorXd::Zero(3);
    on_halt(0) = 1.0;
    CHECK_THROWS_AS(fpv::simulate(chain, {on_halt}, 10, 1), fpv::DomainError);
    CHECK_THROWS_AS(fpv::simulate(chain, phi_of(chain), 0, 1), fpv::DomainError);
    CHECK_THROWS_AS(fpv::simulate(chain, phi_of(chain), 10, 1, 0, {1.5}), fpv::DomainError);
}

TEST_CASE("Monte Carlo agrees with the analytic values on every built-in example") {
    const fpv::ChainModel examples[] = {
        fpv::models::coin_toss(0.01),
        fpv::models::sis_two_node(0.01, 0.8),
        fpv::models::europe_tour(),
        fpv::models::europe_tour_modified(),
    };
    const std::uint64_t trials = 100'000;
    std::uint64_t seed = 1000;
    for (const fpv::ChainModel& model : examples) {
        const fpv::SpectralSummary s = fpv::analyze_spectrum(fpv::canonicalize(model));
        const double m = fpv::mfpt_scalar(s);
        const double sigma = fpv::fpt_std(s);
        const fpv::SimReport report = fpv::simulate(model, phi_of(model), trials, seed++);
        const double se = report.std_fpt / std::sqrt(static_cast<double>(trials));
        CHECK(std::abs(report.mean_fpt - m) <= 4.0 * se);
        CHECK(std::abs(report.std_fpt - sigma) <= 4.0 * sigma / std::sqrt(2.0 * trials));
    }
}

TEST_CASE("empirical bounds of the modified tour bracket 99 percent of samples") {
    const fpv::ChainModel model = fpv::models::europe_tour_modified();
    const fpv::SimReport report = fpv::simulate(model, phi_of(model), 20'000, 8);
    const auto [lo, hi] = fpv::empirical_quantiles(report, 0.99);
    std::size_t at_least_lo = 0, at_most_hi = 0;
    for (const std::uint64_t fpt : report.fpt_samples) {
        if (static_cast<double>(fpt) >= lo) ++at_least_lo;
        if (static_cast<double>(fpt) <= hi) ++at_most_hi;
    }
    const double n = static_cast<double>(report.fpt_samples.size());
    CHECK(static_cast<double>(at_least_lo) / n >= 0.99);
    CHECK(static_cast<double>(at_most_hi) / n >= 0.99);
}

TEST_CASE("the quantile map is filled for the requested levels") {
    const fpv::ChainModel chain = fpv::models::coin_toss(0.05);
    const fpv::SimReport report =
        fpv::simulate(chain, phi_of(chain), 20'000, 13, 0, {0.5, 0.9, 0.99});
    REQUIRE(report.fpt_quantiles.size() == 3);
    CHECK(report.fpt_quantiles.at(0.5) <= report.fpt_quantiles.at(0.9));
    CHECK(report.fpt_quantiles.at(0.9) <= report.fpt_quantiles.at(0.99));
    CHECK(report.mean_fpt >= 1.0);
}

#include <catch_amalgamated.hpp>

#include <random>

#include "fpv/models.hpp"
#include "fpv/passage.hpp"
#include "fpv/spectral.hpp"
#include "support/test_support.hpp"

using Catch::Matchers::WithinAbs;
using fpv::test::rel_error;

namespace {

// Fixed substochastic 6x6 matrix; the expected spectral radius was computed
// with an independent dense QR eigensolver and frozen here.
Eigen::MatrixXd frozen_6x6() {
    Eigen::MatrixXd a(6, 6);
    a << 0.062090401860106226, 0.32736827085278764, 0.19207887908421362, 0.27342059529665924,
        0.086996934587510483, 0.036827526907142256,  //
        0.20161458503638358, 0.13336457214343136, 0.24015070031389957, 0.16531018344441784,
        0.05020205608930392, 0.13038277657805566,  //
        0.152642351022682, 0.17627575790813099, 0.06452894997887057, 0.17838239436286077,
        0.094975042155159617, 0.19087469560886133,  //
        0.16087138797923825, 0.042455916247047996, 0.25272110718745339, 0.17492133579295344,
        0.034669950817867071, 0.24957956114279317,  //
        0.26006982363021519, 0.1001093459236351, 0.25645720199328709, 0.080629806554899944,
        0.20084804789395219, 0.015809937375541292,  //
        0.11643308739400481, 0.10672871561231075, 0.33394250117537394, 0.053301301852211776,
        0.079902724676475037, 0.16905345292183357;
    return a;
}
constexpr double k_frozen_radius = 0.90431267567115592;

fpv::SpectralOptions power_only() {
    fpv::SpectralOptions opt;
    opt.force_power = true;
    return opt;
}

}  // namespace

TEST_CASE("perron reproduces the coin-toss quantities on both paths") {
    const fpv::CanonicalChain chain = fpv::canonicalize(fpv::models::coin_toss(0.01));
    for (const bool force_power : {false, true}) {
        fpv::SpectralOptions opt;
        opt.force_power = force_power;
        const fpv::PerronResult result = fpv::perron(chain.t_hat, opt);
        CHECK(std::abs(result.lambda2 - (1.0 - 9.9020e-5)) / 9.9020e-5 <= 1e-4);
        CHECK_THAT(result.z(0), WithinAbs(0.9901, 1e-4));
        CHECK_THAT(result.z(1), WithinAbs(0.0099, 1e-4));
        CHECK(result.z.sum() == Catch::Approx(1.0).margin(1e-14));
        CHECK((chain.t_hat * result.z - result.lambda2 * result.z).lpNorm<Eigen::Infinity>() <=
              1e-11);
        CHECK(result.method == (force_power ? fpv::EigenMethod::power : fpv::EigenMethod::dense));
    }
}

TEST_CASE("perron handles a single transient state") {
    Eigen::MatrixXd t_hat(1, 1);
    t_hat << 0.5;
    const fpv::PerronResult result = fpv::perron(t_hat);
    CHECK(result.lambda2 == Catch::Approx(0.5).margin(1e-15));
    CHECK(result.z(0) == 1.0);
}

TEST_CASE("power iteration matches the frozen dense-QR oracle") {
    const Eigen::MatrixXd a = frozen_6x6();
    const fpv::PerronResult result = fpv::perron(a, power_only());
    CHECK(std::abs(result.lambda2 - k_frozen_radius) <= 1e-10);
    // Same bound against the live oracle.
    CHECK(std::abs(result.lambda2 - fpv::test::spectral_radius_oracle(a)) <= 1e-10);
}

TEST_CASE("perron rejects malformed input") {
    CHECK_THROWS_AS(fpv::perron(Eigen::MatrixXd::Zero(2, 3)), fpv::ShapeError);
    Eigen::MatrixXd negative(2, 2);
    negative << 0.5, -0.1, 0.2, 0.3;
    CHECK_THROWS_AS(fpv::perron(negative), fpv::NegativeEntryError);
}

TEST_CASE("metastable distribution matches the worked examples") {
    const fpv::StateDistribution coin =
        fpv::metastable_distribution(fpv::canonicalize(fpv::models::coin_toss(0.01)));
    CHECK(coin.p(0) == 0.0);
    CHECK_THAT(coin.p(1), WithinAbs(0.9901, 1e-4));
    CHECK_THAT(coin.p(2), WithinAbs(0.0099, 1e-4));

    const fpv::StateDistribution epidemics =
        fpv::metastable_distribution(fpv::canonicalize(fpv::models::sis_two_node(0.01, 0.8)));
    CHECK(epidemics.p(0) == 0.0);
    CHECK_THAT(epidemics.p(1), WithinAbs(0.0122, 5e-5));
    CHECK_THAT(epidemics.p(2), WithinAbs(0.0122, 5e-5));
    CHECK_THAT(epidemics.p(3), WithinAbs(0.9757, 5e-5));

    // Athens can only be entered from the halt state, so its weight is exact zero.
    const fpv::StateDistribution europe =
        fpv::metastable_distribution(fpv::canonicalize(fpv::models::europe_tour()));
    CHECK(europe.p(2) == 0.0);
}

TEST_CASE("lambda3 modulus on the worked examples") {
    CHECK_THAT(fpv::lambda3_modulus(fpv::canonicalize(fpv::models::sis_two_node(0.01, 0.8))),
               WithinAbs(0.19, 1e-6));
    CHECK(rel_error(fpv::lambda3_modulus(fpv::canonicalize(fpv::models::europe_tour())), 0.6355) <=
          0.02);

    fpv::ChainModel two_state;
    two_state.state_names = {"halt", "live"};
    two_state.halt_index = 0;
    two_state.transition.resize(2, 2);
    two_state.transition << 1.0, 0.0, 0.5, 0.5;
    CHECK(fpv::lambda3_modulus(fpv::canonicalize(two_state)) == 0.0);
}

TEST_CASE("memory constant on the worked examples") {
    CHECK(rel_error(fpv::memory_constant(fpv::canonicalize(fpv::models::sis_two_node(0.01, 0.8))),
                    1.8e-4) <= 0.03);
    CHECK(rel_error(fpv::memory_constant(fpv::canonicalize(fpv::models::europe_tour())), 0.3676) <=
          0.05);
    CHECK(rel_error(fpv::memory_constant(fpv::canonicalize(fpv::models::europe_tour_modified())),
                    1.1688e-4) <= 0.05);
}

TEST_CASE("memory constant is undefined when escape is impossible") {
    fpv::ChainModel absorbing;
    absorbing.state_names = {"halt", "stuck"};
    absorbing.halt_index = 0;
    absorbing.transition = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(fpv::memory_constant(fpv::canonicalize(absorbing)), fpv::UndefinedError);
}

TEST_CASE("row-sum slack cannot push the escape probability negative") {
    // A closed pair of transients whose rows sum to 1 + 9e-10 (legal within
    // eps_row); the raw spectral radius lands just above one.
    fpv::ChainModel chain;
    chain.state_names = {"halt", "a", "b"};
    chain.halt_index = 0;
    chain.transition.resize(3, 3);
    chain.transition << 1.0, 0.0, 0.0,  //
        0.0, 0.5, 0.5 + 9e-10,          //
        0.0, 0.5 + 9e-10, 0.5;
    const fpv::SpectralSummary s = fpv::analyze_spectrum(fpv::canonicalize(chain));
    CHECK(s.lambda2 == 1.0);
    CHECK(s.escape_prob == 0.0);
    CHECK(std::isinf(fpv::mfpt_scalar(s)));
}

TEST_CASE("lambda2 = 1 is detected and snapped") {
    fpv::ChainModel absorbing;
    absorbing.state_names = {"halt", "stuck"};
    absorbing.halt_index = 0;
    absorbing.transition = Eigen::MatrixXd::Identity(2, 2);
    const fpv::SpectralSummary summary = fpv::analyze_spectrum(fpv::canonicalize(absorbing));
    CHECK(summary.lambda2 == 1.0);
    CHECK(summary.lambda2_is_one());
    CHECK(summary.escape_prob == 0.0);
    CHECK(std::isnan(summary.memory_constant));
}

TEST_CASE("fixed point and escape probability of phi") {
    std::mt19937_64 rng(101);
    std::vector<fpv::ChainModel> chains = {fpv::models::coin_toss(0.01),
                                           fpv::models::sis_two_node(0.01, 0.8),
                                           fpv::models::europe_tour(),
                                           fpv::models::europe_tour_modified()};
    for (int round = 0; round < 25; ++round) {
        chains.push_back(fpv::test::random_chain(rng, 2 + round % 15));
    }
    for (const fpv::ChainModel& model : chains) {
        const fpv::CanonicalChain chain = fpv::canonicalize(model);
        const fpv::SpectralSummary s = fpv::analyze_spectrum(chain);
        REQUIRE(s.lambda2 < 1.0);
        CHECK(s.lambda2 > 0.0 - 1e-15);

        // Escape probability: halt entry of one step from phi equals 1 - lambda2.
        const Eigen::VectorXd stepped = chain.model.transition.transpose() * s.phi.p;
        CHECK(std::abs(stepped(0) - (1.0 - s.lambda2)) <= 1e-10);

        if (s.lambda2 > 1e-12) {
            // Zeroing the halt entry and renormalizing reproduces phi.
            Eigen::VectorXd renorm = stepped;
            renorm(0) = 0.0;
            renorm /= renorm.sum();
            CHECK((renorm - s.phi.p).lpNorm<Eigen::Infinity>() <= 1e-8);
        }
        CHECK((s.phi.p.array() >= 0.0).all());
        CHECK(std::abs(s.phi.p.sum() - 1.0) <= 1e-12);
        CHECK(s.lambda3_modulus <= s.lambda2 + 1e-15);
    }
}

TEST_CASE("perron is invariant under transient relabeling") {
    std::mt19937_64 rng(303);
    for (int round = 0; round < 15; ++round) {
        const Eigen::Index l = 3 + round % 10;
        const fpv::ChainModel model = fpv::test::random_chain(rng, l);
        const fpv::CanonicalChain chain = fpv::canonicalize(model);
        const Eigen::Index n = chain.transient_count();

        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd permuted(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                permuted(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) =
                    chain.t_hat(i, j);
            }
        }
        const fpv::PerronResult base = fpv::perron(chain.t_hat);
        const fpv::PerronResult shuffled = fpv::perron(permuted);
        CHECK(std::abs(base.lambda2 - shuffled.lambda2) <= 1e-12);
        for (Eigen::Index i = 0; i < n; ++i) {
            CHECK(std::abs(shuffled.z(perm[static_cast<std::size_t>(i)]) - base.z(i)) <= 1e-12);
        }
    }
}

TEST_CASE("strictly positive transient blocks give strictly positive Perron vectors") {
    std::mt19937_64 rng(404);
    for (int round = 0; round < 10; ++round) {
        const fpv::ChainModel model = fpv::test::random_chain(rng, 3 + round, true);
        const fpv::PerronResult result = fpv::perron(fpv::canonicalize(model).t_hat);
        CHECK((result.z.array() > 0.0).all());
    }
}

TEST_CASE("power and dense paths agree on random chains") {
    std::mt19937_64 rng(505);
    for (int round = 0; round < 12; ++round) {
        const fpv::CanonicalChain chain =
            fpv::canonicalize(fpv::test::random_chain(rng, 3 + round));
        const fpv::SpectralSummary dense = fpv::analyze_spectrum(chain);
        const fpv::SpectralSummary power = fpv::analyze_spectrum(chain, power_only());
        CHECK(std::abs(dense.lambda2 - power.lambda2) <= 1e-10);
        CHECK(std::abs(dense.lambda3_modulus - power.lambda3_modulus) <= 1e-6);
        CHECK((dense.phi.p - power.phi.p).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK(power.eigen_method == fpv::EigenMethod::power);
    }
}

TEST_CASE("a 100-state chain takes the iterative path and matches the dense oracle") {
    std::mt19937_64 rng(606);
    const fpv::CanonicalChain chain = fpv::canonicalize(fpv::test::random_chain(rng, 100));
    const fpv::SpectralSummary summary = fpv::analyze_spectrum(chain);
    CHECK(summary.eigen_method == fpv::EigenMethod::power);
    CHECK(std::abs(summary.lambda2 - fpv::test::spectral_radius_oracle(chain.t_hat)) <= 1e-10);
    CHECK(std::abs(summary.lambda3_modulus - fpv::test::second_modulus_oracle(chain.t_hat)) <=
          1e-6);
}

TEST_CASE("exhausting the iteration budget raises ConvergenceError unless dense fallback is on") {
    const fpv::CanonicalChain chain = fpv::canonicalize(fpv::models::europe_tour());
    fpv::SpectralOptions opt;
    opt.force_power = true;
    opt.max_iterations = 2;
    opt.allow_dense_fallback = false;
    CHECK_THROWS_AS(fpv::analyze_spectrum(chain, opt), fpv::ConvergenceError);
    opt.allow_dense_fallback = true;
    const fpv::SpectralSummary summary = fpv::analyze_spectrum(chain, opt);
    CHECK(summary.eigen_method == fpv::EigenMethod::dense);
    CHECK(rel_error(1.0 / (1.0 - summary.lambda2), 7.4643) <= 0.02);
}

TEST_CASE("the dense path reports the sorted modulus spectrum") {
    const fpv::CanonicalChain chain = fpv::canonicalize(fpv::models::sis_two_node(0.01, 0.8));
    const fpv::SpectralSummary summary = fpv::analyze_spectrum(chain);
    REQUIRE(summary.modulus_spectrum.size() == 3);
    CHECK(std::is_sorted(summary.modulus_spectrum.rbegin(), summary.modulus_spectrum.rend()));
    CHECK(summary.modulus_spectrum[0] == Catch::Approx(summary.lambda2).margin(1e-14));
    CHECK(summary.modulus_spectrum[1] == Catch::Approx(0.19).margin(1e-6));
}

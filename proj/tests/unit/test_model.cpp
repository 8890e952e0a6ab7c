#include <catch_amalgamated.hpp>

#include <vector>

#include "aftsgd/error.hpp"
#include "aftsgd/model.hpp"
#include "support/brute_force.hpp"

using namespace aftsgd;
using testsupport::Gen;

namespace {

MiniBatch two_point() {
    const std::vector<Observation> obs{{0.0, true, {1.0, 0.0}}, {1.0, true, {0.0, 1.0}}};
    return MiniBatch::from_observations(obs, 1);
}

Coefficients vec2(double a, double b) {
    Coefficients v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("batch loss examples", "[model]") {
    const MiniBatch b = two_point();
    CHECK(batch_loss(b, vec2(0, 0)) == Catch::Approx(0.5).epsilon(1e-15));

    const std::vector<Observation> censored{{0.0, false, {1.0, 0.0}}, {1.0, false, {0.0, 1.0}}, {-2, false, {3, 3}}};
    const MiniBatch c = MiniBatch::from_observations(censored, 1);
    CHECK(batch_loss(c, vec2(0.3, -7)) == 0.0);
    CHECK(batch_score(c, vec2(0.3, -7)) == Coefficients::Zero(2));

    CHECK(batch_loss(b.shifted(3.25), vec2(0, 0)) == Catch::Approx(batch_loss(b, vec2(0, 0))));
}

TEST_CASE("batch score examples", "[model]") {
    const MiniBatch b = two_point();
    CHECK(batch_score(b, vec2(0, 0)).isApprox(vec2(0.5, -0.5)));

    const std::vector<Observation> same{{0.3, true, {1.5, -2.0}}, {1.0, true, {1.5, -2.0}}, {-1.0, false, {1.5, -2.0}}};
    const MiniBatch s = MiniBatch::from_observations(same, 1);
    CHECK(batch_score(s, vec2(4, 1)) == Coefficients::Zero(2));
}

TEST_CASE("perturbed score examples", "[model]") {
    const MiniBatch b = two_point();
    const Coefficients zero = vec2(0, 0);
    CHECK(perturbed_batch_score(b, zero, PerturbationWeights{{1.0, 1.0}}) == batch_score(b, zero));
    CHECK(perturbed_batch_score(b, zero, PerturbationWeights{{2.0, 1.0}}).isApprox(vec2(1, -1)));
    CHECK(perturbed_batch_score(b, zero, PerturbationWeights{{0.0, 0.0}}) == Coefficients::Zero(2));
    CHECK_THROWS_AS(perturbed_batch_score(b, zero, PerturbationWeights{{-0.1, 1.0}}), InputError);
    CHECK_THROWS_AS(perturbed_batch_score(b, zero, PerturbationWeights{{1.0}}), InputError);
}

TEST_CASE("full loss and score examples", "[model]") {
    const Dataset d{{0.0, true, {1.0, 0.0}}, {1.0, true, {0.0, 1.0}}};
    CHECK(full_loss(d, vec2(0, 0)) == Catch::Approx(0.5));
    CHECK(full_score(d, vec2(0, 0)).isApprox(vec2(0.5, -0.5)));

    Dataset censored = d;
    for (auto& o : censored) o.event = false;
    CHECK(full_loss(censored, vec2(1, 2)) == 0.0);
    CHECK(full_score(censored, vec2(1, 2)) == Coefficients::Zero(2));

    Gen g(5);
    const Dataset x = g.dataset(17, 3);
    Dataset twice = x;
    twice.insert(twice.end(), x.begin(), x.end());
    const Coefficients beta = g.vector(3);
    CHECK(full_loss(twice, beta) == Catch::Approx(2.0 * full_loss(x, beta)).epsilon(1e-12));

    CHECK_THROWS_AS(full_loss(Dataset{d.front()}, vec2(0, 0)), InputError);
    CHECK_THROWS_AS(full_score(Dataset{}, vec2(0, 0)), InputError);
}

TEST_CASE("configuration errors", "[model]") {
    const MiniBatch b = two_point();
    CHECK_THROWS_AS(batch_loss(b, Coefficients::Zero(3)), ConfigError);
    CHECK_THROWS_AS(batch_score(b, Coefficients::Zero(1)), ConfigError);
    const std::vector<Observation> one{{0.0, true, {1.0, 0.0}}};
    CHECK_THROWS_AS(batch_score(MiniBatch::from_observations(one, 1), vec2(0, 0)), ConfigError);
    const Dataset mixed{{0.0, true, {1.0, 0.0}}, {1.0, true, {0.0}}};
    CHECK_THROWS_AS(full_loss(mixed, vec2(0, 0)), InputError);
}

TEST_CASE("batch and full evaluations agree with pair enumeration", "[model][oracle]") {
    Gen g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t p = g.index(1, 4);
        const std::size_t k = g.index(2, 40);
        const Dataset d = g.dataset(k, p);
        const Coefficients beta = g.coin(0.2) ? Coefficients::Zero(static_cast<Eigen::Index>(p))
                                              : g.vector(p);
        const MiniBatch b = MiniBatch::from_observations(d, 1);
        const double kd = static_cast<double>(k);
        REQUIRE(batch_loss(b, beta) == Catch::Approx(testsupport::pair_loss(d, beta, kd)).epsilon(1e-12).margin(1e-12));
        REQUIRE(batch_score(b, beta).isApprox(testsupport::pair_score(d, beta, kd), 1e-12));
        REQUIRE(full_loss(d, beta) == Catch::Approx(testsupport::pair_loss(d, beta, kd)).epsilon(1e-12).margin(1e-12));
        REQUIRE((full_score(d, beta) - testsupport::pair_score(d, beta, kd)).lpNorm<Eigen::Infinity>() < 1e-12);
        // k = N: the batch and full normalizations coincide.
        REQUIRE((full_score(d, beta) - batch_score(b, beta)).lpNorm<Eigen::Infinity>() < 1e-12);

        const auto w = g.weights(k);
        const Coefficients ws = perturbed_batch_score(b, beta, PerturbationWeights{w});
        REQUIRE((ws - testsupport::pair_score(d, beta, kd, w)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("score bound", "[model]") {
    Gen g(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = g.index(1, 5);
        const std::size_t k = g.index(2, 60);
        const Dataset d = g.dataset(k, p);
        double xmax = 0.0;
        for (const auto& o : d)
            for (double x : o.covariates) xmax = std::max(xmax, std::abs(x));
        const Coefficients s = batch_score(MiniBatch::from_observations(d, 1), g.vector(p));
        REQUIRE(s.lpNorm<Eigen::Infinity>() <= 2.0 * static_cast<double>(k - 1) * xmax + 1e-12);
    }
}

TEST_CASE("mini-batch container", "[model]") {
    MiniBatch b(4, 2);
    CHECK(b.index() == 4);
    CHECK(b.size() == 0);
    b.push_back(Observation{1.0, true, {1.0, 2.0}});
    b.push_back(0.5, false, std::vector<double>{3.0, 4.0});
    CHECK(b.size() == 2);
    CHECK(b.covariates(1)[1] == 4.0);
    CHECK_FALSE(b.event(1));
    CHECK(b.observation(0).covariates == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(b.push_back(Observation{1.0, true, {1.0}}), ConfigError);
    b.clear();
    CHECK(b.size() == 0);
    CHECK(b.dim() == 2);
}

#include <catch_amalgamated.hpp>

#include <cmath>

#include "aftsgd/error.hpp"
#include "aftsgd/simlab.hpp"

using namespace aftsgd;

namespace {

const ReComponents& shared_components() {
    static const ReComponents c = [] {
        SimSpec spec;
        spec.threads = 1;
        return estimate_re_components(spec, 100000);
    }();
    return c;
}

double hand_re(const ReComponents& c, std::size_t k, const Coefficients& a) {
    const Coefficients w = c.H.inverse() * a;
    const double q1 = w.dot(c.Q1 * w);
    const double q2 = w.dot(c.Q2 * w);
    const double kk = static_cast<double>(k);
    return 4.0 * (kk - 1) * (kk - 1) * q1 / (4.0 * (kk - 2) * (kk - 1) * q1 + 2.0 * (kk - 1) * q2);
}

} // namespace

TEST_CASE("component shapes", "[efficiency]") {
    const ReComponents& c = shared_components();
    CHECK(c.M == 100000);
    CHECK(c.inner == 317);
    CHECK(c.blocks == 20);
    CHECK(c.Q1_jack.size() == 20);
    CHECK(c.H.isApprox(c.H.transpose()));
    CHECK(c.Q2.isApprox(c.Q2.transpose()));
    Eigen::SelfAdjointEigenSolver<Matrix> eh(c.H);
    CHECK(eh.eigenvalues().minCoeff() > 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> e2(c.Q2);
    CHECK(e2.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("efficiency formula and its bounds", "[efficiency]") {
    const ReComponents& c = shared_components();
    Coefficients a(2);
    a << 1.0, 0.0;
    double prev = 0.0;
    for (std::size_t k : {2u, 5u, 10u, 50u, 200u, 5000u}) {
        const ReEstimate r = re_from_components(c, k, a);
        REQUIRE(r.value == Catch::Approx(hand_re(c, k, a)).epsilon(1e-12));
        REQUIRE(r.value <= 1.0 + 3.0 * r.mc_se);
        REQUIRE(r.mc_se > 0.0);
        REQUIRE(r.value > prev);
        prev = r.value;
    }
    CHECK(std::abs(1.0 - re_from_components(c, 200, a).value) <
          std::abs(1.0 - re_from_components(c, 10, a).value));
    CHECK(re_from_components(c, 5000, a).value > 0.99);
    // k = 2 reduces to 2 q1 / q2.
    const Coefficients w = c.H.inverse() * a;
    CHECK(re_from_components(c, 2, a).value ==
          Catch::Approx(2.0 * w.dot(c.Q1 * w) / w.dot(c.Q2 * w)).epsilon(1e-12));
}

TEST_CASE("efficiency is invariant to scaling of the contrast and the Jacobian", "[efficiency]") {
    ReComponents c = shared_components();
    Coefficients a(2);
    a << 0.6, -0.8;
    const double base = re_from_components(c, 50, a).value;
    CHECK(re_from_components(c, 50, 7.5 * a).value == Catch::Approx(base).epsilon(1e-12));
    c.H *= 3.0;
    for (auto& m : c.H_jack) m *= 3.0;
    CHECK(re_from_components(c, 50, a).value == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("eigenvalue check on Q2 - 2 Q1", "[efficiency]") {
    const EigenCheck e = q2_minus_2q1(shared_components());
    CHECK(e.mc_se > 0.0);
    CHECK(e.min_eigenvalue >= -3.0 * e.mc_se);
}

TEST_CASE("efficiency input validation", "[efficiency]") {
    SimSpec spec;
    CHECK_THROWS_AS(estimate_re_components(spec, 99999), ConfigError);
    CHECK_THROWS_AS(estimate_re_components(spec, 100000, 0.0), ConfigError);
    CHECK_THROWS_AS(estimate_re_components(spec, 100000, 0.01, 1), ConfigError);
    const ReComponents& c = shared_components();
    Coefficients a(2);
    a << 1.0, 1.0;
    CHECK_THROWS_AS(re_from_components(c, 1, a), ConfigError);
    CHECK_THROWS_AS(re_from_components(c, 10, Coefficients::Zero(2)), ConfigError);
    CHECK_THROWS_AS(re_from_components(c, 10, Coefficients::Ones(3)), ConfigError);
    ReComponents bad = c;
    bad.H = -bad.H;
    CHECK_THROWS_AS(re_from_components(bad, 10, a), EstimationError);
}

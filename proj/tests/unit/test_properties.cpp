#include <catch_amalgamated.hpp>

#include "support/invariants.hpp"

using namespace testsupport;

namespace {

void require_suite(const SuiteResult& r) {
    INFO(r.name << ": " << r.first_failure);
    CHECK(r.cases == 1000);
    CHECK(r.failures == 0);
}

} // namespace

TEST_CASE("convexity at midpoints", "[properties]") {
    require_suite(run_suite("convexity midpoint", convexity_midpoint, 1000, 101));
}

TEST_CASE("score is a subgradient", "[properties]") {
    require_suite(run_suite("subgradient inequality", subgradient_inequality, 1000, 102));
}

TEST_CASE("log-time shift invariance", "[properties]") {
    require_suite(run_suite("shift invariance", shift_invariance, 1000, 103));
}

TEST_CASE("unit weights collapse the bootstrap", "[properties]") {
    require_suite(run_suite("unit-weight collapse", unit_weight_collapse, 1000, 104));
}

TEST_CASE("average equals the iterate mean", "[properties]") {
    require_suite(run_suite("mean identity", mean_identity, 1000, 105));
}

TEST_CASE("resume from bytes equals an uninterrupted run", "[properties]") {
    require_suite(run_suite("checkpoint resume equivalence", resume_equivalence, 1000, 106));
}

TEST_CASE("a broken invariant is reported", "[properties]") {
    const SuiteResult r = run_suite("always fails", [](Gen&) { return std::string("nope"); }, 5, 1);
    CHECK(r.failures == 5);
    CHECK_FALSE(r.ok());
    CHECK(r.first_failure == "case 0: nope");
}

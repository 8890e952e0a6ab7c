#include <catch_amalgamated.hpp>

#include <json.hpp>
#include <sstream>
#include <string>

#include "aftsgd/error.hpp"
#include "aftsgd/report.hpp"
#include "support/brute_force.hpp"

using namespace aftsgd;
using testsupport::Gen;

namespace {

BootstrapEnsemble trained(std::size_t B) {
    Gen g(77);
    BootstrapEnsemble e = make_ensemble(3, B, LearningRateSchedule::for_batch_size(10), 9);
    for (std::uint64_t i = 1; i <= 80; ++i) ensemble_step(e, MiniBatch::from_observations(g.dataset(10, 3), i));
    return e;
}

std::size_t lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("json report round trips", "[report]") {
    const BootstrapEnsemble e = trained(25);
    RunConfig c;
    c.k = 10;
    c.B = 25;
    const Report r = make_report(e, c, {"age", "grade", "size"}, {800, 3, 7}, true);
    REQUIRE(r.intervals.size() == 2);
    std::ostringstream out;
    emit_report(r, OutputFormat::json, out);
    const auto j = nlohmann::json::parse(out.str());
    REQUIRE(j["coefficients"].size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& cj = j["coefficients"][i];
        const auto I = static_cast<Eigen::Index>(i);
        CHECK(cj["name"] == r.names[i]);
        CHECK(std::abs(cj["estimate"].get<double>() - r.estimate[I]) <= 1e-12);
        CHECK(std::abs(cj["bootstrap_se"].get<double>() - (*r.bootstrap_se)[I]) <= 1e-12);
        CHECK(std::abs(cj["intervals"]["normal"]["lower"].get<double>() - r.intervals[0].lower[I]) <= 1e-12);
        CHECK(std::abs(cj["intervals"]["percentile"]["upper"].get<double>() - r.intervals[1].upper[I]) <= 1e-12);
    }
    CHECK(j["replicates"] == 25);
    CHECK(j["batches_consumed"] == 80);
    CHECK(j["records_read"] == 800);
    CHECK(j["records_skipped"] == 3);
    CHECK(j["records_dropped"] == 7);
    CHECK(j["level"] == 0.95);
}

TEST_CASE("csv and table layouts", "[report]") {
    const BootstrapEnsemble e = trained(10);
    RunConfig c;
    c.k = 10;
    c.B = 10;
    const Report r = make_report(e, c, {"a", "b", "c"}, {});
    std::ostringstream csv;
    emit_report(r, OutputFormat::csv, csv);
    std::istringstream rows(csv.str());
    std::string row;
    std::getline(rows, row);
    CHECK(row == "name,estimate,lower,upper");
    std::size_t n = 0;
    while (std::getline(rows, row)) {
        CHECK(field_count(row) == 4);
        ++n;
    }
    CHECK(n == 3);

    std::ostringstream table;
    emit_report(r, OutputFormat::table, table);
    const std::string t = table.str();
    for (const char* name : {"a ", "b ", "c "}) CHECK(t.find(std::string("\n") + name) != std::string::npos);
    // header, three rows, footer
    CHECK(lines(t) == 5);
}

TEST_CASE("reports without intervals", "[report]") {
    RunConfig c;
    c.k = 10;
    c.B = 0;
    const Report r = make_report(trained(0), c, {"a", "b", "c"}, {});
    CHECK(r.intervals.empty());
    CHECK_FALSE(r.bootstrap_se.has_value());
    std::ostringstream csv;
    emit_report(r, OutputFormat::csv, csv);
    CHECK(csv.str().find(",\n") != std::string::npos);

    // Percentile needs 20 replicates; with 10 only the normal interval appears.
    c.B = 10;
    const Report two = make_report(trained(10), c, {"a", "b", "c"}, {}, true);
    CHECK(two.intervals.size() == 1);

    CHECK_THROWS_AS(make_report(make_ensemble(3, 0, LearningRateSchedule{}, 1), c, {"a", "b", "c"}, {}),
                    NoDataError);
}

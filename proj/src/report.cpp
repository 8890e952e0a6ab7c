#include "aftsgd/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "aftsgd/error.hpp"

namespace aftsgd {

namespace {

CiMethod other(CiMethod m) { return m == CiMethod::normal ? CiMethod::percentile : CiMethod::normal; }

std::size_t min_replicates(CiMethod m) { return m == CiMethod::percentile ? 20 : 2; }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void emit_json(const Report& r, std::ostream& out) {
    using nlohmann::json;
    json coefs = json::array();
    for (std::size_t j = 0; j < r.names.size(); ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        json c = {{"name", r.names[j]}, {"estimate", r.estimate[J]}};
        if (r.bootstrap_se) c["bootstrap_se"] = (*r.bootstrap_se)[J];
        json iv = json::object();
        for (const auto& ci : r.intervals) {
            iv[std::string(to_string(ci.method))] = {{"lower", ci.lower[J]}, {"upper", ci.upper[J]}};
        }
        c["intervals"] = iv;
        coefs.push_back(std::move(c));
    }
    json doc = {
        {"coefficients", coefs},
        {"level", r.level},
        {"ci_method", std::string(to_string(r.method))},
        {"replicates", r.B},
        {"batches_consumed", r.batches_consumed},
        {"records_read", r.counters.records_read},
        {"records_skipped", r.counters.records_skipped},
        {"records_dropped", r.counters.records_dropped},
    };
    out << doc.dump(2) << '\n';
}

void emit_csv(const Report& r, std::ostream& out) {
    out << "name,estimate,lower,upper\n";
    const IntervalEstimate* ci = r.intervals.empty() ? nullptr : &r.intervals.front();
    for (std::size_t j = 0; j < r.names.size(); ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        out << csv_field(r.names[j]) << ',' << fmt::format("{}", r.estimate[J]) << ',';
        if (ci) out << fmt::format("{},{}", ci->lower[J], ci->upper[J]);
        else out << ',';
        out << '\n';
    }
}

void emit_table(const Report& r, std::ostream& out) {
    std::size_t width = std::string_view("covariate").size();
    for (const auto& n : r.names) width = std::max(width, n.size());
    const IntervalEstimate* ci = r.intervals.empty() ? nullptr : &r.intervals.front();
    const std::string head =
        ci ? fmt::format("estimate ({:g}% CI, {})", 100.0 * r.level, to_string(r.method)) : "estimate";
    out << fmt::format("{:<{}}  {}", "covariate", width, head);
    if (r.bootstrap_se) out << "  bootstrap SE";
    out << '\n';
    for (std::size_t j = 0; j < r.names.size(); ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        std::string cell = fmt::format("{:>8.4f}", r.estimate[J]);
        if (ci) cell += fmt::format(" ({:.4f}, {:.4f})", ci->lower[J], ci->upper[J]);
        out << fmt::format("{:<{}}  {:<{}}", r.names[j], width, cell, head.size());
        if (r.bootstrap_se) out << fmt::format("  {:.4f}", (*r.bootstrap_se)[J]);
        out << '\n';
    }
    for (std::size_t i = 1; i < r.intervals.size(); ++i) {
        out << fmt::format("{} intervals:\n", to_string(r.intervals[i].method));
        for (std::size_t j = 0; j < r.names.size(); ++j) {
            const auto J = static_cast<Eigen::Index>(j);
            out << fmt::format("{:<{}}  ({:.4f}, {:.4f})\n", r.names[j], width, r.intervals[i].lower[J],
                               r.intervals[i].upper[J]);
        }
    }
    out << fmt::format("batches consumed: {}  records read: {}  skipped: {}  dropped: {}  replicates: {}\n",
                       r.batches_consumed, r.counters.records_read, r.counters.records_skipped,
                       r.counters.records_dropped, r.B);
}

} // namespace

Report make_report(const BootstrapEnsemble& ensemble, const RunConfig& config,
                   const std::vector<std::string>& names, const StreamCounters& counters,
                   bool both_methods) {
    Report r;
    r.estimate = finalize(ensemble.main);
    r.names = names;
    if (r.names.size() != static_cast<std::size_t>(r.estimate.size())) {
        r.names = default_column_names(static_cast<std::size_t>(r.estimate.size()));
    }
    r.B = ensemble.B();
    r.level = config.ci_level;
    r.method = config.ci_method;
    r.batches_consumed = ensemble.batch_count();
    r.counters = counters;
    if (r.B >= 2) {
        r.bootstrap_se = covariance(ensemble).diagonal().cwiseSqrt().eval();
    }
    std::vector<CiMethod> methods{config.ci_method};
    if (both_methods) methods.push_back(other(config.ci_method));
    for (CiMethod m : methods) {
        if (r.B >= min_replicates(m)) r.intervals.push_back(confidence_intervals(ensemble, config.ci_level, m));
    }
    return r;
}

void emit_report(const Report& report, OutputFormat format, std::ostream& out) {
    switch (format) {
    case OutputFormat::json: emit_json(report, out); return;
    case OutputFormat::csv: emit_csv(report, out); return;
    case OutputFormat::table: emit_table(report, out); return;
    }
}

} // namespace aftsgd

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aftsgd/io.hpp"
#include "aftsgd/resampler.hpp"

namespace aftsgd {

struct StreamCounters {
    std::uint64_t records_read = 0;
    std::uint64_t records_skipped = 0;
    std::uint64_t records_dropped = 0;
};

struct Report {
    std::vector<std::string> names;
    Coefficients estimate;
    std::size_t B = 0;
    double level = 0.95;
    CiMethod method = CiMethod::normal;
    /// Present when B >= 2.
    std::optional<Coefficients> bootstrap_se;
    /// Interval for `method`, then the other method when both were requested.
    std::vector<IntervalEstimate> intervals;
    std::uint64_t batches_consumed = 0;
    StreamCounters counters;
};

/// Throws NoDataError before the first batch. Intervals are omitted when the
/// ensemble has too few replicates for them.
Report make_report(const BootstrapEnsemble& ensemble, const RunConfig& config,
                   const std::vector<std::string>& names, const StreamCounters& counters,
                   bool both_methods = false);

/// json: one object; csv: `name,estimate,lower,upper`; table: one aligned row
/// per coefficient, `estimate (lower, upper)`.
void emit_report(const Report& report, OutputFormat format, std::ostream& out);

} // namespace aftsgd

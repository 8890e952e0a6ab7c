#include "aftsgd/io.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "aftsgd/error.hpp"

namespace aftsgd {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view field, double& out) {
    field = trim(field);
    if (field.empty()) return false;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Calls fn(field_index, field) for each comma-separated field.
template <typename Fn>
void for_each_field(std::string_view line, Fn&& fn) {
    std::size_t index = 0;
    while (true) {
        const auto comma = line.find(',');
        fn(index++, line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
}

bool blank(std::string_view line) { return trim(line).empty(); }

} // namespace

std::string_view to_string(OutputFormat format) {
    switch (format) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::table: return "table";
    }
    return "?";
}

OutputFormat parse_output_format(std::string_view name) {
    if (name == "json") return OutputFormat::json;
    if (name == "csv") return OutputFormat::csv;
    if (name == "table") return OutputFormat::table;
    throw ConfigError("unknown output format '" + std::string(name) + "'");
}

void RunConfig::validate() const {
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    if (B > 0 && B < 2) throw ConfigError("intervals need B >= 2 replicates (or B = 0)");
    if (ci_method == CiMethod::percentile && B > 0 && B < 20) {
        throw ConfigError("percentile intervals need B >= 20");
    }
    if (input.empty()) throw ConfigError("input path is empty");
    (void)schedule();
}

LearningRateSchedule RunConfig::schedule() const {
    return gamma1 ? LearningRateSchedule(*gamma1, alpha) : LearningRateSchedule::for_batch_size(k, alpha);
}

std::size_t field_count(std::string_view line) {
    std::size_t n = 0;
    for_each_field(trim(line), [&](std::size_t, std::string_view) { ++n; });
    return n;
}

Observation parse_record(std::string_view line, std::size_t p, std::size_t line_no) {
    line = trim(line);
    const std::size_t fields = field_count(line);
    if (fields != p + 2) {
        throw RecordError(line_no, "expected " + std::to_string(p + 2) + " fields, found " +
                                       std::to_string(fields));
    }
    Observation obs;
    obs.covariates.resize(p);
    for_each_field(line, [&](std::size_t i, std::string_view field) {
        double v = 0.0;
        if (!parse_double(field, v)) {
            throw RecordError(line_no, "field " + std::to_string(i + 1) + " is not a finite number");
        }
        if (i == 0) {
            if (!(v > 0.0)) throw RecordError(line_no, "time must be positive");
            obs.log_time = std::log(v);
        } else if (i == 1) {
            if (v != 0.0 && v != 1.0) throw RecordError(line_no, "delta must be 0 or 1");
            obs.event = v == 1.0;
        } else {
            obs.covariates[i - 2] = v;
        }
    });
    return obs;
}

std::vector<std::string> default_column_names(std::size_t p) {
    std::vector<std::string> names;
    for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

BatchReader::BatchReader(std::istream& in, std::size_t k, ReaderOptions options)
    : in_(&in),
      k_(k),
      skip_bad_(options.skip_bad),
      header_pending_(options.header),
      next_index_(options.first_batch_index),
      carried_(std::move(options.carried)) {
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    if (options.first_batch_index == 0) throw ConfigError("batch indices start at 1");
    if (options.dim) set_dim(*options.dim);
    else if (!carried_.empty()) set_dim(carried_.front().covariates.size());
}

void BatchReader::set_dim(std::size_t p) {
    if (p == 0) throw ConfigError("records need at least one covariate");
    dim_ = p;
    pending_ = MiniBatch(next_index_, p);
    pending_.reserve(k_);
    if (names_.empty()) names_ = default_column_names(p);
}

bool BatchReader::read_record(Observation& obs) {
    if (carried_pos_ < carried_.size()) {
        obs = carried_[carried_pos_++];
        if (obs.covariates.size() != dim_) throw ConfigError("carried record has the wrong dimension");
        if (carried_pos_ == carried_.size()) carried_ = {};
        return true;
    }
    while (std::getline(*in_, line_)) {
        ++line_no_;
        if (blank(line_)) continue;
        if (header_pending_) {
            header_pending_ = false;
            const std::size_t fields = field_count(line_);
            if (fields < 3) throw RecordError(line_no_, "header needs time, delta and a covariate");
            if (dim_ != 0 && fields != dim_ + 2) {
                throw RecordError(line_no_, "header does not match the covariate dimension");
            }
            std::vector<std::string> names;
            for_each_field(trim(line_), [&](std::size_t i, std::string_view f) {
                if (i >= 2) names.emplace_back(trim(f));
            });
            names_ = std::move(names);
            if (dim_ == 0) set_dim(fields - 2);
            continue;
        }
        if (dim_ == 0) {
            const std::size_t fields = field_count(line_);
            if (fields < 3) throw RecordError(line_no_, "record needs time, delta and a covariate");
            set_dim(fields - 2);
        }
        try {
            obs = parse_record(line_, dim_, line_no_);
        } catch (const RecordError& e) {
            if (!skip_bad_) throw;
            ++records_skipped_;
            spdlog::debug("skipping record: {}", e.what());
            continue;
        }
        ++records_read_;
        return true;
    }
    return false;
}

std::optional<MiniBatch> BatchReader::next() {
    if (exhausted_) return std::nullopt;
    while (read_record(scratch_)) {
        pending_.push_back(scratch_);
        if (pending_.size() == k_) {
            MiniBatch out = pending_;
            pending_.clear();
            pending_.set_index(++next_index_);
            ++batches_emitted_;
            return out;
        }
    }
    exhausted_ = true;
    if (pending_.size() > 0 && !warned_) {
        warned_ = true;
        spdlog::warn("dropping {} trailing record(s) that do not fill a batch of {}", pending_.size(), k_);
    }
    return std::nullopt;
}

std::vector<Observation> BatchReader::pending() const {
    std::vector<Observation> out;
    out.reserve(pending_.size());
    for (std::size_t l = 0; l < pending_.size(); ++l) out.push_back(pending_.observation(l));
    return out;
}

} // namespace aftsgd

#pragma once

// Streaming ingestion of `time,delta,x1,...,xp` records.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aftsgd/model.hpp"
#include "aftsgd/resampler.hpp"
#include "aftsgd/sgd.hpp"

namespace aftsgd {

enum class OutputFormat : std::uint8_t { json = 0, csv = 1, table = 2 };

std::string_view to_string(OutputFormat format);
OutputFormat parse_output_format(std::string_view name);

struct RunConfig {
    std::size_t k = 50;
    std::size_t B = 200;
    double ci_level = 0.95;
    CiMethod ci_method = CiMethod::normal;
    /// Unset means LearningRateSchedule::for_batch_size(k, alpha).
    std::optional<double> gamma1;
    double alpha = LearningRateSchedule::kDefaultAlpha;
    std::uint64_t seed = 1;
    WeightLaw weight_law = WeightLaw::exponential;
    std::string input = "-";  ///< path, or "-" for standard input
    std::optional<std::string> checkpoint_path;
    OutputFormat output_format = OutputFormat::table;
    bool header = false;
    bool skip_bad = false;

    /// Throws ConfigError. Called before any data is read.
    void validate() const;
    LearningRateSchedule schedule() const;
};

/// Parses one record. Numbers go through std::from_chars, so parsing ignores
/// the process locale. Throws RecordError tagged with `line_no`.
Observation parse_record(std::string_view line, std::size_t p, std::size_t line_no = 0);

/// Number of comma-separated fields in a line.
std::size_t field_count(std::string_view line);

struct ReaderOptions {
    bool header = false;
    bool skip_bad = false;
    /// Covariate dimension; inferred from the first record when absent.
    std::optional<std::size_t> dim;
    /// Index given to the first batch produced (resumed runs continue counting).
    std::uint64_t first_batch_index = 1;
    /// Records carried over from a previous run, placed before the input.
    std::vector<Observation> carried;
};

/// Groups the records of a stream into consecutive, non-overlapping batches of
/// k in arrival order. Holds at most one batch of records at a time.
class BatchReader {
public:
    BatchReader(std::istream& in, std::size_t k, ReaderOptions options = {});

    /// Next complete batch, or nullopt at end of input. A trailing remainder
    /// stays in pending() and is counted by dropped().
    std::optional<MiniBatch> next();

    /// Covariate dimension, 0 until known.
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& column_names() const noexcept { return names_; }

    std::uint64_t records_read() const noexcept { return records_read_; }
    std::uint64_t records_skipped() const noexcept { return records_skipped_; }
    std::uint64_t batches_emitted() const noexcept { return batches_emitted_; }
    /// Records of the incomplete trailing batch once the input is exhausted.
    std::size_t dropped() const noexcept { return exhausted_ ? pending_.size() : 0; }
    /// Records read but not yet part of an emitted batch.
    std::vector<Observation> pending() const;

private:
    bool read_record(Observation& obs);
    void set_dim(std::size_t p);

    std::istream* in_;
    std::size_t k_;
    bool skip_bad_;
    bool header_pending_;
    std::size_t dim_ = 0;
    std::uint64_t next_index_;
    std::size_t line_no_ = 0;
    std::uint64_t records_read_ = 0;
    std::uint64_t records_skipped_ = 0;
    std::uint64_t batches_emitted_ = 0;
    bool exhausted_ = false;
    bool warned_ = false;
    std::vector<std::string> names_;
    std::vector<Observation> carried_;
    std::size_t carried_pos_ = 0;
    MiniBatch pending_;
    std::string line_;
    Observation scratch_;
};

/// Default covariate names x1..xp.
std::vector<std::string> default_column_names(std::size_t p);

} // namespace aftsgd

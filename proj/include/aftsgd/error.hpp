#pragma once

#include <stdexcept>
#include <string>

namespace aftsgd {

// Every failure the library reports derives from Error so callers (the CLI in
// particular) can map categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: dimensions, schedule parameters, batch size, etc.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid data values handed to an operation.
class InputError : public Error {
public:
    using Error::Error;
};

/// A malformed input record; carries the 1-based line number.
class RecordError : public InputError {
public:
    RecordError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Batches consumed out of order or trajectories out of lockstep.
class SequencingError : public Error {
public:
    using Error::Error;
};

/// A result was requested before any data was consumed.
class NoDataError : public Error {
public:
    using Error::Error;
};

/// The batch objective is identically zero (e.g. every observation censored).
class DegenerateProblemError : public Error {
public:
    using Error::Error;
};

/// Fewer bootstrap replicates than the requested summary needs.
class InsufficientReplicatesError : public Error {
public:
    using Error::Error;
};

/// Checkpoint could not be read, failed its checksum, or is incompatible.
class CheckpointError : public Error {
public:
    using Error::Error;
};

/// A Monte-Carlo estimate came out numerically unusable.
class EstimationError : public Error {
public:
    using Error::Error;
};

} // namespace aftsgd

#pragma once

// Resumable run state. The file is a versioned binary envelope
//   "AFTSGDCK" | u32 version | u64 payload length | payload | u32 crc32(payload)
// with every double stored by its bit pattern, so a restored run continues
// exactly where the saved one stopped.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aftsgd/io.hpp"
#include "aftsgd/resampler.hpp"

namespace aftsgd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    RunConfig config;
    BootstrapEnsemble ensemble;
    std::uint64_t batches_consumed = 0;
    std::uint64_t records_read = 0;
    std::uint64_t records_skipped = 0;
    /// Records of an incomplete batch; a resumed stream completes them.
    std::vector<Observation> pending;
    std::vector<std::string> column_names;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws CheckpointError on a bad magic, version, checksum or truncation.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written checkpoint behind.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rejects resuming under settings that would change the trajectory
/// (k, B, seed, schedule, weight law). Reporting settings may differ.
void check_resume_compatible(const Checkpoint& checkpoint, const RunConfig& config);

} // namespace aftsgd

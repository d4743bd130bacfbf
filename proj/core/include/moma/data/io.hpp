#pragma once

#include <stdexcept>
#include <string>

#include "moma/data/dataset.hpp"

namespace moma::data {

struct DatasetIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest exact decimal text for a double (%.17g round-trips).
std::string format_double(double v);

/// Layout: line 1 is a JSON header (schema_version, env id/mode, dims, seed,
/// counts, score normalizers, stats checksum, per-trajectory policy tags);
/// then one text record per step
///   traj step state... obs_1... obs_N actions... reward done
/// where each trajectory contributes T+1 records (the final one carries the
/// terminal state with a zero-padded action/reward and the done flag); the
/// file ends with a "records <count>" line.
void save(const OfflineDataset& d, const std::string& path);

/// Validates schema version, field arities, record count and the stats
/// checksum; errors cite the offending line number.
OfflineDataset load(const std::string& path);

/// Checksum of the exact dataset statistics, stored in the header so a load
/// can detect silent corruption of record payloads.
std::string stats_checksum(const DatasetStats& s);

}  // namespace moma::data

#pragma once

#include <stdexcept>
#include <string>

#include "moma/wm/ensemble.hpp"

namespace moma::wm {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Layout: line 1 is a JSON header (environment id, dims, architecture,
/// member/elite bookkeeping, uncertainty cap, dataset-stats snapshot); then
/// one text line per parameter block
///   param <member> <block-name> <count> <values...>
/// with every value printed exactly (%.17g), closed by an "end" line.
void save_ensemble(const WorldModelEnsemble& e, const std::string& path);

/// Rebuilds the members from the header architecture and fills every block
/// by name; the environment id must be known to the registry. Errors cite
/// the offending line number. Round trips are lossless.
WorldModelEnsemble load_ensemble(const std::string& path);

}  // namespace moma::wm

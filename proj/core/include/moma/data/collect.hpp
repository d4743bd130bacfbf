#pragma once

#include <vector>

#include "moma/data/dataset.hpp"
#include "moma/envs/scripted.hpp"

namespace moma::data {

/// Rolls out n_episodes full episodes. Episode e is driven by
/// policies[e % policies.size()], so passing both conventions interleaves a
/// mixture 50/50. `seed` is recorded in the metadata and also seeds the
/// collection stream.
OfflineDataset collect(const envs::Env& env,
                       const std::vector<const envs::ScriptedPolicy*>& policies,
                       int n_episodes, std::uint64_t seed);

/// Mean episode score of a scripted policy (used for score normalizers).
double mean_score(const envs::Env& env, const envs::ScriptedPolicy& policy,
                  int n_episodes, Rng& rng);

}  // namespace moma::data

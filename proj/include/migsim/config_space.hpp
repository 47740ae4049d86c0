#pragma once

// Exhaustive analysis of the single-GPU configuration space.
//
// A configuration is a set of non-overlapping (profile, start) placements on
// one GPU; GI identities are ignored. There are only 18 legal placements, so
// a configuration is identified by an 18-bit mask over the placement table.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "migsim/mig_core.hpp"

namespace migsim {

struct Placement {
  ProfileId profile;
  int start;

  friend bool operator==(const Placement&, const Placement&) = default;
  friend auto operator<=>(const Placement&, const Placement&) = default;
};

using ConfigKey = std::uint32_t;
using ProfileCounts = std::array<int, kProfileCount>;

// All legal (profile, start) pairs in profile-then-start order.
const std::vector<Placement>& placement_table();

ConfigKey config_key(const std::vector<Placement>& placements);

struct ConfigRecord {
  ConfigKey key = 0;
  std::vector<Placement> placements;  // sorted by (profile, start)
  BlockSet free_blocks = BlockSet::all();
  ProfileCounts gi_counts{};          // GI multiset as per-profile counts
  int cc = 0;
  ProfileCounts capacity{};
  bool terminal = false;              // no placement fits any more
};

ConfigRecord make_record(const std::vector<Placement>& placements);

class ConfigSpace {
 public:
  explicit ConfigSpace(std::vector<ConfigRecord> configs);

  const std::vector<ConfigRecord>& configs() const { return configs_; }
  std::size_t size() const { return configs_.size(); }
  int terminal_count() const { return terminal_count_; }

  // nullptr when the key is not part of the universe.
  const ConfigRecord* find(ConfigKey key) const;
  // Highest CC among configurations with the same GI multiset.
  int best_cc(const ProfileCounts& gi_counts) const;

 private:
  std::vector<ConfigRecord> configs_;  // ascending key
  std::vector<std::int32_t> index_;    // key -> position, -1 if absent
  std::vector<std::pair<ProfileCounts, int>> best_cc_;
  int terminal_count_ = 0;
};

/// DFS from the empty GPU adding one GI at a time at any legal position.
ConfigSpace enumerate_all();

/// True iff no configuration with the same GI multiset has strictly higher
/// CC. Throws std::invalid_argument if `config` is not in `universe`.
bool is_optimal(const ConfigRecord& config, const ConfigSpace& universe);

std::size_t count_suboptimal(const std::vector<ConfigRecord>& configs, const ConfigSpace& universe);

/// Configurations reachable from the empty GPU when every arrival is placed
/// by the default max-CC rule (no departures). Sorted by key.
std::vector<ConfigRecord> reachable_by_default_policy();

struct DominanceStats {
  // Configs A for which some B with the same GI multiset has CC(B) <= CC(A)
  // and strictly larger capacity for at least one profile.
  std::size_t single_gpu_improvable = 0;
  // Unordered pairs of configurations (two GPUs), repetitions allowed.
  std::size_t pair_count = 0;
  // Pairs for which another pair holding the same combined GI multiset has
  // total CC <= the original and strictly larger combined capacity for some
  // profile.
  std::size_t pair_improvable = 0;
};

DominanceStats dominance_stats(const ConfigSpace& universe);

struct CountCheck {
  std::string name;
  std::size_t computed;
  std::size_t expected;
  bool matches() const { return computed == expected; }
};

/// Headline counts of the single- and two-GPU configuration spaces next to
/// their published values.
std::vector<CountCheck> configspace_counts();

// Block string plus placement list, e.g. "AA....B.  1g.5gb@6 1g.10gb@0".
std::string describe(const ConfigRecord& config);

}  // namespace migsim

#include "migsim/config_space.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace migsim {
namespace {

constexpr std::size_t kKeySpace = std::size_t{1} << 18;

std::vector<Placement> build_table() {
  std::vector<Placement> table;
  for (ProfileId p : kAllProfiles)
    for (int start : spec(p).start_blocks) table.push_back({p, start});
  return table;
}

int table_index(const Placement& pl) {
  const auto& table = placement_table();
  auto it = std::find(table.begin(), table.end(), pl);
  if (it == table.end())
    throw std::invalid_argument("illegal placement " + std::string(name(pl.profile)) + "@" +
                                std::to_string(pl.start));
  return static_cast<int>(it - table.begin());
}

std::vector<Placement> placements_of(ConfigKey key) {
  std::vector<Placement> out;
  const auto& table = placement_table();
  for (std::size_t i = 0; i < table.size(); ++i)
    if (key & (ConfigKey{1} << i)) out.push_back(table[i]);
  return out;
}

BlockSet free_of(ConfigKey key) {
  BlockSet used;
  const auto& table = placement_table();
  for (std::size_t i = 0; i < table.size(); ++i)
    if (key & (ConfigKey{1} << i)) used = used.with(extent(table[i].profile, table[i].start));
  return used.complement();
}

void dfs(ConfigKey key, std::vector<bool>& seen, std::vector<ConfigKey>& order) {
  if (seen[key]) return;
  seen[key] = true;
  order.push_back(key);
  const BlockSet free_blocks = free_of(key);
  const auto& table = placement_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (free_blocks.contains_all(extent(table[i].profile, table[i].start)))
      dfs(key | (ConfigKey{1} << i), seen, order);
  }
}

bool any_larger(const ProfileCounts& a, const ProfileCounts& b) {
  for (int p = 0; p < kProfileCount; ++p)
    if (a[p] > b[p]) return true;
  return false;
}

std::uint32_t counts_code(const ProfileCounts& c) {
  // Two GPUs hold at most 14 GIs of one profile, so 4 bits per profile suffice.
  std::uint32_t code = 0;
  for (int p = kProfileCount - 1; p >= 0; --p) code = (code << 4) | static_cast<std::uint32_t>(c[p]);
  return code;
}

struct PairEntry {
  int cc;
  ProfileCounts capacity;
};

// Counts entries for which some entry with cc <= its own has a strictly
// larger capacity for some profile: sweep by ascending cc, keeping running
// per-profile maxima over everything at or below the current cc.
std::size_t count_improvable(std::vector<PairEntry>& group) {
  std::sort(group.begin(), group.end(), [](const PairEntry& a, const PairEntry& b) { return a.cc < b.cc; });
  ProfileCounts running{};
  running.fill(-1);
  std::size_t improvable = 0;
  std::size_t i = 0;
  while (i < group.size()) {
    std::size_t j = i;
    while (j < group.size() && group[j].cc == group[i].cc) {
      for (int p = 0; p < kProfileCount; ++p) running[p] = std::max(running[p], group[j].capacity[p]);
      ++j;
    }
    for (std::size_t k = i; k < j; ++k)
      if (any_larger(running, group[k].capacity)) ++improvable;
    i = j;
  }
  return improvable;
}

}  // namespace

const std::vector<Placement>& placement_table() {
  static const std::vector<Placement> table = build_table();
  return table;
}

ConfigKey config_key(const std::vector<Placement>& placements) {
  ConfigKey key = 0;
  for (const auto& pl : placements) key |= ConfigKey{1} << table_index(pl);
  return key;
}

ConfigRecord make_record(const std::vector<Placement>& placements) {
  ConfigRecord r;
  BlockSet used;
  for (const auto& pl : placements) {
    const BlockSet e = extent(pl.profile, pl.start);
    if (!is_legal_start(pl.profile, pl.start) || used.intersects(e))
      throw std::invalid_argument("placements overlap or are illegal");
    used = used.with(e);
  }
  r.key = config_key(placements);
  r.placements = placements_of(r.key);
  r.free_blocks = used.complement();
  for (const auto& pl : r.placements) ++r.gi_counts[index_of(pl.profile)];
  r.cc = get_cc(r.free_blocks);
  for (ProfileId p : kAllProfiles) r.capacity[index_of(p)] = capacity(r.free_blocks, p);
  r.terminal = r.cc == 0;
  return r;
}

ConfigSpace::ConfigSpace(std::vector<ConfigRecord> configs)
    : configs_(std::move(configs)), index_(kKeySpace, -1) {
  std::sort(configs_.begin(), configs_.end(),
            [](const ConfigRecord& a, const ConfigRecord& b) { return a.key < b.key; });
  std::map<ProfileCounts, int> best;
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    const auto& c = configs_[i];
    index_[c.key] = static_cast<std::int32_t>(i);
    if (c.terminal) ++terminal_count_;
    auto [it, inserted] = best.emplace(c.gi_counts, c.cc);
    if (!inserted) it->second = std::max(it->second, c.cc);
  }
  best_cc_.assign(best.begin(), best.end());
}

const ConfigRecord* ConfigSpace::find(ConfigKey key) const {
  if (key >= index_.size() || index_[key] < 0) return nullptr;
  return &configs_[static_cast<std::size_t>(index_[key])];
}

int ConfigSpace::best_cc(const ProfileCounts& gi_counts) const {
  auto it = std::lower_bound(best_cc_.begin(), best_cc_.end(), gi_counts,
                             [](const auto& entry, const ProfileCounts& c) { return entry.first < c; });
  if (it == best_cc_.end() || it->first != gi_counts)
    throw std::invalid_argument("GI multiset not present in the configuration space");
  return it->second;
}

ConfigSpace enumerate_all() {
  std::vector<bool> seen(kKeySpace, false);
  std::vector<ConfigKey> order;
  dfs(0, seen, order);
  std::vector<ConfigRecord> records;
  records.reserve(order.size());
  for (ConfigKey key : order) records.push_back(make_record(placements_of(key)));
  return ConfigSpace(std::move(records));
}

bool is_optimal(const ConfigRecord& config, const ConfigSpace& universe) {
  if (universe.find(config.key) == nullptr)
    throw std::invalid_argument("configuration is not part of the universe");
  return config.cc >= universe.best_cc(config.gi_counts);
}

std::size_t count_suboptimal(const std::vector<ConfigRecord>& configs, const ConfigSpace& universe) {
  return static_cast<std::size_t>(std::count_if(
      configs.begin(), configs.end(), [&](const ConfigRecord& c) { return !is_optimal(c, universe); }));
}

std::vector<ConfigRecord> reachable_by_default_policy() {
  std::vector<bool> seen(kKeySpace, false);
  std::vector<ConfigKey> stack{0};
  std::vector<ConfigRecord> out;
  while (!stack.empty()) {
    const ConfigKey key = stack.back();
    stack.pop_back();
    if (seen[key]) continue;
    seen[key] = true;
    out.push_back(make_record(placements_of(key)));
    const BlockSet free_blocks = free_of(key);
    for (ProfileId p : kAllProfiles) {
      if (auto start = best_start(p, free_blocks))
        stack.push_back(key | (ConfigKey{1} << table_index({p, *start})));
    }
  }
  std::sort(out.begin(), out.end(), [](const ConfigRecord& a, const ConfigRecord& b) { return a.key < b.key; });
  return out;
}

DominanceStats dominance_stats(const ConfigSpace& universe) {
  DominanceStats stats;
  const auto& configs = universe.configs();

  std::map<ProfileCounts, std::vector<const ConfigRecord*>> by_multiset;
  for (const auto& c : configs) by_multiset[c.gi_counts].push_back(&c);
  for (const auto& [counts, group] : by_multiset) {
    for (const ConfigRecord* a : group) {
      const bool improvable = std::any_of(group.begin(), group.end(), [&](const ConfigRecord* b) {
        return b->cc <= a->cc && any_larger(b->capacity, a->capacity);
      });
      if (improvable) ++stats.single_gpu_improvable;
    }
  }

  std::unordered_map<std::uint32_t, std::vector<PairEntry>> pairs;
  for (std::size_t a = 0; a < configs.size(); ++a) {
    for (std::size_t b = a; b < configs.size(); ++b) {
      ProfileCounts combined{};
      PairEntry entry{configs[a].cc + configs[b].cc, {}};
      for (int p = 0; p < kProfileCount; ++p) {
        combined[p] = configs[a].gi_counts[p] + configs[b].gi_counts[p];
        entry.capacity[p] = configs[a].capacity[p] + configs[b].capacity[p];
      }
      pairs[counts_code(combined)].push_back(entry);
      ++stats.pair_count;
    }
  }
  for (auto& [code, group] : pairs) stats.pair_improvable += count_improvable(group);
  return stats;
}

std::string describe(const ConfigRecord& config) {
  GpuState gpu;
  GiId id = 0;
  for (const auto& pl : config.placements) gpu.place_at(id++, pl.profile, pl.start);
  std::string out = render(gpu);
  if (!config.placements.empty()) out += " ";
  for (const auto& pl : config.placements) {
    out += " ";
    out += name(pl.profile);
    out += "@" + std::to_string(pl.start);
  }
  return out;
}

std::vector<CountCheck> configspace_counts() {
  const ConfigSpace universe = enumerate_all();
  const auto reachable = reachable_by_default_policy();
  const DominanceStats dom = dominance_stats(universe);
  return {
      {"terminal", static_cast<std::size_t>(universe.terminal_count()), 78},
      {"unique", universe.size(), 723},
      {"suboptimal", count_suboptimal(universe.configs(), universe), 482},
      {"reachable", reachable.size(), 248},
      {"reachable_suboptimal", count_suboptimal(reachable, universe), 172},
      {"single_gpu_improvable", dom.single_gpu_improvable, 138},
      {"two_gpu_pairs", dom.pair_count, 261726},
      {"two_gpu_improvable", dom.pair_improvable, 205575},
  };
}

}  // namespace migsim

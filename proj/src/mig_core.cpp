#include "migsim/mig_core.hpp"

#include <algorithm>
#include <stdexcept>

namespace migsim {
namespace {

constexpr int k1g5gbStarts[] = {0, 1, 2, 3, 4, 5, 6};
constexpr int k1g10gbStarts[] = {0, 2, 4, 6};
constexpr int k2g10gbStarts[] = {0, 2, 4};
constexpr int k3g20gbStarts[] = {0, 4};
constexpr int k4g20gbStarts[] = {0};
constexpr int k7g40gbStarts[] = {0};

const std::array<ProfileSpec, kProfileCount> kProfiles = {{
    {ProfileId::k1g5gb, "1g.5gb", 1, 1, k1g5gbStarts, 6, kA100HwTag, 7},
    {ProfileId::k1g10gb, "1g.10gb", 1, 2, k1g10gbStarts, 6, kA100HwTag, 4},
    {ProfileId::k2g10gb, "2g.10gb", 2, 2, k2g10gbStarts, 4, kA100HwTag, 3},
    {ProfileId::k3g20gb, "3g.20gb", 3, 4, k3g20gbStarts, 4, kA100HwTag, 2},
    {ProfileId::k4g20gb, "4g.20gb", 4, 4, k4g20gbStarts, 0, kA100HwTag, 1},
    {ProfileId::k7g40gb, "7g.40gb", 7, 8, k7g40gbStarts, 0, kA100HwTag, 1},
}};

const std::array<ProfileId, kProfileCount> kDescending = {
    ProfileId::k7g40gb, ProfileId::k4g20gb, ProfileId::k3g20gb,
    ProfileId::k2g10gb, ProfileId::k1g10gb, ProfileId::k1g5gb};

// Largest set of pairwise disjoint extents among `starts[from..]`.
int max_disjoint(const std::vector<BlockSet>& extents, std::size_t from, BlockSet used) {
  int best = 0;
  for (std::size_t i = from; i < extents.size(); ++i) {
    if (extents[i].intersects(used)) continue;
    best = std::max(best, 1 + max_disjoint(extents, i + 1, used.with(extents[i])));
  }
  return best;
}

}  // namespace

std::vector<int> BlockSet::to_vector() const {
  std::vector<int> out;
  for (int b = 0; b < kBlockCount; ++b)
    if (contains(b)) out.push_back(b);
  return out;
}

const ProfileSpec& spec(ProfileId p) { return kProfiles.at(index_of(p)); }

std::string_view name(ProfileId p) { return spec(p).name; }

std::optional<ProfileId> parse_profile(std::string_view text) {
  for (const auto& s : kProfiles)
    if (s.name == text) return s.id;
  return std::nullopt;
}

ProfileId profile_from_name(std::string_view text) {
  if (auto p = parse_profile(text)) return *p;
  throw std::invalid_argument("unknown MIG profile '" + std::string(text) + "'");
}

const std::array<ProfileId, kProfileCount>& profiles_by_descending_size() { return kDescending; }

BlockSet extent(ProfileId p, int start) { return extent(spec(p).size_blocks, start); }

bool is_legal_start(ProfileId p, int start) {
  const auto starts = spec(p).start_blocks;
  return std::find(starts.begin(), starts.end(), start) != starts.end();
}

int fitting_starts(BlockSet free_blocks, ProfileId p) {
  const auto& s = spec(p);
  int n = 0;
  for (int start : s.start_blocks)
    if (free_blocks.contains_all(extent(s.size_blocks, start))) ++n;
  return n;
}

int get_cc(BlockSet free_blocks) {
  int cc = 0;
  for (ProfileId p : kAllProfiles) cc += fitting_starts(free_blocks, p);
  return cc;
}

std::optional<int> best_start(ProfileId p, BlockSet free_blocks) {
  const auto& s = spec(p);
  std::optional<int> best;
  int max_cc = -1;
  for (int start : s.start_blocks) {
    const BlockSet blocks = extent(s.size_blocks, start);
    if (!free_blocks.contains_all(blocks)) continue;
    const int cc = get_cc(free_blocks.without(blocks));
    if (cc > max_cc) {
      max_cc = cc;
      best = start;
    }
  }
  return best;
}

int capacity(BlockSet free_blocks, ProfileId p) {
  const auto& s = spec(p);
  std::vector<BlockSet> extents;
  for (int start : s.start_blocks) {
    const BlockSet e = extent(s.size_blocks, start);
    if (free_blocks.contains_all(e)) extents.push_back(e);
  }
  return max_disjoint(extents, 0, BlockSet::none());
}

double fragmentation(BlockSet free_blocks) {
  double score = 0.0;
  BlockSet remaining = free_blocks;
  for (ProfileId p : kDescending) {
    const auto& s = spec(p);
    if (s.size_blocks > remaining.size()) continue;
    for (int start : s.start_blocks) {
      const BlockSet blocks = extent(s.size_blocks, start);
      if (remaining.contains_all(blocks)) remaining = remaining.without(blocks);
    }
    score += static_cast<double>(remaining.size()) / s.size_blocks;
  }
  return score;
}

bool GpuState::can_place(ProfileId p, int start) const {
  return is_legal_start(p, start) && free_.contains_all(extent(p, start));
}

void GpuState::place_at(GiId gi, ProfileId p, int start) {
  if (!is_legal_start(p, start))
    throw std::invalid_argument("start block " + std::to_string(start) + " is not legal for " +
                                std::string(name(p)));
  if (!free_.contains_all(extent(p, start)))
    throw std::invalid_argument("blocks for " + std::string(name(p)) + " at " +
                                std::to_string(start) + " are not free");
  if (placements_.count(gi)) throw std::invalid_argument("GI " + std::to_string(gi) + " already placed");
  const BlockSet blocks = extent(p, start);
  for (int b : blocks.to_vector()) blocks_[b] = gi;
  free_ = free_.without(blocks);
  placements_.emplace(gi, GiPlacement{p, start});
}

GiPlacement GpuState::remove(GiId gi) {
  auto it = placements_.find(gi);
  if (it == placements_.end())
    throw std::out_of_range("GI " + std::to_string(gi) + " is not placed on GPU " +
                            std::to_string(global_index_));
  const GiPlacement placement = it->second;
  const BlockSet blocks = extent(placement.profile, placement.start);
  for (int b : blocks.to_vector()) blocks_[b].reset();
  free_ = free_.with(blocks);
  placements_.erase(it);
  return placement;
}

std::optional<int> assign(ProfileId p, GiId gi, GpuState& gpu) {
  auto start = best_start(p, gpu.free_blocks());
  if (start) gpu.place_at(gi, p, *start);
  return start;
}

void unassign(GiId gi, GpuState& gpu) { gpu.remove(gi); }

std::string render(const GpuState& gpu) {
  std::vector<std::pair<int, GiId>> by_start;
  for (const auto& [gi, pl] : gpu.placements()) by_start.emplace_back(pl.start, gi);
  std::sort(by_start.begin(), by_start.end());
  std::string out(kBlockCount, '.');
  char letter = 'A';
  for (const auto& [start, gi] : by_start) {
    const auto& pl = gpu.placements().at(gi);
    for (int b : extent(pl.profile, start).to_vector()) out[b] = letter;
    letter = letter == 'Z' ? 'A' : static_cast<char>(letter + 1);
  }
  return out;
}

std::string render(BlockSet free_blocks) {
  std::string out(kBlockCount, '#');
  for (int b : free_blocks.to_vector()) out[b] = '.';
  return out;
}

}  // namespace migsim

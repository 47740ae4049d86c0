#pragma once

// Single-GPU MIG block model for the A100 layout: 8 memory blocks, six GPU
// instance profiles, each with a fixed set of legal start blocks.

#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace migsim {

inline constexpr int kBlockCount = 8;
inline constexpr int kProfileCount = 6;
inline constexpr int kA100HwTag = 100;

enum class ProfileId : std::uint8_t {
  k1g5gb = 0,
  k1g10gb,
  k2g10gb,
  k3g20gb,
  k4g20gb,
  k7g40gb,
};

inline constexpr std::array<ProfileId, kProfileCount> kAllProfiles = {
    ProfileId::k1g5gb,  ProfileId::k1g10gb, ProfileId::k2g10gb,
    ProfileId::k3g20gb, ProfileId::k4g20gb, ProfileId::k7g40gb};

constexpr int index_of(ProfileId p) { return static_cast<int>(p); }

/// A subset of the 8 memory blocks of one GPU, stored as a bitmask.
class BlockSet {
 public:
  constexpr BlockSet() = default;
  constexpr explicit BlockSet(std::uint8_t bits) : bits_(bits) {}
  BlockSet(std::initializer_list<int> blocks) {
    for (int b : blocks) bits_ |= bit(b);
  }

  static constexpr BlockSet all() { return BlockSet(0xFF); }
  static constexpr BlockSet none() { return BlockSet(0); }
  // Contiguous blocks [start, start + count).
  static constexpr BlockSet range(int start, int count) {
    std::uint8_t bits = 0;
    for (int b = start; b < start + count && b < kBlockCount; ++b) bits |= bit(b);
    return BlockSet(bits);
  }

  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool contains(int block) const { return (bits_ & bit(block)) != 0; }
  constexpr bool contains_all(BlockSet o) const { return (bits_ & o.bits_) == o.bits_; }
  constexpr bool intersects(BlockSet o) const { return (bits_ & o.bits_) != 0; }
  constexpr BlockSet without(BlockSet o) const {
    return BlockSet(static_cast<std::uint8_t>(bits_ & ~o.bits_));
  }
  constexpr BlockSet with(BlockSet o) const {
    return BlockSet(static_cast<std::uint8_t>(bits_ | o.bits_));
  }
  constexpr BlockSet complement() const {
    return BlockSet(static_cast<std::uint8_t>(~bits_));
  }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }

  std::vector<int> to_vector() const;

  friend constexpr bool operator==(BlockSet, BlockSet) = default;
  friend constexpr auto operator<=>(BlockSet, BlockSet) = default;

 private:
  static constexpr std::uint8_t bit(int b) { return static_cast<std::uint8_t>(1u << b); }
  std::uint8_t bits_ = 0;
};

/// Static description of one MIG profile.
///
/// `size_blocks`, `max_start` and `hw_tag` are the per-profile ILP parameters
/// (GI size, last permissible start offset, GPU-type compatibility value).
struct ProfileSpec {
  ProfileId id;
  std::string_view name;
  int compute_engines;
  int size_blocks;
  std::span<const int> start_blocks;
  int max_start;
  int hw_tag;
  int instances_available;  // on an empty GPU
};

const ProfileSpec& spec(ProfileId p);
std::string_view name(ProfileId p);
std::optional<ProfileId> parse_profile(std::string_view text);
// Throws std::invalid_argument on unknown names.
ProfileId profile_from_name(std::string_view text);

// Profiles ordered by descending size; equal sizes keep the larger compute
// profile first (4g.20gb before 3g.20gb, 2g.10gb before 1g.10gb).
const std::array<ProfileId, kProfileCount>& profiles_by_descending_size();

/// Blocks covered by `p` when placed at `start`.
constexpr BlockSet extent(int size_blocks, int start) {
  return BlockSet::range(start, size_blocks);
}
BlockSet extent(ProfileId p, int start);

bool is_legal_start(ProfileId p, int start);

/// Number of start blocks of `p` whose whole extent lies in `free_blocks`.
int fitting_starts(BlockSet free_blocks, ProfileId p);

/// Configuration Capability: total count of legal placements, over all
/// profiles, that fit in the free blocks.
int get_cc(BlockSet free_blocks);

/// Default (driver) placement: the fitting start whose post-placement free
/// set has maximal CC; the first such start in ascending order wins ties.
std::optional<int> best_start(ProfileId p, BlockSet free_blocks);

/// Maximum number of simultaneous instances of `p` that fit.
int capacity(BlockSet free_blocks, ProfileId p);

/// Greedy unusable-space score. Profiles are visited in descending size;
/// each one that is no larger than the current free count removes every
/// fitting extent in start order and then adds remaining / size.
double fragmentation(BlockSet free_blocks);

// Opaque caller-supplied identifier of a GPU instance (the cluster uses VM ids).
using GiId = std::uint64_t;

struct GiPlacement {
  ProfileId profile;
  int start;

  friend bool operator==(const GiPlacement&, const GiPlacement&) = default;
};

/// Block occupancy of one GPU.
class GpuState {
 public:
  GpuState() = default;
  explicit GpuState(int global_index, int hw_tag = kA100HwTag)
      : global_index_(global_index), hw_tag_(hw_tag) {}

  int global_index() const { return global_index_; }
  void set_global_index(int index) { global_index_ = index; }
  int hw_tag() const { return hw_tag_; }

  BlockSet free_blocks() const { return free_; }
  const std::map<GiId, GiPlacement>& placements() const { return placements_; }
  std::optional<GiId> occupant(int block) const { return blocks_.at(block); }
  bool contains(GiId gi) const { return placements_.count(gi) != 0; }
  bool empty() const { return placements_.empty(); }
  std::size_t gi_count() const { return placements_.size(); }

  bool can_place(ProfileId p, int start) const;

  // Throws std::invalid_argument if the start is illegal, the extent is not
  // free or the id is already placed.
  void place_at(GiId gi, ProfileId p, int start);

  // Throws std::out_of_range for unknown ids.
  GiPlacement remove(GiId gi);

  friend bool operator==(const GpuState&, const GpuState&) = default;

 private:
  int global_index_ = 0;
  int hw_tag_ = kA100HwTag;
  BlockSet free_ = BlockSet::all();
  std::array<std::optional<GiId>, kBlockCount> blocks_{};
  std::map<GiId, GiPlacement> placements_;
};

/// Places `gi` with the default max-CC rule. Returns the chosen start, or
/// nullopt (gpu unchanged) when nothing fits.
std::optional<int> assign(ProfileId p, GiId gi, GpuState& gpu);

/// Exact inverse of `assign`. Throws std::out_of_range for unknown ids.
void unassign(GiId gi, GpuState& gpu);

inline int get_cc(const GpuState& gpu) { return get_cc(gpu.free_blocks()); }
inline double fragmentation(const GpuState& gpu) { return fragmentation(gpu.free_blocks()); }

// "..AABB.." style rendering; GIs are lettered A, B, ... by ascending start.
std::string render(const GpuState& gpu);
std::string render(BlockSet free_blocks);

}  // namespace migsim

#pragma once

// Placement policies (FF, BF, MCC, MECC, GRMU) plus GRMU's light-basket
// defragmentation and consolidation passes. Every placement function
// commits its accepted VMs to the cluster in batch order.

#include <array>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "migsim/cluster.hpp"

namespace migsim {

enum class PolicyKind { FF, BF, MCC, MECC, GRMU };

std::string_view name(PolicyKind kind);  // "ff", "bf", "mcc", "mecc", "grmu"
std::optional<PolicyKind> parse_policy(std::string_view text);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::GRMU;
  double heavy_fraction = 0.3;                          // share of all GPUs for the heavy basket
  std::optional<double> consolidation_interval_hours;   // nullopt: disabled
  double ecc_window_hours = 24.0;
  bool defragmentation = true;

  /// floor(heavy_fraction * total), clamped to [1, total - 1] so both
  /// baskets keep room for their seed GPU.
  int heavy_capacity(int total_gpus) const;
  int light_capacity(int total_gpus) const { return total_gpus - heavy_capacity(total_gpus); }
  void validate() const;  // throws std::invalid_argument
};

struct Slot {
  int host;
  int gpu;
  int start;
  friend bool operator==(const Slot&, const Slot&) = default;
};

struct PlacementDecision {
  VmId vm;
  std::optional<Slot> slot;  // nullopt: rejected
  bool accepted() const { return slot.has_value(); }
};

using Batch = std::vector<VmRequest>;

std::vector<PlacementDecision> place_ff(const Batch& batch, ClusterState& cluster);
std::vector<PlacementDecision> place_bf(const Batch& batch, ClusterState& cluster);
std::vector<PlacementDecision> place_mcc(const Batch& batch, ClusterState& cluster);

using ProfileWeights = std::array<double, kProfileCount>;

/// Sum over profiles of probs[k] * (legal starts of k fitting in free_blocks).
double get_ecc(BlockSet free_blocks, const ProfileWeights& probs);

/// Profile arrival log for MECC. All arrivals count, accepted or not.
class ArrivalHistory {
 public:
  void record(double time, ProfileId profile);
  /// Arrival counts per profile in (now - window, now].
  std::array<long, kProfileCount> counts(double now, double window_seconds) const;
  /// Empirical frequencies over the window; uniform when it is empty.
  ProfileWeights probabilities(double now, double window_seconds) const;
  /// Drops entries older than any window ending at or after `now`.
  void prune(double now, double window_seconds);
  std::size_t size() const { return arrivals_.size(); }

 private:
  std::deque<std::pair<double, ProfileId>> arrivals_;
};

std::vector<PlacementDecision> place_mecc(const Batch& batch, ClusterState& cluster, const ProfileWeights& probs);

/// Basket-aware first fit. When `defragment` is set and anything was
/// rejected, the light basket is defragmented once and the rejected VMs are
/// retried once in batch order.
std::vector<PlacementDecision> place_grmu(const Batch& batch, ClusterState& cluster, const PolicyConfig& config,
                                          double time);

struct DefragResult {
  std::optional<int> gpu;      // GPU chosen, if the light basket was nonempty
  std::vector<VmId> relocated;
};

/// Re-lays the most fragmented light GPU (first on ties) as if its GIs had
/// been placed on an empty GPU in replay_order. Nothing moves unless the
/// re-laid GPU has a strictly higher CC.
DefragResult defragment_light(ClusterState& cluster, double time);

struct ConsolidationMove {
  int source;
  int target;
};

/// Merges light GPUs holding a single half-GPU GI pairwise; emptied sources
/// return to the pool.
std::vector<ConsolidationMove> consolidate_light(ClusterState& cluster, double time);

/// Stateful front end used by the simulator.
class Policy {
 public:
  explicit Policy(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  PoolMode pool_mode() const { return config_.kind == PolicyKind::GRMU ? PoolMode::DualBasket : PoolMode::Single; }

  std::vector<PlacementDecision> place(const Batch& batch, ClusterState& cluster, double now);

  /// Runs consolidation when `now` is on an interval boundary (GRMU only).
  std::vector<ConsolidationMove> after_placement(ClusterState& cluster, double now);

 private:
  PolicyConfig config_;
  ArrivalHistory history_;
};

}  // namespace migsim

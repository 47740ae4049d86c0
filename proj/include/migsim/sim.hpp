#pragma once

// Discrete-time simulation loop. Each tick: departures, arrival batch,
// policy placement, GRMU consolidation, metric sample.

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "migsim/cluster.hpp"
#include "migsim/policies.hpp"

namespace migsim {

struct Scenario {
  std::vector<HostSpec> hosts;
  std::vector<VmRequest> vms;  // arrival order
  PolicyConfig policy;
  std::int64_t tick_seconds = 3600;
  std::int64_t sample_seconds = 3600;  // multiple of tick_seconds
  std::uint64_t seed = 0;              // recorded only; the loop itself is deterministic
  bool strict_host_capacity = false;

  void validate() const;  // throws std::invalid_argument
};

struct Sample {
  double time;
  double acceptance_rate;  // accepted / arrived so far (1.0 before any arrival)
  double active_hw_rate;
  std::size_t migrations;  // cumulative
};

struct ProfileCounter {
  std::size_t accepted = 0;
  std::size_t total = 0;
};

struct Summary {
  std::size_t arrivals = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double acceptance_rate = 1.0;
  bool acceptance_defined = false;  // false when nothing arrived
  double mean_active_hw_rate = 0.0;
  double auc = 0.0;
  std::size_t migrations = 0;
  std::size_t intra_migrations = 0;
  std::size_t inter_migrations = 0;
  std::size_t ticks = 0;
};

struct MetricsSeries {
  std::vector<Sample> samples;
  std::array<ProfileCounter, kProfileCount> per_profile{};
  Summary summary;
};

struct TickEvent {
  std::int64_t tick;
  double now;
  const ClusterState& cluster;
  const std::vector<PlacementDecision>& decisions;
};

using TickObserver = std::function<void(const TickEvent&)>;

/// Share of GPUs on hosts that hold at least one GI (a host with any GI
/// counts all of its GPUs as active).
double active_hardware_rate(const ClusterState& cluster);

/// Sum of sampled active hardware rates.
double auc(const MetricsSeries& series);

/// A VM admitted at tick k leaves at the start of tick k + ceil(duration / tick).
MetricsSeries run(const Scenario& scenario, const TickObserver& observer = {});

}  // namespace migsim

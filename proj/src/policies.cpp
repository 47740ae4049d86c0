#include "migsim/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace migsim {

namespace {

constexpr double kScoreEps = 1e-12;

PlacementDecision commit(const VmRequest& vm, ClusterState& cluster, std::optional<int> gpu) {
  PlacementDecision d{vm.id, std::nullopt};
  if (!gpu) return d;
  const auto start = cluster.place(vm, *gpu);
  if (!start) throw std::logic_error("probed placement failed to commit");
  d.slot = Slot{cluster.host_of(*gpu), *gpu, *start};
  return d;
}

// Argmax over GPUs in index order of score(free blocks after placement);
// strict improvement required, so the lowest index wins ties.
template <typename Score>
std::optional<int> argmax_gpu(const VmRequest& vm, const ClusterState& cluster, Score score) {
  std::optional<int> best;
  double best_score = 0.0;
  for (int g = 0; g < cluster.gpu_count(); ++g) {
    const auto start = cluster.probe(vm, g);
    if (!start) continue;
    const double s = score(cluster.gpu(g).free_blocks().without(extent(vm.profile, *start)));
    if (!best || s > best_score + kScoreEps) {
      best = g;
      best_score = s;
    }
  }
  return best;
}

std::optional<Slot> grmu_place_one(const VmRequest& vm, ClusterState& cluster, const PolicyConfig& config) {
  const bool heavy = vm.profile == ProfileId::k7g40gb;
  const Basket basket = heavy ? Basket::Heavy : Basket::Light;
  const int total = cluster.gpu_count();
  const int cap = heavy ? config.heavy_capacity(total) : config.light_capacity(total);
  for (int g : cluster.members(basket)) {
    if (auto start = cluster.place(vm, g)) return Slot{cluster.host_of(g), g, *start};
  }
  if (static_cast<int>(cluster.members(basket).size()) < cap) {
    if (auto g = cluster.take_from_pool()) {
      cluster.move_gpu(*g, basket);
      if (auto start = cluster.place(vm, *g)) return Slot{cluster.host_of(*g), *g, *start};
    }
  }
  return std::nullopt;
}

bool single_half_gi(const GpuState& gpu) {
  if (gpu.gi_count() != 1) return false;
  const BlockSet used = gpu.free_blocks().complement();
  return used == BlockSet::range(0, 4) || used == BlockSet::range(4, 4);
}

}  // namespace

std::string_view name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FF: return "ff";
    case PolicyKind::BF: return "bf";
    case PolicyKind::MCC: return "mcc";
    case PolicyKind::MECC: return "mecc";
    case PolicyKind::GRMU: return "grmu";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy(std::string_view text) {
  for (PolicyKind k : {PolicyKind::FF, PolicyKind::BF, PolicyKind::MCC, PolicyKind::MECC, PolicyKind::GRMU})
    if (name(k) == text) return k;
  return std::nullopt;
}

int PolicyConfig::heavy_capacity(int total_gpus) const {
  const int n = static_cast<int>(std::floor(heavy_fraction * total_gpus + 1e-9));
  return std::clamp(n, 1, std::max(1, total_gpus - 1));
}

void PolicyConfig::validate() const {
  if (!(heavy_fraction > 0.0 && heavy_fraction < 1.0))
    throw std::invalid_argument("heavy basket fraction must lie in (0, 1)");
  if (consolidation_interval_hours && !(*consolidation_interval_hours > 0.0))
    throw std::invalid_argument("consolidation interval must be positive");
  if (!(ecc_window_hours > 0.0)) throw std::invalid_argument("ECC window must be positive");
}

std::vector<PlacementDecision> place_ff(const Batch& batch, ClusterState& cluster) {
  std::vector<PlacementDecision> out;
  for (const auto& vm : batch) {
    std::optional<int> gpu;
    for (int g = 0; g < cluster.gpu_count() && !gpu; ++g)
      if (cluster.probe(vm, g)) gpu = g;
    out.push_back(commit(vm, cluster, gpu));
  }
  return out;
}

std::vector<PlacementDecision> place_bf(const Batch& batch, ClusterState& cluster) {
  std::vector<PlacementDecision> out;
  for (const auto& vm : batch) {
    const auto gpu = argmax_gpu(vm, cluster, [](BlockSet after) { return -static_cast<double>(after.size()); });
    out.push_back(commit(vm, cluster, gpu));
  }
  return out;
}

std::vector<PlacementDecision> place_mcc(const Batch& batch, ClusterState& cluster) {
  std::vector<PlacementDecision> out;
  for (const auto& vm : batch) {
    const auto gpu = argmax_gpu(vm, cluster, [](BlockSet after) { return static_cast<double>(get_cc(after)); });
    out.push_back(commit(vm, cluster, gpu));
  }
  return out;
}

double get_ecc(BlockSet free_blocks, const ProfileWeights& probs) {
  double ecc = 0.0;
  for (ProfileId p : kAllProfiles) ecc += probs[index_of(p)] * fitting_starts(free_blocks, p);
  return ecc;
}

void ArrivalHistory::record(double time, ProfileId profile) {
  if (!arrivals_.empty() && time < arrivals_.back().first)
    throw std::invalid_argument("arrival history must be recorded in time order");
  arrivals_.emplace_back(time, profile);
}

std::array<long, kProfileCount> ArrivalHistory::counts(double now, double window_seconds) const {
  std::array<long, kProfileCount> n{};
  for (const auto& [t, p] : arrivals_)
    if (t > now - window_seconds && t <= now) ++n[index_of(p)];
  return n;
}

ProfileWeights ArrivalHistory::probabilities(double now, double window_seconds) const {
  const auto n = counts(now, window_seconds);
  long total = 0;
  for (long c : n) total += c;
  ProfileWeights probs;
  for (int k = 0; k < kProfileCount; ++k)
    probs[k] = total == 0 ? 1.0 / kProfileCount : static_cast<double>(n[k]) / static_cast<double>(total);
  return probs;
}

void ArrivalHistory::prune(double now, double window_seconds) {
  while (!arrivals_.empty() && arrivals_.front().first <= now - window_seconds) arrivals_.pop_front();
}

std::vector<PlacementDecision> place_mecc(const Batch& batch, ClusterState& cluster, const ProfileWeights& probs) {
  std::vector<PlacementDecision> out;
  for (const auto& vm : batch) {
    const auto gpu = argmax_gpu(vm, cluster, [&](BlockSet after) { return get_ecc(after, probs); });
    out.push_back(commit(vm, cluster, gpu));
  }
  return out;
}

std::vector<PlacementDecision> place_grmu(const Batch& batch, ClusterState& cluster, const PolicyConfig& config,
                                          double time) {
  if (cluster.mode() != PoolMode::DualBasket) throw std::logic_error("GRMU needs a dual-basket cluster");
  std::vector<PlacementDecision> out;
  std::vector<std::size_t> rejected;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back({batch[i].id, grmu_place_one(batch[i], cluster, config)});
    if (!out.back().slot) rejected.push_back(i);
  }
  if (rejected.empty() || !config.defragmentation) return out;
  defragment_light(cluster, time);
  for (std::size_t i : rejected) out[i].slot = grmu_place_one(batch[i], cluster, config);
  return out;
}

DefragResult defragment_light(ClusterState& cluster, double time) {
  DefragResult result;
  const auto& light = cluster.light_basket();
  if (light.empty()) return result;
  double worst = -1.0;
  for (int g : light) {
    const double f = fragmentation(cluster.gpu(g));
    if (f > worst) {
      worst = f;
      result.gpu = g;
    }
  }
  const GpuState& gpu = cluster.gpu(*result.gpu);
  GpuState mock(gpu.global_index(), gpu.hw_tag());
  for (const auto& [gi, profile] : replay_order(gpu))
    if (!assign(profile, gi, mock)) return result;  // cannot re-lay: leave the GPU alone
  // Only a layout that raises CC is worth moving GIs for; equal-CC layouts
  // would churn already-optimal GPUs.
  if (get_cc(mock) <= get_cc(gpu)) return result;
  std::vector<int> starts;
  for (const auto& [gi, pl] : gpu.placements()) {
    const int target = mock.placements().at(gi).start;
    if (target != pl.start) {
      result.relocated.push_back(gi);
      starts.push_back(target);
    }
  }
  cluster.intra_migrate(result.relocated, *result.gpu, starts, time);
  return result;
}

std::vector<ConsolidationMove> consolidate_light(ClusterState& cluster, double time) {
  std::vector<int> candidates;
  for (int g : cluster.light_basket())
    if (single_half_gi(cluster.gpu(g))) candidates.push_back(g);
  std::vector<ConsolidationMove> moves;
  std::size_t i = 0;
  while (i < candidates.size()) {
    const int source = candidates[i];
    auto target = std::find_if(candidates.begin(), candidates.end(),
                               [&](int g) { return g != source && cluster.can_inter_migrate(source, g); });
    if (target == candidates.end()) {
      ++i;
      continue;
    }
    const int dest = *target;
    cluster.inter_migrate(source, dest, time);
    cluster.move_gpu(source, Basket::Pool);
    moves.push_back({source, dest});
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [&](int g) { return g == source || g == dest; }),
                     candidates.end());
    // Both entries removed; any earlier candidate stays skipped, so resume at
    // the first candidate whose index exceeds the source.
    i = static_cast<std::size_t>(
        std::upper_bound(candidates.begin(), candidates.end(), source) - candidates.begin());
  }
  return moves;
}

Policy::Policy(PolicyConfig config) : config_(config) { config_.validate(); }

std::vector<PlacementDecision> Policy::place(const Batch& batch, ClusterState& cluster, double now) {
  switch (config_.kind) {
    case PolicyKind::FF: return place_ff(batch, cluster);
    case PolicyKind::BF: return place_bf(batch, cluster);
    case PolicyKind::MCC: return place_mcc(batch, cluster);
    case PolicyKind::GRMU: return place_grmu(batch, cluster, config_, now);
    case PolicyKind::MECC: break;
  }
  const double window = config_.ecc_window_hours * 3600.0;
  for (const auto& vm : batch) history_.record(vm.arrival, vm.profile);
  history_.prune(now, window);
  return place_mecc(batch, cluster, history_.probabilities(now, window));
}

std::vector<ConsolidationMove> Policy::after_placement(ClusterState& cluster, double now) {
  if (config_.kind != PolicyKind::GRMU || !config_.consolidation_interval_hours) return {};
  const double period = *config_.consolidation_interval_hours * 3600.0;
  if (std::fmod(now, period) != 0.0) return {};
  return consolidate_light(cluster, now);
}

}  // namespace migsim

#include "migsim/sim.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace migsim {

void Scenario::validate() const {
  if (hosts.empty()) throw std::invalid_argument("scenario has no hosts");
  if (tick_seconds <= 0) throw std::invalid_argument("tick length must be positive");
  if (sample_seconds <= 0 || sample_seconds % tick_seconds != 0)
    throw std::invalid_argument("sampling period must be a positive multiple of the tick length");
  double prev = 0.0;
  std::map<VmId, int> seen;
  for (const auto& vm : vms) {
    if (vm.arrival < 0) throw std::invalid_argument("VM " + std::to_string(vm.id) + " arrives before time 0");
    if (vm.arrival < prev) throw std::invalid_argument("VMs must be sorted by arrival");
    if (!(vm.duration > 0)) throw std::invalid_argument("VM " + std::to_string(vm.id) + " has no duration");
    if (seen[vm.id]++) throw std::invalid_argument("duplicate VM id " + std::to_string(vm.id));
    prev = vm.arrival;
  }
  policy.validate();
}

double active_hardware_rate(const ClusterState& cluster) {
  if (cluster.gpu_count() == 0) return 0.0;
  std::vector<bool> host_active(cluster.hosts().size(), false);
  for (int g = 0; g < cluster.gpu_count(); ++g)
    if (!cluster.gpu(g).empty()) host_active[cluster.host_of(g)] = true;
  int active = 0;
  for (int g = 0; g < cluster.gpu_count(); ++g)
    if (host_active[cluster.host_of(g)]) ++active;
  return static_cast<double>(active) / cluster.gpu_count();
}

double auc(const MetricsSeries& series) {
  double sum = 0.0;
  for (const auto& s : series.samples) sum += s.active_hw_rate;
  return sum;
}

MetricsSeries run(const Scenario& scenario, const TickObserver& observer) {
  scenario.validate();
  Policy policy(scenario.policy);
  ClusterState cluster = ClusterState::init(scenario.hosts, policy.pool_mode());
  cluster.set_strict_host_capacity(scenario.strict_host_capacity);

  MetricsSeries series;
  auto& sum = series.summary;
  const auto tick = scenario.tick_seconds;
  const auto sample_every = scenario.sample_seconds / tick;
  std::multimap<std::int64_t, VmId> departures;  // tick -> vm
  std::size_t next = 0;
  const auto& vms = scenario.vms;

  for (std::int64_t k = 0;; ++k) {
    const double now = static_cast<double>(k * tick);
    for (auto it = departures.begin(); it != departures.end() && it->first <= k;) {
      cluster.release_vm(it->second);
      it = departures.erase(it);
    }

    Batch batch;
    while (next < vms.size() && vms[next].arrival <= now) batch.push_back(vms[next++]);
    const auto decisions = policy.place(batch, cluster, now);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto& counter = series.per_profile[index_of(batch[i].profile)];
      ++counter.total;
      ++sum.arrivals;
      if (decisions[i].accepted()) {
        ++counter.accepted;
        ++sum.accepted;
        const auto stay = static_cast<std::int64_t>(std::ceil(batch[i].duration / static_cast<double>(tick)));
        departures.emplace(k + std::max<std::int64_t>(stay, 1), batch[i].id);
      } else {
        ++sum.rejected;
      }
    }
    policy.after_placement(cluster, now);
    if (observer) observer(TickEvent{k, now, cluster, decisions});

    const bool sampled = k % sample_every == 0;
    if (sampled) {
      series.samples.push_back(Sample{now,
                                      sum.arrivals ? static_cast<double>(sum.accepted) / sum.arrivals : 1.0,
                                      active_hardware_rate(cluster), cluster.migration_log().size()});
    }
    if (sampled && next == vms.size() && departures.empty()) {
      sum.ticks = static_cast<std::size_t>(k + 1);
      break;
    }
  }

  sum.acceptance_defined = sum.arrivals > 0;
  sum.acceptance_rate = sum.acceptance_defined ? static_cast<double>(sum.accepted) / sum.arrivals : 1.0;
  sum.auc = auc(series);
  sum.mean_active_hw_rate = sum.auc / static_cast<double>(series.samples.size());
  for (const auto& m : cluster.migration_log()) ++(m.kind == MigrationKind::Intra ? sum.intra_migrations : sum.inter_migrations);
  sum.migrations = cluster.migration_log().size();
  return series;
}

}  // namespace migsim

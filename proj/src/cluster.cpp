#include "migsim/cluster.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace migsim {

std::vector<std::pair<GiId, ProfileId>> replay_order(const GpuState& gpu) {
  std::vector<std::pair<GiId, ProfileId>> out;
  for (const auto& [gi, pl] : gpu.placements()) out.emplace_back(gi, pl.profile);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const int sa = spec(a.second).size_blocks, sb = spec(b.second).size_blocks;
    if (sa != sb) return sa > sb;
    if (a.second != b.second) return index_of(a.second) > index_of(b.second);
    return a.first < b.first;
  });
  return out;
}

ClusterState ClusterState::init(std::vector<HostSpec> hosts, PoolMode mode) {
  if (hosts.empty()) throw std::invalid_argument("cluster needs at least one host");
  ClusterState c;
  c.mode_ = mode;
  int global_index = 0;
  for (std::size_t h = 0; h < hosts.size(); ++h) {
    const int n = hosts[h].gpu_count;
    if (n < 1 || n > kMaxGpusPerHost)
      throw std::invalid_argument("host '" + hosts[h].id + "' has " + std::to_string(n) +
                                  " GPUs; expected 1.." + std::to_string(kMaxGpusPerHost));
    for (int k = 0; k < n; ++k) {
      c.gpus_.emplace_back(global_index);
      c.gpu_host_.push_back(static_cast<int>(h));
      c.pool_.push_back(global_index);
      ++global_index;
    }
  }
  c.hosts_ = std::move(hosts);
  c.host_cpu_used_.assign(c.hosts_.size(), 0.0);
  c.host_ram_used_.assign(c.hosts_.size(), 0.0);
  if (mode == PoolMode::DualBasket) {
    if (c.gpus_.size() < 2) throw std::invalid_argument("dual-basket pooling needs at least two GPUs");
    c.move_gpu(*c.take_from_pool(), Basket::Heavy);
    c.move_gpu(*c.take_from_pool(), Basket::Light);
  }
  return c;
}

std::vector<int> ClusterState::gpus_of_host(int host) const {
  std::vector<int> out;
  for (int g = 0; g < gpu_count(); ++g)
    if (gpu_host_[g] == host) out.push_back(g);
  return out;
}

const std::vector<int>& ClusterState::members(Basket basket) const {
  switch (basket) {
    case Basket::Heavy: return heavy_;
    case Basket::Light: return light_;
    case Basket::Pool: break;
  }
  return pool_;
}

std::vector<int>& ClusterState::list(Basket basket) {
  return const_cast<std::vector<int>&>(std::as_const(*this).members(basket));
}

Basket ClusterState::basket_of(int global_index) const {
  for (Basket b : {Basket::Pool, Basket::Heavy, Basket::Light}) {
    const auto& l = members(b);
    if (std::binary_search(l.begin(), l.end(), global_index)) return b;
  }
  // Taken from the pool but not yet added anywhere.
  throw std::logic_error("GPU " + std::to_string(global_index) + " is in no pool or basket");
}

std::optional<int> ClusterState::take_from_pool() {
  if (pool_.empty()) return std::nullopt;
  const int g = pool_.front();
  pool_.erase(pool_.begin());
  return g;
}

void ClusterState::insert_sorted(std::vector<int>& l, int value) {
  l.insert(std::upper_bound(l.begin(), l.end(), value), value);
}

void ClusterState::move_gpu(int global_index, Basket to) {
  if (global_index < 0 || global_index >= gpu_count())
    throw std::out_of_range("unknown GPU " + std::to_string(global_index));
  for (Basket b : {Basket::Pool, Basket::Heavy, Basket::Light}) {
    auto& l = list(b);
    auto it = std::lower_bound(l.begin(), l.end(), global_index);
    if (it != l.end() && *it == global_index) l.erase(it);
  }
  insert_sorted(list(to), global_index);
}

bool ClusterState::host_fits(int host, double cpu, double ram) const {
  if (!strict_host_capacity_) return true;
  const auto& h = hosts_.at(host);
  return host_cpu_used_[host] + cpu <= h.cpu_capacity + 1e-9 && host_ram_used_[host] + ram <= h.ram_capacity + 1e-9;
}

std::optional<int> ClusterState::probe(const VmRequest& vm, int global_index) const {
  if (!host_fits(host_of(global_index), vm.cpu.value_or(0.0), vm.ram.value_or(0.0))) return std::nullopt;
  return best_start(vm.profile, gpus_.at(global_index).free_blocks());
}

std::optional<int> ClusterState::place(const VmRequest& vm, int global_index) {
  if (residency_.count(vm.id)) throw std::invalid_argument("VM " + std::to_string(vm.id) + " is already resident");
  const int host = host_of(global_index);
  const double cpu = vm.cpu.value_or(0.0), ram = vm.ram.value_or(0.0);
  if (!host_fits(host, cpu, ram)) return std::nullopt;
  auto start = assign(vm.profile, vm.id, gpus_.at(global_index));
  if (!start) return std::nullopt;
  residency_[vm.id] = Residency{host, global_index, *start, vm.profile, cpu, ram};
  host_cpu_used_[host] += cpu;
  host_ram_used_[host] += ram;
  return start;
}

void ClusterState::release_vm(VmId vm) {
  auto it = residency_.find(vm);
  if (it == residency_.end()) throw std::out_of_range("VM " + std::to_string(vm) + " is not resident");
  const Residency r = it->second;
  unassign(vm, gpus_.at(r.gpu));
  host_cpu_used_[r.host] -= r.cpu;
  host_ram_used_[r.host] -= r.ram;
  residency_.erase(it);
}

void ClusterState::intra_migrate(const std::vector<VmId>& vms, int gpu, const std::vector<int>& target_starts,
                                 double time) {
  if (vms.size() != target_starts.size())
    throw std::invalid_argument("intra_migrate needs one target start per VM");
  if (vms.empty()) return;
  GpuState scratch = gpus_.at(gpu);
  std::vector<ProfileId> profiles;
  for (VmId vm : vms) {
    auto it = residency_.find(vm);
    if (it == residency_.end() || it->second.gpu != gpu)
      throw std::invalid_argument("VM " + std::to_string(vm) + " is not resident on GPU " + std::to_string(gpu));
    profiles.push_back(scratch.remove(vm).profile);
  }
  for (std::size_t i = 0; i < vms.size(); ++i) scratch.place_at(vms[i], profiles[i], target_starts[i]);
  gpus_[gpu] = std::move(scratch);
  for (std::size_t i = 0; i < vms.size(); ++i) {
    residency_[vms[i]].start = target_starts[i];
    migration_log_.push_back({time, vms[i], MigrationKind::Intra});
  }
}

bool ClusterState::can_inter_migrate(int source, int dest) const {
  if (source == dest) return false;
  GpuState scratch = gpus_.at(dest);
  double cpu = 0.0, ram = 0.0;
  for (const auto& [gi, profile] : replay_order(gpus_.at(source))) {
    if (!assign(profile, gi, scratch)) return false;
    cpu += residency_.at(gi).cpu;
    ram += residency_.at(gi).ram;
  }
  if (host_of(source) != host_of(dest) && !host_fits(host_of(dest), cpu, ram)) return false;
  return true;
}

void ClusterState::inter_migrate(int source, int dest, double time) {
  if (source == dest) throw std::invalid_argument("inter_migrate needs distinct GPUs");
  if (!can_inter_migrate(source, dest))
    throw std::invalid_argument("GIs of GPU " + std::to_string(source) + " do not fit on GPU " + std::to_string(dest));
  const int src_host = host_of(source), dst_host = host_of(dest);
  for (const auto& [gi, profile] : replay_order(gpus_.at(source))) {
    unassign(gi, gpus_[source]);
    const int start = *assign(profile, gi, gpus_[dest]);
    Residency& r = residency_.at(gi);
    r.gpu = dest;
    r.host = dst_host;
    r.start = start;
    host_cpu_used_[src_host] -= r.cpu;
    host_ram_used_[src_host] -= r.ram;
    host_cpu_used_[dst_host] += r.cpu;
    host_ram_used_[dst_host] += r.ram;
    migration_log_.push_back({time, gi, MigrationKind::Inter});
  }
}

std::size_t ClusterState::active_gpu_count() const {
  return static_cast<std::size_t>(
      std::count_if(gpus_.begin(), gpus_.end(), [](const GpuState& g) { return !g.empty(); }));
}

void ClusterState::check_invariants() const {
  const auto fail = [](const std::string& what) { throw std::logic_error(what); };
  std::set<int> seen;
  for (Basket b : {Basket::Pool, Basket::Heavy, Basket::Light}) {
    const auto& l = members(b);
    if (!std::is_sorted(l.begin(), l.end())) fail("GPU list not sorted by global index");
    for (int g : l)
      if (!seen.insert(g).second) fail("GPU " + std::to_string(g) + " is in two lists");
  }
  if (seen.size() != gpus_.size()) fail("pool and baskets do not cover every GPU");
  if (mode_ == PoolMode::Single && (!heavy_.empty() || !light_.empty())) fail("baskets used in single-pool mode");

  std::size_t placed = 0;
  for (std::size_t g = 0; g < gpus_.size(); ++g) {
    const GpuState& gpu = gpus_[g];
    BlockSet used;
    for (const auto& [gi, pl] : gpu.placements()) {
      ++placed;
      if (!is_legal_start(pl.profile, pl.start)) fail("illegal start on GPU " + std::to_string(g));
      const BlockSet e = extent(pl.profile, pl.start);
      if (used.intersects(e)) fail("overlapping GIs on GPU " + std::to_string(g));
      used = used.with(e);
      for (int b : e.to_vector())
        if (gpu.occupant(b) != gi) fail("block map disagrees with placements on GPU " + std::to_string(g));
      auto it = residency_.find(gi);
      if (it == residency_.end() || it->second.gpu != static_cast<int>(g) || it->second.start != pl.start ||
          it->second.profile != pl.profile || it->second.host != gpu_host_[g])
        fail("residency disagrees with GPU " + std::to_string(g));
    }
    if (used.complement() != gpu.free_blocks()) fail("free set disagrees with placements on GPU " + std::to_string(g));
  }
  if (placed != residency_.size()) fail("residency has entries without placements");
}

}  // namespace migsim

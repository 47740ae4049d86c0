#pragma once

// Data-center state: hosts, their GPUs (addressed by global index), GPU
// pool / basket membership, VM residency and the migration primitives.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "migsim/mig_core.hpp"
#include "migsim/vm.hpp"

namespace migsim {

inline constexpr int kMaxGpusPerHost = 8;

struct HostSpec {
  std::string id;
  int gpu_count = 1;
  double cpu_capacity = 0.0;  // C_j
  double ram_capacity = 0.0;  // R_j
  double weight = 1.0;        // b_j
};

enum class PoolMode { Single, DualBasket };
enum class Basket { Pool, Heavy, Light };
enum class MigrationKind { Intra, Inter };

struct MigrationEvent {
  double time;
  VmId vm;
  MigrationKind kind;
};

struct Residency {
  int host;
  int gpu;  // global index
  int start;
  ProfileId profile;
  double cpu = 0.0;
  double ram = 0.0;
};

/// GIs of `gpu` ordered for re-placement: descending profile size (larger
/// compute first on equal size), then ascending id.
std::vector<std::pair<GiId, ProfileId>> replay_order(const GpuState& gpu);

class ClusterState {
 public:
  /// Global indices run host-major, GPU-minor from 0. Every GPU starts in
  /// the pool; in DualBasket mode the two lowest are then moved into the
  /// heavy and light basket. Throws std::invalid_argument on an empty host
  /// list, a bad GPU count, or fewer than two GPUs in DualBasket mode.
  static ClusterState init(std::vector<HostSpec> hosts, PoolMode mode);

  PoolMode mode() const { return mode_; }
  const std::vector<HostSpec>& hosts() const { return hosts_; }
  const std::vector<GpuState>& gpus() const { return gpus_; }
  const GpuState& gpu(int global_index) const { return gpus_.at(global_index); }
  int gpu_count() const { return static_cast<int>(gpus_.size()); }
  int host_of(int global_index) const { return gpu_host_.at(global_index); }
  // Global indices of the GPUs of `host`, ascending.
  std::vector<int> gpus_of_host(int host) const;

  const std::vector<int>& pool() const { return pool_; }
  const std::vector<int>& heavy_basket() const { return heavy_; }
  const std::vector<int>& light_basket() const { return light_; }
  const std::vector<int>& members(Basket basket) const;
  Basket basket_of(int global_index) const;

  /// Removes and returns the lowest-index pool GPU, if any.
  std::optional<int> take_from_pool();
  /// Moves a GPU between pool/baskets, keeping each list sorted by index.
  void move_gpu(int global_index, Basket to);

  const std::map<VmId, Residency>& residency() const { return residency_; }
  bool is_resident(VmId vm) const { return residency_.count(vm) != 0; }
  const std::vector<MigrationEvent>& migration_log() const { return migration_log_; }

  /// Host CPU/RAM limits are only enforced in strict mode.
  void set_strict_host_capacity(bool strict) { strict_host_capacity_ = strict; }
  bool strict_host_capacity() const { return strict_host_capacity_; }
  bool host_fits(int host, double cpu, double ram) const;

  /// Start block `assign` would choose on this GPU (host limits included).
  std::optional<int> probe(const VmRequest& vm, int global_index) const;

  /// Places the VM's GI on the GPU with the default max-CC rule.
  std::optional<int> place(const VmRequest& vm, int global_index);

  /// Frees the VM's blocks; the GPU keeps its pool/basket membership.
  /// Throws std::out_of_range for unknown VMs.
  void release_vm(VmId vm);

  /// Moves the listed VMs (all resident on `gpu`) to `target_starts` on the
  /// same GPU: all are removed first, then re-placed. On an illegal target
  /// nothing changes and std::invalid_argument is thrown.
  void intra_migrate(const std::vector<VmId>& vms, int gpu, const std::vector<int>& target_starts, double time);

  /// True iff every GI on `source` can be placed on `dest` by `assign`.
  bool can_inter_migrate(int source, int dest) const;

  /// Re-places every GI of `source` on `dest` via `assign` (larger profiles
  /// first, then ascending VM id). All-or-nothing: throws
  /// std::invalid_argument and leaves the state untouched if any GI does
  /// not fit.
  void inter_migrate(int source, int dest, double time);

  std::size_t active_gpu_count() const;  // GPUs holding at least one GI

  /// Throws std::logic_error describing the first broken invariant.
  void check_invariants() const;

 private:
  std::vector<int>& list(Basket basket);
  static void insert_sorted(std::vector<int>& list, int value);

  PoolMode mode_ = PoolMode::Single;
  std::vector<HostSpec> hosts_;
  std::vector<GpuState> gpus_;
  std::vector<int> gpu_host_;
  std::vector<int> pool_, heavy_, light_;
  std::map<VmId, Residency> residency_;
  std::vector<MigrationEvent> migration_log_;
  std::vector<double> host_cpu_used_, host_ram_used_;
  bool strict_host_capacity_ = false;
};

}  // namespace migsim

#pragma once

// Trace ingestion (node/pod CSV tables), pod-to-profile mapping and
// synthetic workload generation.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "migsim/cluster.hpp"
#include "migsim/vm.hpp"

namespace migsim {

struct PodRecord {
  std::string id;
  double arrival = 0.0;   // seconds
  double duration = 0.0;  // seconds
  double gpu_count = 0.0;
  double gpu_fraction = 1.0;
  std::optional<double> cpu;
  std::optional<double> ram;

  double demand() const { return gpu_count * gpu_fraction; }  // u
};

/// Keeps values within [Q1 - 1.5 IQR, Q3 + 1.5 IQR], in input order.
/// Quartiles interpolate linearly at rank q * (n - 1).
std::vector<double> iqr_filter(const std::vector<double>& values);
double percentile(std::vector<double> values, double q);

/// Compute engines times memory blocks, per profile: 1, 2, 4, 12, 16, 56.
int combined_value(ProfileId p);

/// Closest profile to a normalized demand; ties go to the smaller profile.
ProfileId profile_for_normalized_demand(double u_hat);

/// nullopt when the pod is excluded (u <= 0 or u > 1).
std::optional<ProfileId> map_pod_to_profile(const PodRecord& pod, double max_u);

struct TraceColumns {
  std::string node_id = "node_id";
  std::string node_gpus = "gpu_count";
  std::string node_cpu = "cpu_capacity";  // optional
  std::string node_ram = "ram_capacity";  // optional
  std::string pod_id = "pod_id";
  std::string arrival = "arrival_s";
  std::string duration = "duration_s";
  std::string pod_gpus = "gpu_count";
  std::string gpu_fraction = "gpu_fraction";
  std::string cpu = "cpu_milli";  // optional
  std::string ram = "ram_mb";     // optional
};

struct TraceReport {
  std::vector<std::string> skipped;  // "<file>:<line>: <reason>"
  std::size_t cpu_only_nodes = 0;
  std::size_t outliers = 0;
  std::size_t excluded = 0;  // u <= 0 or u > 1
  double max_u = 0.0;
};

struct Trace {
  std::vector<HostSpec> hosts;
  std::vector<VmRequest> vms;  // sorted by arrival, ids 0..n-1, earliest at 0
  TraceReport report;
};

/// Throws std::runtime_error when a file cannot be read, a required column
/// is missing, or either table has no usable rows.
Trace load_trace(const std::string& nodes_csv, const std::string& pods_csv, const TraceColumns& columns = {});

struct SynthesisSpec {
  std::map<ProfileId, double> mix;  // probabilities, summing to 1
  double rate_per_hour = 0.0;       // Poisson arrivals
  double horizon_hours = 24.0;
  double mean_duration_hours = 4.0;  // exponential
  std::uint64_t seed = 0;
};

/// Full-GPU requests dominate; the small profiles share the rest.
std::map<ProfileId, double> default_mix();

/// Throws std::invalid_argument on an invalid mix or negative parameters.
std::vector<VmRequest> synthesize(const SynthesisSpec& spec);

/// Workload CSV: id,profile,arrival_s,duration_s,weight,cpu,ram,source
void write_workload_csv(std::ostream& out, const std::vector<VmRequest>& vms);
std::vector<VmRequest> read_workload_csv(std::istream& in);

}  // namespace migsim

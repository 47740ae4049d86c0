#pragma once

// JSON documents (scenarios, ILP instances and solutions, state dumps) and
// metrics writers.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "migsim/cluster.hpp"
#include "migsim/ilp.hpp"
#include "migsim/sim.hpp"

namespace migsim {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);

/// Scenario document:
///   hosts: [{id, gpus, cpu, ram, weight}] | {count, gpus}
///   workload: {file} | {synthesize: {mix, rate_per_hour, horizon_hours,
///             mean_duration_hours}} | {vms: [...]}
///   policy: {kind, heavy_fraction, consolidation_hours, ecc_window_hours,
///            defragmentation}
///   tick_seconds, sample_seconds, seed, strict_host_capacity
/// Relative workload paths resolve against `base_dir`. `seed` (when set)
/// overrides the document's seed before synthesis.
Scenario scenario_from_json(const Json& doc, const std::filesystem::path& base_dir,
                            std::optional<std::uint64_t> seed = std::nullopt);

PolicyConfig policy_from_json(const Json& doc);
Json to_json(const PolicyConfig& config);

ilp::Instance instance_from_json(const Json& doc);
Json to_json(const ilp::Instance& instance);
ilp::Solution solution_from_json(const Json& doc);
Json to_json(const ilp::Solution& solution);

Json to_json(const ClusterState& cluster);

/// Header line `# seed: N`, then `time,acceptance_rate,active_hw_rate,migrations`.
void write_metrics_csv(std::ostream& out, const MetricsSeries& series, std::uint64_t seed);
Json summary_json(const MetricsSeries& series, const PolicyConfig& config, std::uint64_t seed);
Json to_json(const MetricsSeries& series, const PolicyConfig& config, std::uint64_t seed);

/// Per-profile acceptance table: profile,accepted,total,acceptance_rate
void write_profile_table_csv(std::ostream& out, const MetricsSeries& series, std::uint64_t seed);

/// Serializes with two-space indentation and a trailing newline.
std::string dump(const Json& doc);

}  // namespace migsim

// migsim: simulate placement policies, sweep GRMU parameters, analyse the
// single-GPU configuration space, and work with ILP instances.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "migsim/config_space.hpp"
#include "migsim/documents.hpp"
#include "migsim/ilp.hpp"
#include "migsim/policies.hpp"
#include "migsim/sim.hpp"
#include "migsim/text.hpp"
#include "migsim/workload.hpp"

namespace fs = std::filesystem;
using namespace migsim;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string output = ".";
  std::string format = "csv";
};

struct PolicyFlags {
  std::vector<std::string> policies;
  std::optional<double> heavy_capacity;
  std::optional<std::string> consolidation;
  std::optional<double> ecc_window;
  bool no_defrag = false;
};

class Artifacts {
 public:
  explicit Artifacts(const Globals& g) : dir_(g.output) { fs::create_directories(dir_); }

  void write(const std::string& file, const std::string& contents) {
    std::ofstream out(dir_ / file, std::ios::binary);
    if (!out) throw std::runtime_error((dir_ / file).string() + ": cannot write");
    out << contents;
  }

 private:
  fs::path dir_;
};

std::optional<double> parse_interval(const std::string& text) {
  if (text == "disabled" || text == "off") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v > 0.0))
    throw std::invalid_argument("consolidation interval must be a positive number of hours or 'disabled', got '" +
                                text + "'");
  return v;
}

PolicyConfig apply(PolicyConfig c, const PolicyFlags& f) {
  if (f.heavy_capacity) c.heavy_fraction = *f.heavy_capacity;
  if (f.consolidation) c.consolidation_interval_hours = parse_interval(*f.consolidation);
  if (f.ecc_window) c.ecc_window_hours = *f.ecc_window;
  if (f.no_defrag) c.defragmentation = false;
  c.validate();
  return c;
}

Scenario load_scenario(const std::string& path, const Globals& g) {
  return scenario_from_json(read_json_file(path), fs::path(path).parent_path(), g.seed);
}

std::string metrics_artifact(const MetricsSeries& m, const PolicyConfig& c, const Globals& g, std::uint64_t seed) {
  if (g.format == "json") return dump(to_json(m, c, seed));
  std::ostringstream out;
  write_metrics_csv(out, m, seed);
  return out.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

int cmd_simulate(const Globals& g, const std::string& scenario_path, const PolicyFlags& flags, bool dump_state) {
  const Scenario base = load_scenario(scenario_path, g);
  std::vector<PolicyConfig> configs;
  if (flags.policies.empty()) {
    configs.push_back(apply(base.policy, flags));
  } else {
    for (const auto& p : flags.policies) {
      PolicyConfig c = base.policy;
      c.kind = *parse_policy(p);
      configs.push_back(apply(c, flags));
    }
  }
  Artifacts out(g);
  std::cout << "policy  accepted/arrivals  acceptance  mean_active_hw  auc  migrations\n";
  for (const auto& config : configs) {
    Scenario s = base;
    s.policy = config;
    std::optional<Json> final_state;
    TickObserver observer;
    if (dump_state) observer = [&](const TickEvent& e) { final_state = to_json(e.cluster); };
    const MetricsSeries m = run(s, observer);
    const std::string stem(name(config.kind));
    out.write(stem + "_metrics." + g.format, metrics_artifact(m, config, g, s.seed));
    out.write(stem + "_summary.json", dump(summary_json(m, config, s.seed)));
    std::ostringstream table;
    write_profile_table_csv(table, m, s.seed);
    out.write(stem + "_profiles.csv", table.str());
    if (final_state) out.write(stem + "_state.json", dump(*final_state));
    const auto& sum = m.summary;
    std::cout << stem << "  " << sum.accepted << "/" << sum.arrivals << "  " << fixed(sum.acceptance_rate) << "  "
              << fixed(sum.mean_active_hw_rate) << "  " << fixed(sum.auc, 2) << "  " << sum.migrations << "\n";
  }
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& scenario_path, PolicyFlags flags,
              const std::vector<double>& capacities, const std::vector<std::string>& intervals) {
  if (capacities.empty() == intervals.empty())
    throw std::invalid_argument("give exactly one nonempty grid: --capacity or --interval");
  const Scenario base = load_scenario(scenario_path, g);
  PolicyConfig grmu = base.policy;
  grmu.kind = PolicyKind::GRMU;
  grmu = apply(grmu, flags);

  std::vector<std::pair<std::string, PolicyConfig>> points;
  for (double c : capacities) {
    PolicyConfig p = grmu;
    p.heavy_fraction = c;
    p.validate();
    points.emplace_back(format_number(c), p);
  }
  for (const auto& i : intervals) {
    PolicyConfig p = grmu;
    p.consolidation_interval_hours = parse_interval(i);
    points.emplace_back(p.consolidation_interval_hours ? format_number(*p.consolidation_interval_hours) : "disabled", p);
  }
  const std::string axis = capacities.empty() ? "interval_hours" : "heavy_capacity";

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "# seed: " << base.seed << '\n'
      << axis << ",heavy_gpus,acceptance_rate,mean_active_hw_rate,auc,migrations\n";
  for (const auto& [label, config] : points) {
    Scenario s = base;
    s.policy = config;
    const auto sum = run(s).summary;
    int total = 0;
    for (const auto& h : s.hosts) total += h.gpu_count;
    const int heavy = config.heavy_capacity(total);
    csv << label << ',' << heavy << ',' << format_number(sum.acceptance_rate) << ','
        << format_number(sum.mean_active_hw_rate) << ',' << format_number(sum.auc) << ',' << sum.migrations << '\n';
    rows.push_back({{axis, label},
                    {"heavy_gpus", heavy},
                    {"acceptance_rate", sum.acceptance_rate},
                    {"mean_active_hw_rate", sum.mean_active_hw_rate},
                    {"auc", sum.auc},
                    {"migrations", sum.migrations}});
    std::cout << axis << "=" << label << "  acceptance " << fixed(sum.acceptance_rate) << "  mean_active_hw "
              << fixed(sum.mean_active_hw_rate) << "  migrations " << sum.migrations << "\n";
  }
  Artifacts out(g);
  const std::string stem = capacities.empty() ? "sweep_interval" : "sweep_capacity";
  if (g.format == "json")
    out.write(stem + ".json", dump(Json{{"seed", base.seed}, {"axis", axis}, {"rows", rows}}));
  else
    out.write(stem + ".csv", csv.str());
  return 0;
}

bool waived(const std::string& row, const std::vector<std::string>& waivers) {
  for (const auto& w : waivers)
    if (row == w || row.rfind(w + "_", 0) == 0) return true;
  return false;
}

int cmd_configspace(const Globals& g, bool dump_configs, const std::vector<std::string>& waivers,
                    bool write_artifact) {
  const auto rows = configspace_counts();
  for (const auto& w : waivers) {
    bool known = false;
    for (const auto& r : rows) known = known || waived(r.name, {w});
    if (!known) throw std::invalid_argument("--waive: no count named '" + w + "'");
  }
  const std::uint64_t seed = g.seed.value_or(0);
  bool ok = true;
  std::ostringstream csv;
  csv << "# seed: " << seed << '\n' << "count,computed,expected,status\n";
  Json json_rows = Json::array();
  std::cout << std::left << std::setw(24) << "count" << std::right << std::setw(10) << "computed" << std::setw(10)
            << "expected" << "  status\n";
  for (const auto& r : rows) {
    const std::string status = r.matches() ? "match" : waived(r.name, waivers) ? "waived" : "MISMATCH";
    ok = ok && status != "MISMATCH";
    std::cout << std::left << std::setw(24) << r.name << std::right << std::setw(10) << r.computed << std::setw(10)
              << r.expected << "  " << status << "\n";
    csv << r.name << ',' << r.computed << ',' << r.expected << ',' << status << '\n';
    json_rows.push_back({{"count", r.name}, {"computed", r.computed}, {"expected", r.expected}, {"status", status}});
  }
  if (dump_configs) {
    for (const auto& c : enumerate_all().configs()) std::cout << describe(c) << "\n";
  }
  if (write_artifact) {
    Artifacts out(g);
    if (g.format == "json")
      out.write("configspace.json", dump(Json{{"seed", seed}, {"counts", json_rows}}));
    else
      out.write("configspace.csv", csv.str());
  }
  return ok ? 0 : 1;
}

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(std::stod(trim(part)));
  if (expected && out.size() != expected)
    throw std::invalid_argument(std::string(what) + " needs " + std::to_string(expected) + " comma-separated values");
  return out;
}

int cmd_ilp_export(const Globals& g, const std::string& instance_path, const std::string& weights,
                   std::optional<int> stage, const std::string& fixed_values) {
  const auto inst = instance_from_json(read_json_file(instance_path));
  ilp::ExportMode mode = ilp::WeightedObjective{};
  if (stage) {
    if (*stage < 1 || *stage > 3) throw std::invalid_argument("--stage must be 1, 2 or 3");
    const auto fixed = fixed_values.empty() ? std::vector<double>{} : parse_list(fixed_values, 0, "--fixed");
    if (fixed.size() != static_cast<std::size_t>(*stage - 1))
      throw std::invalid_argument("--fixed needs one value per earlier stage");
    mode = ilp::StageObjective{*stage, fixed};
  } else if (!weights.empty()) {
    const auto w = parse_list(weights, 3, "--weights");
    mode = ilp::WeightedObjective{w[0], w[1], w[2]};
  }
  const auto model = ilp::build_model(inst);
  Artifacts out(g);
  out.write("model.lp", "\\ seed: " + std::to_string(g.seed.value_or(0)) + "\n" + ilp::export_lp(model, mode));
  std::cout << "model.lp: " << model.variables.size() << " variables, " << model.constraints.size()
            << " constraints\n";
  return 0;
}

void print_solution(const ilp::Instance& inst, const ilp::Solution& sol) {
  const auto slots = sol.assignments(inst.vms.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    std::cout << "vm " << i << " " << name(inst.vms[i].profile) << ": ";
    if (slots[i])
      std::cout << "pm " << slots[i]->pm << " gpu " << slots[i]->gpu << " start " << slots[i]->start << "\n";
    else
      std::cout << "rejected\n";
  }
  std::cout << "acceptance " << format_number(sol.objectives.acceptance) << "  hardware "
            << format_number(sol.objectives.hardware) << "  migration " << format_number(sol.objectives.migration)
            << "\n";
}

int cmd_ilp_solve(const Globals& g, const std::string& instance_path, const std::string& weights) {
  const auto inst = instance_from_json(read_json_file(instance_path));
  ilp::SolveMode mode = ilp::Lexicographic{};
  if (!weights.empty()) {
    const auto w = parse_list(weights, 3, "--weights");
    mode = ilp::WeightedObjective{w[0], w[1], w[2]};
  }
  ilp::Solution sol;
  try {
    sol = ilp::brute_force_solve(inst, mode);
  } catch (const ilp::SizeLimitError& e) {
    std::cerr << "size error: " << e.what() << "\n";
    return 2;
  }
  print_solution(inst, sol);
  Json doc = to_json(sol);
  doc["seed"] = g.seed.value_or(0);
  Artifacts(g).write("solution.json", dump(doc));
  return 0;
}

int cmd_ilp_check(const std::string& instance_path, const std::string& solution_path) {
  const auto inst = instance_from_json(read_json_file(instance_path));
  const auto sol = solution_from_json(read_json_file(solution_path));
  const auto violations = ilp::validate(inst, sol);
  if (violations.empty()) {
    const auto obj = ilp::evaluate(inst, sol);
    std::cout << "feasible  acceptance " << format_number(obj.acceptance) << "  hardware "
              << format_number(obj.hardware) << "  migration " << format_number(obj.migration) << "\n";
    return 0;
  }
  std::cout << violations.size() << " violation(s)\n";
  for (const auto& v : violations) std::cout << "  " << v.to_string() << "\n";
  return 1;
}

int cmd_maptrace(const Globals& g, const std::string& nodes, const std::string& pods, const std::string& columns_path) {
  TraceColumns columns;
  if (!columns_path.empty()) {
    const Json c = read_json_file(columns_path);
    const auto set = [&](const char* key, std::string& dst) {
      if (c.contains(key)) dst = c.at(key).get<std::string>();
    };
    set("node_id", columns.node_id);
    set("node_gpus", columns.node_gpus);
    set("node_cpu", columns.node_cpu);
    set("node_ram", columns.node_ram);
    set("pod_id", columns.pod_id);
    set("arrival", columns.arrival);
    set("duration", columns.duration);
    set("pod_gpus", columns.pod_gpus);
    set("gpu_fraction", columns.gpu_fraction);
    set("cpu", columns.cpu);
    set("ram", columns.ram);
  }
  const Trace trace = load_trace(nodes, pods, columns);
  for (const auto& s : trace.report.skipped) std::cerr << "skipped " << s << "\n";
  const std::uint64_t seed = g.seed.value_or(0);

  Artifacts out(g);
  Json hosts = Json::array();
  for (const auto& h : trace.hosts)
    hosts.push_back({{"id", h.id}, {"gpus", h.gpu_count}, {"cpu", h.cpu_capacity}, {"ram", h.ram_capacity}});
  out.write("hosts.json", dump(Json{{"seed", seed}, {"hosts", hosts}}));
  if (g.format == "json") {
    Json vms = Json::array();
    for (const auto& vm : trace.vms) {
      Json v{{"id", vm.id}, {"profile", name(vm.profile)}, {"arrival", vm.arrival}, {"duration", vm.duration},
             {"source", vm.source}};
      if (vm.cpu) v["cpu"] = *vm.cpu;
      if (vm.ram) v["ram"] = *vm.ram;
      vms.push_back(std::move(v));
    }
    out.write("workload.json", dump(Json{{"seed", seed}, {"vms", vms}}));
  } else {
    std::ostringstream csv;
    csv << "# seed: " << seed << '\n';
    write_workload_csv(csv, trace.vms);
    out.write("workload.csv", csv.str());
  }

  std::array<std::size_t, kProfileCount> counts{};
  for (const auto& vm : trace.vms) ++counts[index_of(vm.profile)];
  const auto& r = trace.report;
  std::cout << "hosts " << trace.hosts.size() << " (cpu-only nodes dropped: " << r.cpu_only_nodes << ")\n"
            << "vms " << trace.vms.size() << "  outliers " << r.outliers << "  excluded " << r.excluded
            << "  skipped rows " << r.skipped.size() << "  max_u " << format_number(r.max_u) << "\n";
  for (ProfileId p : kAllProfiles) std::cout << "  " << name(p) << " " << counts[index_of(p)] << "\n";
  return 0;
}

void add_policy_flags(CLI::App* cmd, PolicyFlags& f) {
  cmd->add_option("--heavy-capacity", f.heavy_capacity, "GRMU heavy-basket share of all GPUs, e.g. 0.3")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--consolidation", f.consolidation, "GRMU consolidation interval in hours, or 'disabled'");
  cmd->add_option("--ecc-window", f.ecc_window, "MECC probability window in hours")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-defrag", f.no_defrag, "Disable GRMU light-basket defragmentation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIG-aware VM placement simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice; recorded in artifacts");
  app.add_option("--output", g.output, "Artifact directory")->capture_default_str();
  app.add_option("--format", g.format, "Artifact format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  std::string scenario;
  PolicyFlags flags;
  bool dump_state = false;
  auto* simulate = app.add_subcommand("simulate", "Run the scenario under one or more policies");
  simulate->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", flags.policies, "ff, bf, mcc, mecc, grmu (repeat or comma-separate)")
      ->delimiter(',')
      ->check(CLI::IsMember({"ff", "bf", "mcc", "mecc", "grmu"}));
  add_policy_flags(simulate, flags);
  simulate->add_flag("--dump-state", dump_state, "Write the final cluster state as JSON");

  std::vector<double> capacities;
  std::vector<std::string> intervals;
  PolicyFlags sweep_flags;
  std::string sweep_scenario;
  auto* sweep = app.add_subcommand("sweep", "Sweep the GRMU heavy-basket capacity or consolidation interval");
  sweep->add_option("--scenario", sweep_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--capacity", capacities, "Heavy-basket shares, e.g. 0.2,0.3,0.4")->delimiter(',');
  sweep->add_option("--interval", intervals, "Consolidation intervals in hours or 'disabled'")->delimiter(',');
  add_policy_flags(sweep, sweep_flags);

  bool dump_configs = false, cs_artifact = false;
  std::vector<std::string> waivers;
  auto* configspace = app.add_subcommand("configspace", "Count single- and two-GPU MIG configurations");
  configspace->add_flag("--dump-configs", dump_configs, "Print every configuration");
  configspace->add_option("--waive", waivers, "Accept a mismatch for these counts (prefix match on '_')")
      ->delimiter(',');
  configspace->add_flag("--write", cs_artifact, "Also write the counts table to the output directory");

  std::string instance, weights, fixed_values, solution;
  std::optional<int> stage;
  auto* ilp_cmd = app.add_subcommand("ilp", "ILP model export, exhaustive solve and solution check");
  ilp_cmd->require_subcommand(1);
  auto* ilp_export = ilp_cmd->add_subcommand("export", "Write the model in CPLEX LP format");
  auto* ilp_solve = ilp_cmd->add_subcommand("solve", "Solve a small instance exhaustively");
  auto* ilp_check = ilp_cmd->add_subcommand("check", "Validate a solution against every constraint");
  for (auto* c : {ilp_export, ilp_solve, ilp_check})
    c->add_option("--instance", instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  for (auto* c : {ilp_export, ilp_solve})
    c->add_option("--weights", weights, "Weighted objective: acceptance,hardware,migration");
  ilp_export->add_option("--stage", stage, "Single objective stage 1..3 (earlier stages pinned via --fixed)");
  ilp_export->add_option("--fixed", fixed_values, "Optimal values of the earlier stages");
  ilp_check->add_option("--solution", solution, "Solution JSON")->required()->check(CLI::ExistingFile);

  std::string nodes, pods, columns;
  auto* maptrace = app.add_subcommand("maptrace", "Map a node/pod trace to hosts and MIG-profile VMs");
  maptrace->add_option("--nodes", nodes, "Node table CSV")->required()->check(CLI::ExistingFile);
  maptrace->add_option("--pods", pods, "Pod table CSV")->required()->check(CLI::ExistingFile);
  maptrace->add_option("--columns", columns, "JSON column-name mapping")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(g, scenario, flags, dump_state);
    if (sweep->parsed()) return cmd_sweep(g, sweep_scenario, sweep_flags, capacities, intervals);
    if (configspace->parsed()) return cmd_configspace(g, dump_configs, waivers, cs_artifact);
    if (ilp_export->parsed()) return cmd_ilp_export(g, instance, weights, stage, fixed_values);
    if (ilp_solve->parsed()) return cmd_ilp_solve(g, instance, weights);
    if (ilp_check->parsed()) return cmd_ilp_check(instance, solution);
    if (maptrace->parsed()) return cmd_maptrace(g, nodes, pods, columns);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#include "migsim/documents.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "migsim/text.hpp"
#include "migsim/workload.hpp"

namespace migsim {

namespace {

std::runtime_error doc_error(const std::string& what) { return std::runtime_error("document: " + what); }

template <typename T>
T get_or(const Json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw doc_error(std::string("field '") + key + "' has the wrong type");
  }
}

const Json& require(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw doc_error(std::string("missing field '") + key + "'");
  return doc.at(key);
}

std::vector<HostSpec> hosts_from_json(const Json& doc) {
  std::vector<HostSpec> hosts;
  if (doc.is_object()) {
    const int count = get_or(doc, "count", 0), gpus = get_or(doc, "gpus", 1);
    for (int h = 0; h < count; ++h)
      hosts.push_back({"host" + std::to_string(h), gpus, get_or(doc, "cpu", 0.0), get_or(doc, "ram", 0.0),
                       get_or(doc, "weight", 1.0)});
  } else if (doc.is_array()) {
    for (const auto& h : doc)
      hosts.push_back({get_or<std::string>(h, "id", "host" + std::to_string(hosts.size())), get_or(h, "gpus", 1),
                       get_or(h, "cpu", 0.0), get_or(h, "ram", 0.0), get_or(h, "weight", 1.0)});
  } else {
    throw doc_error("'hosts' must be an array or {count, gpus}");
  }
  return hosts;
}

VmRequest vm_from_json(const Json& v, std::size_t index) {
  VmRequest vm;
  vm.id = get_or<VmId>(v, "id", index);
  vm.profile = profile_from_name(require(v, "profile").get<std::string>());
  vm.arrival = get_or(v, "arrival", 0.0);
  vm.duration = require(v, "duration").get<double>();
  vm.weight = get_or(v, "weight", 1.0);
  if (v.contains("cpu")) vm.cpu = v.at("cpu").get<double>();
  if (v.contains("ram")) vm.ram = v.at("ram").get<double>();
  return vm;
}

Json slot_json(const ilp::GpuSlot& s) { return Json{{"pm", s.pm}, {"gpu", s.gpu}, {"start", s.start}}; }

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

PolicyConfig policy_from_json(const Json& doc) {
  PolicyConfig c;
  const auto kind = get_or<std::string>(doc, "kind", "grmu");
  const auto parsed = parse_policy(kind);
  if (!parsed) throw doc_error("unknown policy '" + kind + "'");
  c.kind = *parsed;
  c.heavy_fraction = get_or(doc, "heavy_fraction", c.heavy_fraction);
  if (doc.contains("consolidation_hours") && !doc.at("consolidation_hours").is_null())
    c.consolidation_interval_hours = doc.at("consolidation_hours").get<double>();
  c.ecc_window_hours = get_or(doc, "ecc_window_hours", c.ecc_window_hours);
  c.defragmentation = get_or(doc, "defragmentation", c.defragmentation);
  return c;
}

Json to_json(const PolicyConfig& c) {
  Json j{{"kind", name(c.kind)}};
  if (c.kind == PolicyKind::GRMU) {
    j["heavy_fraction"] = c.heavy_fraction;
    j["consolidation_hours"] = c.consolidation_interval_hours ? Json(*c.consolidation_interval_hours) : Json(nullptr);
    j["defragmentation"] = c.defragmentation;
  }
  if (c.kind == PolicyKind::MECC) j["ecc_window_hours"] = c.ecc_window_hours;
  return j;
}

Scenario scenario_from_json(const Json& doc, const std::filesystem::path& base_dir, std::optional<std::uint64_t> seed) {
  Scenario s;
  s.hosts = hosts_from_json(require(doc, "hosts"));
  s.policy = doc.contains("policy") ? policy_from_json(doc.at("policy")) : PolicyConfig{};
  s.tick_seconds = get_or<std::int64_t>(doc, "tick_seconds", s.tick_seconds);
  s.sample_seconds = get_or<std::int64_t>(doc, "sample_seconds", s.sample_seconds);
  s.seed = seed.value_or(get_or<std::uint64_t>(doc, "seed", 0));
  s.strict_host_capacity = get_or(doc, "strict_host_capacity", false);

  const Json& w = require(doc, "workload");
  if (w.contains("file")) {
    auto path = std::filesystem::path(w.at("file").get<std::string>());
    if (path.is_relative()) path = base_dir / path;
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    s.vms = read_workload_csv(in);
  } else if (w.contains("synthesize")) {
    const Json& g = w.at("synthesize");
    SynthesisSpec spec;
    if (g.contains("mix")) {
      for (const auto& [k, v] : g.at("mix").items()) spec.mix[profile_from_name(k)] = v.get<double>();
    } else {
      spec.mix = default_mix();
    }
    spec.rate_per_hour = get_or(g, "rate_per_hour", 0.0);
    spec.horizon_hours = get_or(g, "horizon_hours", spec.horizon_hours);
    spec.mean_duration_hours = get_or(g, "mean_duration_hours", spec.mean_duration_hours);
    spec.seed = s.seed;
    s.vms = synthesize(spec);
  } else if (w.contains("vms")) {
    for (const auto& v : w.at("vms")) s.vms.push_back(vm_from_json(v, s.vms.size()));
  } else {
    throw doc_error("'workload' needs one of file, synthesize, vms");
  }
  s.validate();
  return s;
}

ilp::Instance instance_from_json(const Json& doc) {
  ilp::Instance inst;
  inst.big_m = get_or(doc, "big_m", ilp::kDefaultBigM);
  for (const auto& p : require(doc, "pms")) {
    ilp::Pm pm;
    pm.cpu_capacity = get_or(p, "cpu", 0.0);
    pm.ram_capacity = get_or(p, "ram", 0.0);
    pm.weight = get_or(p, "weight", 1.0);
    const Json& gpus = require(p, "gpus");
    if (gpus.is_number_integer()) {
      pm.gpu_tags.assign(gpus.get<int>(), kA100HwTag);
    } else {
      for (const auto& t : gpus) pm.gpu_tags.push_back(t.get<int>());
    }
    inst.pms.push_back(std::move(pm));
  }
  for (const auto& v : require(doc, "vms")) {
    ilp::Vm vm;
    vm.profile = profile_from_name(require(v, "profile").get<std::string>());
    vm.weight = get_or(v, "weight", 1.0);
    vm.migration_weight = get_or(v, "migration_weight", 0.0);
    vm.cpu = get_or(v, "cpu", 0.0);
    vm.ram = get_or(v, "ram", 0.0);
    if (v.contains("previous") && !v.at("previous").is_null()) {
      const Json& s = v.at("previous");
      vm.previous = ilp::GpuSlot{require(s, "pm").get<int>(), require(s, "gpu").get<int>(), require(s, "start").get<int>()};
    }
    inst.vms.push_back(vm);
  }
  ilp::check_instance(inst);
  return inst;
}

Json to_json(const ilp::Instance& inst) {
  Json pms = Json::array(), vms = Json::array();
  for (const auto& pm : inst.pms)
    pms.push_back({{"cpu", pm.cpu_capacity}, {"ram", pm.ram_capacity}, {"weight", pm.weight}, {"gpus", pm.gpu_tags}});
  for (const auto& vm : inst.vms) {
    Json v{{"profile", name(vm.profile)}, {"weight", vm.weight}, {"migration_weight", vm.migration_weight},
           {"cpu", vm.cpu}, {"ram", vm.ram}};
    if (vm.previous) v["previous"] = slot_json(*vm.previous);
    vms.push_back(std::move(v));
  }
  return Json{{"big_m", inst.big_m}, {"pms", pms}, {"vms", vms}};
}

ilp::Solution solution_from_json(const Json& doc) {
  ilp::Solution s;
  for (const auto& e : require(doc, "x")) s.x.emplace(e.at(0).get<int>(), e.at(1).get<int>());
  for (const auto& e : require(doc, "y"))
    s.y[{e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()}] = e.at(3).get<int>();
  if (doc.contains("phi")) s.phi = doc.at("phi").get<std::vector<int>>();
  if (doc.contains("gamma")) s.gamma = doc.at("gamma").get<std::vector<std::vector<int>>>();
  return s;
}

Json to_json(const ilp::Solution& s) {
  Json x = Json::array(), y = Json::array();
  for (const auto& [i, j] : s.x) x.push_back({i, j});
  for (const auto& [key, z] : s.y) y.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), z});
  Json j{{"x", x}, {"y", y}};
  if (s.phi) j["phi"] = *s.phi;
  if (s.gamma) j["gamma"] = *s.gamma;
  j["objectives"] = {{"acceptance", s.objectives.acceptance},
                     {"hardware", s.objectives.hardware},
                     {"migration", s.objectives.migration}};
  return j;
}

Json to_json(const ClusterState& c) {
  const auto basket_name = [](Basket b) {
    switch (b) {
      case Basket::Heavy: return "heavy";
      case Basket::Light: return "light";
      case Basket::Pool: break;
    }
    return "pool";
  };
  Json gpus = Json::array();
  for (int g = 0; g < c.gpu_count(); ++g) {
    Json gis = Json::array();
    for (const auto& [gi, pl] : c.gpu(g).placements())
      gis.push_back({{"vm", gi}, {"profile", name(pl.profile)}, {"start", pl.start}});
    gpus.push_back({{"index", g},
                    {"host", c.hosts()[c.host_of(g)].id},
                    {"basket", basket_name(c.basket_of(g))},
                    {"blocks", render(c.gpu(g))},
                    {"cc", get_cc(c.gpu(g))},
                    {"gis", gis}});
  }
  Json log = Json::array();
  for (const auto& m : c.migration_log())
    log.push_back({{"time", m.time}, {"vm", m.vm}, {"kind", m.kind == MigrationKind::Intra ? "intra" : "inter"}});
  return Json{{"mode", c.mode() == PoolMode::DualBasket ? "dual-basket" : "single"},
              {"pool", c.pool()},
              {"heavy", c.heavy_basket()},
              {"light", c.light_basket()},
              {"gpus", gpus},
              {"migrations", log}};
}

void write_metrics_csv(std::ostream& out, const MetricsSeries& series, std::uint64_t seed) {
  out << "# seed: " << seed << '\n' << "time,acceptance_rate,active_hw_rate,migrations\n";
  for (const auto& s : series.samples)
    out << format_number(s.time) << ',' << format_number(s.acceptance_rate) << ',' << format_number(s.active_hw_rate)
        << ',' << s.migrations << '\n';
}

void write_profile_table_csv(std::ostream& out, const MetricsSeries& series, std::uint64_t seed) {
  out << "# seed: " << seed << '\n' << "profile,accepted,total,acceptance_rate\n";
  for (ProfileId p : kAllProfiles) {
    const auto& c = series.per_profile[index_of(p)];
    out << name(p) << ',' << c.accepted << ',' << c.total << ','
        << (c.total ? format_number(static_cast<double>(c.accepted) / c.total) : "") << '\n';
  }
}

Json summary_json(const MetricsSeries& series, const PolicyConfig& config, std::uint64_t seed) {
  const auto& s = series.summary;
  Json per_profile = Json::object();
  for (ProfileId p : kAllProfiles) {
    const auto& c = series.per_profile[index_of(p)];
    per_profile[std::string(name(p))] = {{"accepted", c.accepted}, {"total", c.total}};
  }
  return Json{{"seed", seed},
              {"policy", to_json(config)},
              {"arrivals", s.arrivals},
              {"accepted", s.accepted},
              {"rejected", s.rejected},
              {"acceptance_rate", s.acceptance_rate},
              {"acceptance_defined", s.acceptance_defined},
              {"mean_active_hw_rate", s.mean_active_hw_rate},
              {"auc", s.auc},
              {"migrations", s.migrations},
              {"intra_migrations", s.intra_migrations},
              {"inter_migrations", s.inter_migrations},
              {"ticks", s.ticks},
              {"samples", series.samples.size()},
              {"per_profile", per_profile}};
}

Json to_json(const MetricsSeries& series, const PolicyConfig& config, std::uint64_t seed) {
  Json j = summary_json(series, config, seed);
  Json samples = Json::array();
  for (const auto& s : series.samples)
    samples.push_back({{"time", s.time},
                       {"acceptance_rate", s.acceptance_rate},
                       {"active_hw_rate", s.active_hw_rate},
                       {"migrations", s.migrations}});
  j["series"] = samples;
  return j;
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

}  // namespace migsim

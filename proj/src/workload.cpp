#include "migsim/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "migsim/text.hpp"

namespace migsim {

namespace {

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string unquote(std::string_view text) {
  std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
  return t;
}

// Minimal CSV table: header row, comma separated, optional quotes around a
// whole field (no embedded commas), '#' comment lines.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // (line, fields)

  std::optional<std::size_t> column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
  std::size_t require(const std::string& name) const {
    if (auto c = column(name)) return *c;
    throw std::runtime_error(path + ": missing column '" + name + "'");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  CsvTable t{path, {}, {}};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::vector<std::string> fields;
    for (const auto& f : split(s, ',')) fields.push_back(unquote(f));
    if (t.header.empty())
      t.header = std::move(fields);
    else
      t.rows.emplace_back(n, std::move(fields));
  }
  if (t.header.empty()) throw std::runtime_error(path + ": no usable rows");
  return t;
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty list");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> iqr_filter(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double q1 = percentile(values, 0.25), q3 = percentile(values, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;
  std::vector<double> out;
  for (double v : values)
    if (v >= lo && v <= hi) out.push_back(v);
  return out;
}

int combined_value(ProfileId p) { return spec(p).compute_engines * spec(p).size_blocks; }

ProfileId profile_for_normalized_demand(double u_hat) {
  const double max_u = combined_value(ProfileId::k7g40gb);
  ProfileId best = kAllProfiles.front();
  double best_d = INFINITY;
  // Profiles are listed by ascending combined value, so keeping the first on
  // (near-)ties prefers the smaller profile.
  for (ProfileId p : kAllProfiles) {
    const double d = std::abs(combined_value(p) / max_u - u_hat);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

std::optional<ProfileId> map_pod_to_profile(const PodRecord& pod, double max_u) {
  if (!(max_u > 0.0)) throw std::invalid_argument("max demand must be positive");
  const double u = pod.demand();
  if (!(u > 0.0) || u > 1.0) return std::nullopt;
  return profile_for_normalized_demand(u / max_u);
}

Trace load_trace(const std::string& nodes_csv, const std::string& pods_csv, const TraceColumns& columns) {
  Trace trace;
  auto& report = trace.report;
  const auto skip = [&](const CsvTable& t, int line, const std::string& why) {
    report.skipped.push_back(t.path + ":" + std::to_string(line) + ": " + why);
  };

  const CsvTable nodes = read_csv(nodes_csv);
  {
    const auto c_id = nodes.require(columns.node_id), c_gpus = nodes.require(columns.node_gpus);
    const auto c_cpu = nodes.column(columns.node_cpu), c_ram = nodes.column(columns.node_ram);
    for (const auto& [line, f] : nodes.rows) {
      if (f.size() != nodes.header.size()) {
        skip(nodes, line, "expected " + std::to_string(nodes.header.size()) + " fields");
        continue;
      }
      const auto gpus = parse_double(f[c_gpus]);
      if (!gpus || *gpus != std::floor(*gpus) || *gpus < 0 || *gpus > kMaxGpusPerHost) {
        skip(nodes, line, "bad GPU count '" + f[c_gpus] + "'");
        continue;
      }
      if (*gpus == 0) {
        ++report.cpu_only_nodes;
        continue;
      }
      HostSpec h{f[c_id], static_cast<int>(*gpus), 0.0, 0.0, 1.0};
      if (c_cpu) h.cpu_capacity = parse_double(f[*c_cpu]).value_or(0.0);
      if (c_ram) h.ram_capacity = parse_double(f[*c_ram]).value_or(0.0);
      trace.hosts.push_back(std::move(h));
    }
  }
  if (trace.hosts.empty()) throw std::runtime_error(nodes_csv + ": no usable rows");

  const CsvTable pods = read_csv(pods_csv);
  std::vector<PodRecord> records;
  {
    const auto c_id = pods.require(columns.pod_id), c_arr = pods.require(columns.arrival),
               c_dur = pods.require(columns.duration), c_gpus = pods.require(columns.pod_gpus),
               c_frac = pods.require(columns.gpu_fraction);
    const auto c_cpu = pods.column(columns.cpu), c_ram = pods.column(columns.ram);
    for (const auto& [line, f] : pods.rows) {
      if (f.size() != pods.header.size()) {
        skip(pods, line, "expected " + std::to_string(pods.header.size()) + " fields");
        continue;
      }
      PodRecord r;
      r.id = f[c_id];
      const auto arr = parse_double(f[c_arr]), dur = parse_double(f[c_dur]), gpus = parse_double(f[c_gpus]),
                 frac = parse_double(f[c_frac]);
      if (!arr || !dur || !gpus || !frac) {
        skip(pods, line, "non-numeric field");
        continue;
      }
      if (*dur <= 0 || *gpus < 0 || *frac <= 0 || *frac > 1) {
        skip(pods, line, "value out of range");
        continue;
      }
      r.arrival = *arr;
      r.duration = *dur;
      r.gpu_count = *gpus;
      r.gpu_fraction = *frac;
      if (c_cpu) r.cpu = parse_double(f[*c_cpu]);
      if (c_ram) r.ram = parse_double(f[*c_ram]);
      records.push_back(std::move(r));
    }
  }
  if (records.empty()) throw std::runtime_error(pods_csv + ": no usable rows");

  std::vector<double> arrivals;
  for (const auto& r : records) arrivals.push_back(r.arrival);
  const double q1 = percentile(arrivals, 0.25), q3 = percentile(arrivals, 0.75);
  const double lo = q1 - 1.5 * (q3 - q1), hi = q3 + 1.5 * (q3 - q1);

  std::vector<PodRecord> kept;
  for (auto& r : records) {
    if (r.arrival < lo || r.arrival > hi) {
      ++report.outliers;
      continue;
    }
    const double u = r.demand();
    if (!(u > 0.0) || u > 1.0) {
      ++report.excluded;
      continue;
    }
    report.max_u = std::max(report.max_u, u);
    kept.push_back(std::move(r));
  }
  if (kept.empty()) throw std::runtime_error(pods_csv + ": no usable rows");

  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
  const double t0 = kept.front().arrival;
  for (const auto& r : kept) {
    VmRequest vm;
    vm.id = trace.vms.size();
    vm.profile = *map_pod_to_profile(r, report.max_u);
    vm.arrival = r.arrival - t0;
    vm.duration = r.duration;
    vm.cpu = r.cpu;
    vm.ram = r.ram;
    vm.source = r.id;
    trace.vms.push_back(std::move(vm));
  }
  return trace;
}

std::map<ProfileId, double> default_mix() {
  return {{ProfileId::k1g5gb, 0.20},  {ProfileId::k1g10gb, 0.05}, {ProfileId::k2g10gb, 0.10},
          {ProfileId::k3g20gb, 0.08}, {ProfileId::k4g20gb, 0.07}, {ProfileId::k7g40gb, 0.50}};
}

std::vector<VmRequest> synthesize(const SynthesisSpec& s) {
  double total = 0.0;
  for (const auto& [p, w] : s.mix) {
    if (!(w >= 0.0)) throw std::invalid_argument("profile mix has a negative weight");
    total += w;
  }
  if (s.mix.empty() || std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("profile mix must sum to 1");
  if (!(s.rate_per_hour >= 0.0) || !(s.horizon_hours >= 0.0) || !(s.mean_duration_hours > 0.0))
    throw std::invalid_argument("synthesis rate/horizon must be >= 0 and mean duration > 0");

  std::vector<VmRequest> out;
  if (s.rate_per_hour == 0.0) return out;

  std::vector<ProfileId> profiles;
  std::vector<double> weights;
  for (const auto& [p, w] : s.mix) {
    profiles.push_back(p);
    weights.push_back(w);
  }
  std::mt19937_64 rng(s.seed);
  std::exponential_distribution<double> gap(s.rate_per_hour / 3600.0);
  std::exponential_distribution<double> life(1.0 / (s.mean_duration_hours * 3600.0));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const double horizon = s.horizon_hours * 3600.0;
  for (double t = gap(rng); t <= horizon; t += gap(rng)) {
    VmRequest vm;
    vm.id = out.size();
    vm.profile = profiles[pick(rng)];
    vm.arrival = std::round(t);
    vm.duration = std::max(1.0, std::round(life(rng)));
    out.push_back(std::move(vm));
  }
  return out;
}

void write_workload_csv(std::ostream& out, const std::vector<VmRequest>& vms) {
  out << "id,profile,arrival_s,duration_s,weight,cpu,ram,source\n";
  for (const auto& vm : vms) {
    out << vm.id << ',' << name(vm.profile) << ',' << format_number(vm.arrival) << ','
        << format_number(vm.duration) << ',' << format_number(vm.weight) << ','
        << (vm.cpu ? format_number(*vm.cpu) : "") << ',' << (vm.ram ? format_number(*vm.ram) : "") << ','
        << vm.source << '\n';
  }
}

std::vector<VmRequest> read_workload_csv(std::istream& in) {
  std::vector<VmRequest> vms;
  std::string line;
  int n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split(s, ',');
    const auto bad = [&](const std::string& why) {
      return std::runtime_error("workload line " + std::to_string(n) + ": " + why);
    };
    if (f.size() < 4) throw bad("expected at least 4 fields");
    VmRequest vm;
    const auto id = parse_double(f[0]), arr = parse_double(f[2]), dur = parse_double(f[3]);
    if (!id || *id < 0 || !arr || !dur) throw bad("non-numeric field");
    if (*arr < 0 || *dur <= 0) throw bad("arrival must be >= 0 and duration > 0");
    vm.id = static_cast<VmId>(*id);
    vm.profile = profile_from_name(trim(f[1]));
    vm.arrival = *arr;
    vm.duration = *dur;
    if (f.size() > 4) vm.weight = parse_double(f[4]).value_or(1.0);
    if (f.size() > 5) vm.cpu = parse_double(f[5]);
    if (f.size() > 6) vm.ram = parse_double(f[6]);
    if (f.size() > 7) vm.source = trim(f[7]);
    vms.push_back(std::move(vm));
  }
  std::stable_sort(vms.begin(), vms.end(), [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
  return vms;
}

}  // namespace migsim

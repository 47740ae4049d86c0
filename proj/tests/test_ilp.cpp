#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <functional>
#include <random>
#include <fstream>
#include <sstream>

#include "migsim/ilp.hpp"
#include "oracles.hpp"

using namespace migsim;
using namespace migsim::ilp;

namespace {

Vm request(ProfileId p) {
  Vm v;
  v.profile = p;
  return v;
}

Instance one_gpu(std::vector<ProfileId> profiles, int gpus = 1) {
  Instance in;
  for (ProfileId p : profiles) in.vms.push_back(request(p));
  in.pms.push_back({0, 0, 1, std::vector<int>(gpus, kA100HwTag)});
  return in;
}

// Fixed two-VM, one-PM, one-GPU instance; VM 1 was running before.
Instance golden_instance() {
  Instance in;
  in.vms.push_back({ProfileId::k1g5gb, 1.0, 0.0, 2.0, 4.0, std::nullopt});
  in.vms.push_back({ProfileId::k3g20gb, 2.0, 1.0, 8.0, 16.0, GpuSlot{0, 0, 4}});
  in.pms.push_back({16.0, 64.0, 1.0, {kA100HwTag}});
  return in;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

bool has_family(const std::vector<Violation>& v, const std::string& family) {
  for (const auto& x : v)
    if (x.family == family) return true;
  return false;
}

}  // namespace

TEST_CASE("start offsets from z = g*beta, 0 <= z <= s are exactly the legal start blocks") {
  for (int p = 0; p < 6; ++p) {
    const auto& ref = oracle::profiles()[p];
    const ProfileId id = kAllProfiles[p];
    // Literal scan of all block positions.
    std::vector<int> scan;
    for (int z = 0; z < 8; ++z) {
      bool integral = false;
      for (int beta = 0; beta <= 8; ++beta) integral |= (z == ref.size * beta);
      if (integral && z <= spec(id).max_start) scan.push_back(z);
    }
    CHECK(scan == ref.starts);
    CHECK(feasible_offsets(spec(id).size_blocks, spec(id).max_start) == ref.starts);
  }
}

TEST_CASE("model has every variable and constraint family") {
  // 3 VMs, 2 PMs with 2 and 1 GPUs.
  Instance in;
  for (ProfileId p : {ProfileId::k1g5gb, ProfileId::k2g10gb, ProfileId::k4g20gb}) in.vms.push_back(request(p));
  in.pms.push_back({8, 8, 1, {kA100HwTag, kA100HwTag}});
  in.pms.push_back({8, 8, 2, {kA100HwTag}});
  const std::size_t n = 3, m = 2, g = 3;
  const Model model = build_model(in);

  CHECK(model.count(VarFamily::X) == n * m);
  CHECK(model.count(VarFamily::Y) == n * g);
  CHECK(model.count(VarFamily::Z) == n * g);
  CHECK(model.count(VarFamily::Alpha) == n * (n - 1) * g);
  CHECK(model.count(VarFamily::Beta) == n);
  CHECK(model.count(VarFamily::Phi) == m);
  CHECK(model.count(VarFamily::Gamma) == g);
  CHECK(model.count(VarFamily::M) == n * m);
  CHECK(model.count(VarFamily::Omega) == n * g);

  const std::map<int, std::size_t> expected = {
      {4, m},     {5, m},     {6, n},     {7, n},     {8, n * m},     {9, n * g},
      {10, n * (n - 1) * g},  {11, n * (n - 1) * g},  {12, n * g},    {13, n * g},
      {14, n * g}, {15, n * g}, {16, n * g}, {17, n * m}, {18, n * g}, {19, g},
      {20, n * m}, {21, n * m}, {22, n * g}, {23, n * g}};
  std::size_t total = 0;
  for (const auto& [eq, count] : expected) {
    CAPTURE(eq);
    CHECK(model.count_equation(eq) == count);
    total += count;
  }
  CHECK(model.constraints.size() == total);

  CHECK(model.find("x_2_1"));
  CHECK(model.find("y_0_0_1"));
  CHECK(model.find("alpha_0_2_1_0"));
  CHECK(model.find("beta_1"));
  CHECK(model.find("gamma_1_0"));
  CHECK(model.find("omega_2_1_0"));
  CHECK_FALSE(model.find("y_0_1_1"));  // PM 1 has one GPU

  const auto& beta = model.variables[*model.find("beta_0")];
  CHECK(beta.kind == VarKind::Integer);
  CHECK_FALSE(beta.lower);
  const auto& z = model.variables[*model.find("z_0_0_0")];
  CHECK(z.lower == 0.0);
  CHECK_FALSE(z.upper);

  CHECK(model.objectives[0].maximize);
  CHECK_FALSE(model.objectives[1].maximize);
  CHECK_FALSE(model.objectives[2].maximize);
}

TEST_CASE("instance checks") {
  Instance in = one_gpu({ProfileId::k7g40gb});
  in.big_m = 15;  // needs 8 + 8
  CHECK_THROWS_AS(build_model(in), std::invalid_argument);
  in.big_m = 16;
  CHECK_NOTHROW(build_model(in));

  Instance mig = one_gpu({ProfileId::k1g5gb});
  mig.vms[0].migration_weight = 1.0;
  CHECK_THROWS_AS(build_model(mig), std::invalid_argument);
  mig.vms[0].previous = GpuSlot{0, 3, 0};
  CHECK_THROWS_AS(build_model(mig), std::invalid_argument);
  mig.vms[0].previous = GpuSlot{0, 0, 0};
  CHECK_NOTHROW(build_model(mig));
}

TEST_CASE("LP export matches the golden file") {
  const Model model = build_model(golden_instance());
  const std::string weighted = export_lp(model, WeightedObjective{1, 1, 1});
  const std::string staged = export_lp(model, StageObjective{3, {3.0, 2.0}});
  const std::string dir = std::string(MIGSIM_TEST_DATA) + "/../golden/";
  if (std::getenv("MIGSIM_UPDATE_GOLDEN")) {
    std::ofstream(dir + "two_vm_weighted.lp") << weighted;
    std::ofstream(dir + "two_vm_stage3.lp") << staged;
  }
  CHECK(weighted == read_file(dir + "two_vm_weighted.lp"));
  CHECK(staged == read_file(dir + "two_vm_stage3.lp"));

  CHECK(staged.find("fix_acceptance: 1 x_0_0 + 2 x_1_0 = 3") != std::string::npos);
  CHECK(staged.find("fix_hardware:") != std::string::npos);
  CHECK_THROWS_AS(export_lp(model, StageObjective{2, {}}), std::invalid_argument);
  CHECK_THROWS_AS(export_lp(model, StageObjective{4, {1, 2, 3}}), std::invalid_argument);
}

TEST_CASE("validate flags each corrupted family") {
  const Instance in = golden_instance();
  const Solution good = Solution::from_assignments({GpuSlot{0, 0, 0}, GpuSlot{0, 0, 4}});
  CHECK(validate(in, good).empty());
  const auto v = evaluate(in, good);
  CHECK(v.acceptance == 3.0);
  CHECK(v.hardware == 2.0);  // PM and its GPU
  CHECK(v.migration == 0.0);

  SUBCASE("overlap") {
    Solution s = good;
    s.y[{0, 0, 0}] = 4;
    CHECK(has_family(validate(in, s), "eq10/11"));
  }
  SUBCASE("start offset not a multiple of the size") {
    Solution s = good;
    s.y[{1, 0, 0}] = 2;
    const auto bad = validate(in, s);
    CHECK(has_family(bad, "eq12/13"));
  }
  SUBCASE("start past the last legal offset") {
    Solution s = Solution::from_assignments({GpuSlot{0, 0, 7}, std::nullopt});
    CHECK(has_family(validate(in, s), "eq14"));
  }
  SUBCASE("y without x and x without y") {
    Solution s = good;
    s.x.erase({1, 0});
    CHECK(has_family(validate(in, s), "eq9"));
    Solution t = good;
    t.y.erase({1, 0, 0});
    CHECK(has_family(validate(in, t), "eq8"));
  }
  SUBCASE("host capacity") {
    Instance tight = in;
    tight.pms[0].cpu_capacity = 9.0;
    tight.pms[0].ram_capacity = 19.0;
    const auto bad = validate(tight, good);
    CHECK(has_family(bad, "eq4"));
    CHECK(has_family(bad, "eq5"));
  }
  SUBCASE("hardware tag") {
    Instance other = in;
    other.pms[0].gpu_tags[0] = 7;
    CHECK(has_family(validate(other, good), "eq15/16"));
  }
  SUBCASE("activity indicators") {
    Solution s = good;
    s.phi = std::vector<int>{0};
    s.gamma = std::vector<std::vector<int>>{{0}};
    const auto bad = validate(in, s);
    CHECK(has_family(bad, "eq17"));
    CHECK(has_family(bad, "eq18"));
    Solution idle = Solution::from_assignments({std::nullopt, std::nullopt});
    idle.gamma = std::vector<std::vector<int>>{{1}};
    CHECK(has_family(validate(in, idle), "eq19"));
  }
  SUBCASE("unknown entities") {
    Solution s = good;
    s.x.insert({5, 0});
    CHECK_THROWS_AS(validate(in, s), std::invalid_argument);
  }
}

TEST_CASE("migration objective counts PM and GPU changes") {
  Instance in = golden_instance();
  in.pms[0].gpu_tags.push_back(kA100HwTag);
  const auto moved = evaluate(in, Solution::from_assignments({GpuSlot{0, 0, 0}, GpuSlot{0, 1, 0}}));
  CHECK(moved.migration == 2.0);  // omega on both GPUs
  const auto dropped = evaluate(in, Solution::from_assignments({GpuSlot{0, 0, 0}, std::nullopt}));
  CHECK(dropped.migration == 2.0);  // m and omega
}

TEST_CASE("exhaustive solve: eight 1g.5gb requests on one GPU") {
  const Instance in = one_gpu(std::vector<ProfileId>(8, ProfileId::k1g5gb));
  const Solution s = brute_force_solve(in);
  CHECK(validate(in, s).empty());
  CHECK(s.x.size() == 7);
  CHECK(s.objectives.acceptance == 7.0);
  CHECK(s.objectives.hardware == 2.0);
  CHECK_FALSE(s.accepted(7));  // first optimum in enumeration order
}

TEST_CASE("exhaustive solve prefers fewer active GPUs") {
  // Two 3g.20gb fit on one GPU; the second GPU should stay off.
  const Instance in = one_gpu({ProfileId::k3g20gb, ProfileId::k3g20gb}, 2);
  const Solution s = brute_force_solve(in);
  CHECK(s.objectives.acceptance == 2.0);
  CHECK(s.objectives.hardware == 2.0);
  CHECK(s.slot(0)->gpu == s.slot(1)->gpu);

  // Weighted with a large hardware weight: rejecting everything wins.
  const Solution w = brute_force_solve(in, WeightedObjective{1, 10, 1});
  CHECK(w.x.empty());
}

TEST_CASE("exhaustive solve agrees with a naive enumeration on small instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Instance in;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) in.vms.push_back(request(kAllProfiles[rng() % 6]));
    in.pms.push_back({0, 0, 1, {kA100HwTag, kA100HwTag}});
    const Solution s = brute_force_solve(in);
    CHECK(validate(in, s).empty());

    // Naive: every combination of (reject | gpu, start), scored with the
    // oracle's masks.
    double best_acc = -1, best_hw = 1e9;
    std::vector<std::pair<int, int>> choice(n, {-1, 0});
    std::function<void(int, std::array<std::uint8_t, 2>)> go = [&](int i, std::array<std::uint8_t, 2> used) {
      if (i == n) {
        double acc = 0;
        for (const auto& c : choice) acc += c.first >= 0;
        const int gpus = (used[0] != 0) + (used[1] != 0);
        const double hw = gpus > 0 ? 1 + gpus : 0;
        if (acc > best_acc || (acc == best_acc && hw < best_hw)) best_acc = acc, best_hw = hw;
        return;
      }
      choice[i] = {-1, 0};
      go(i + 1, used);
      const auto& ref = oracle::profiles()[index_of(in.vms[i].profile)];
      for (int k = 0; k < 2; ++k)
        for (int st : ref.starts) {
          const auto bits = oracle::mask(st, ref.size);
          if (used[k] & bits) continue;
          auto next = used;
          next[k] |= bits;
          choice[i] = {k, st};
          go(i + 1, next);
        }
    };
    go(0, {0, 0});
    CHECK(s.objectives.acceptance == best_acc);
    CHECK(s.objectives.hardware == best_hw);
  }
}

TEST_CASE("size limits") {
  CHECK_THROWS_AS(brute_force_solve(one_gpu(std::vector<ProfileId>(9, ProfileId::k1g5gb))), SizeLimitError);
  Instance wide = one_gpu({ProfileId::k1g5gb}, 3);
  CHECK_THROWS_AS(brute_force_solve(wide), SizeLimitError);
  // Eight small requests over four GPUs: within the VM cap, too many leaves.
  Instance big = one_gpu(std::vector<ProfileId>(8, ProfileId::k1g5gb), 2);
  big.pms.push_back(big.pms.front());
  CHECK_THROWS_AS(brute_force_solve(big), SizeLimitError);
  SearchLimits tiny;
  tiny.max_vms = 1;
  CHECK_THROWS_AS(brute_force_solve(one_gpu({ProfileId::k1g5gb, ProfileId::k1g5gb}), Lexicographic{}, tiny),
                  SizeLimitError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "migsim/sim.hpp"
#include "migsim/workload.hpp"

using namespace migsim;

namespace {

std::vector<HostSpec> hosts(int count, int gpus) {
  std::vector<HostSpec> out;
  for (int i = 0; i < count; ++i) out.push_back({"h" + std::to_string(i), gpus, 64, 256, 1});
  return out;
}

VmRequest vm(VmId id, ProfileId p, double arrival, double duration) {
  VmRequest r;
  r.id = id;
  r.profile = p;
  r.arrival = arrival;
  r.duration = duration;
  return r;
}

Scenario scenario(PolicyKind kind, std::vector<HostSpec> hs, std::vector<VmRequest> vms) {
  Scenario s;
  s.hosts = std::move(hs);
  s.vms = std::move(vms);
  s.policy.kind = kind;
  return s;
}

std::vector<VmRequest> synthetic(std::uint64_t seed, double rate, double hours) {
  SynthesisSpec s;
  s.mix = default_mix();
  s.rate_per_hour = rate;
  s.horizon_hours = hours;
  s.mean_duration_hours = 6;
  s.seed = seed;
  return synthesize(s);
}

}  // namespace

TEST_CASE("empty workload") {
  const auto m = run(scenario(PolicyKind::FF, hosts(1, 2), {}));
  REQUIRE(m.samples.size() == 1);
  CHECK(m.samples[0].acceptance_rate == 1.0);
  CHECK(m.samples[0].active_hw_rate == 0.0);
  CHECK_FALSE(m.summary.acceptance_defined);
  CHECK(m.summary.acceptance_rate == 1.0);
  CHECK(m.summary.ticks == 1);
}

TEST_CASE("single full-GPU request under first fit") {
  const auto m = run(scenario(PolicyKind::FF, hosts(1, 1), {vm(0, ProfileId::k7g40gb, 0, 7200)}));
  CHECK(m.summary.accepted == 1);
  CHECK(m.summary.acceptance_defined);
  // Resident during ticks 0 and 1, gone at tick 2.
  REQUIRE(m.samples.size() == 3);
  CHECK(m.samples[0].active_hw_rate == 1.0);
  CHECK(m.samples[1].active_hw_rate == 1.0);
  CHECK(m.samples[2].active_hw_rate == 0.0);
  CHECK(m.summary.auc == doctest::Approx(2.0));
  CHECK(m.summary.mean_active_hw_rate == doctest::Approx(2.0 / 3));
}

TEST_CASE("eight small requests on one GPU: seven fit") {
  std::vector<VmRequest> vms;
  for (VmId i = 0; i < 8; ++i) vms.push_back(vm(i, ProfileId::k1g5gb, 0, 3600));
  for (PolicyKind k : {PolicyKind::FF, PolicyKind::BF, PolicyKind::MCC, PolicyKind::MECC}) {
    const auto m = run(scenario(k, hosts(1, 1), vms));
    CHECK(m.summary.accepted == 7);
    CHECK(m.summary.rejected == 1);
    CHECK(m.per_profile[index_of(ProfileId::k1g5gb)].total == 8);
  }
}

TEST_CASE("active hardware counts every GPU of a busy host") {
  auto c = ClusterState::init(hosts(2, 4), PoolMode::Single);
  CHECK(active_hardware_rate(c) == 0.0);
  VmRequest r = vm(1, ProfileId::k1g5gb, 0, 1);
  c.place(r, 1);
  CHECK(active_hardware_rate(c) == 0.5);
  r.id = 2;
  c.place(r, 4);
  CHECK(active_hardware_rate(c) == 1.0);
}

TEST_CASE("residency rounds up to whole ticks") {
  // 1 s, 3600 s and 3601 s stays leave after 1, 1 and 2 ticks.
  std::vector<VmRequest> vms = {vm(0, ProfileId::k7g40gb, 0, 1), vm(1, ProfileId::k7g40gb, 0, 3600),
                                vm(2, ProfileId::k7g40gb, 0, 3601)};
  std::vector<std::size_t> resident;
  run(scenario(PolicyKind::FF, hosts(1, 3), vms),
      [&](const TickEvent& e) { resident.push_back(e.cluster.residency().size()); });
  CHECK(resident == std::vector<std::size_t>{3, 1, 0});
}

TEST_CASE("arrivals inside a tick wait for the next tick boundary") {
  std::vector<VmRequest> vms = {vm(0, ProfileId::k1g5gb, 10, 60), vm(1, ProfileId::k1g5gb, 3600, 60)};
  std::vector<std::size_t> batch_sizes;
  run(scenario(PolicyKind::FF, hosts(1, 1), vms),
      [&](const TickEvent& e) { batch_sizes.push_back(e.decisions.size()); });
  REQUIRE(batch_sizes.size() >= 2);
  CHECK(batch_sizes[0] == 0);
  CHECK(batch_sizes[1] == 2);
}

TEST_CASE("sampling period") {
  Scenario s = scenario(PolicyKind::FF, hosts(1, 1), {vm(0, ProfileId::k7g40gb, 0, 5 * 3600)});
  s.sample_seconds = 2 * 3600;
  const auto m = run(s);
  REQUIRE(m.samples.size() == 4);  // t = 0, 2h, 4h, 6h
  CHECK(m.samples[3].time == 6 * 3600);
  s.sample_seconds = 5400;
  CHECK_THROWS_AS(run(s), std::invalid_argument);
}

TEST_CASE("scenario validation") {
  Scenario s = scenario(PolicyKind::FF, hosts(1, 1), {vm(0, ProfileId::k1g5gb, 10, 1), vm(1, ProfileId::k1g5gb, 5, 1)});
  CHECK_THROWS_AS(run(s), std::invalid_argument);
  s.vms = {vm(0, ProfileId::k1g5gb, 0, 1), vm(0, ProfileId::k1g5gb, 5, 1)};
  CHECK_THROWS_AS(run(s), std::invalid_argument);
  s.vms = {vm(0, ProfileId::k1g5gb, 0, 0)};
  CHECK_THROWS_AS(run(s), std::invalid_argument);
  s.vms.clear();
  s.hosts.clear();
  CHECK_THROWS_AS(run(s), std::invalid_argument);
}

TEST_CASE("property: runs are deterministic and conserve requests") {
  const auto vms = synthetic(12, 6, 24);
  for (PolicyKind k : {PolicyKind::FF, PolicyKind::BF, PolicyKind::MCC, PolicyKind::MECC, PolicyKind::GRMU}) {
    CAPTURE(name(k));
    Scenario s = scenario(k, hosts(2, 4), vms);
    s.policy.consolidation_interval_hours = 4;
    std::size_t checked = 0;
    const auto a = run(s, [&](const TickEvent& e) {
      e.cluster.check_invariants();
      ++checked;
    });
    const auto b = run(s);
    CHECK(checked == a.summary.ticks);
    CHECK(a.summary.accepted + a.summary.rejected == vms.size());
    CHECK(a.summary.arrivals == vms.size());
    CHECK(a.summary.accepted == b.summary.accepted);
    CHECK(a.summary.auc == b.summary.auc);
    CHECK(a.summary.migrations == b.summary.migrations);
    CHECK(a.summary.migrations == a.summary.intra_migrations + a.summary.inter_migrations);
    REQUIRE(a.samples.size() == b.samples.size());
    std::size_t total = 0;
    for (const auto& c : a.per_profile) total += c.total;
    CHECK(total == vms.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(a.samples[i].acceptance_rate == b.samples[i].acceptance_rate);
      CHECK(a.samples[i].active_hw_rate >= 0.0);
      CHECK(a.samples[i].active_hw_rate <= 1.0);
      if (i) CHECK(a.samples[i].migrations >= a.samples[i - 1].migrations);
    }
    if (k != PolicyKind::GRMU) CHECK(a.summary.migrations == 0);
  }
}

TEST_CASE("GRMU without rejections or consolidation never migrates") {
  // Plenty of room: nothing is rejected, so defragmentation never runs.
  Scenario s = scenario(PolicyKind::GRMU, hosts(4, 8), synthetic(3, 1, 12));
  const auto m = run(s);
  REQUIRE(m.summary.rejected == 0);
  CHECK(m.summary.migrations == 0);
}

TEST_CASE("acceptance never beats the one-shot upper bound") {
  // Upper bound: total 7-slice demand over the whole run cannot exceed
  // capacity when everything arrives at once and stays.
  std::vector<VmRequest> vms;
  for (VmId i = 0; i < 20; ++i) vms.push_back(vm(i, kAllProfiles[i % 6], 0, 1e6));
  for (PolicyKind k : {PolicyKind::FF, PolicyKind::BF, PolicyKind::MCC, PolicyKind::MECC, PolicyKind::GRMU}) {
    const auto m = run(scenario(k, hosts(1, 2), vms));
    std::size_t blocks = 0;
    std::size_t accepted = 0;
    for (std::size_t p = 0; p < kAllProfiles.size(); ++p) {
      blocks += m.per_profile[p].accepted * static_cast<std::size_t>(spec(kAllProfiles[p]).size_blocks);
      accepted += m.per_profile[p].accepted;
    }
    CHECK(blocks <= 16);
    CHECK(accepted == m.summary.accepted);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <random>

#include "migsim/cluster.hpp"
#include "oracles.hpp"

using namespace migsim;

namespace {

std::vector<HostSpec> hosts(std::vector<int> gpus) {
  std::vector<HostSpec> out;
  for (std::size_t i = 0; i < gpus.size(); ++i) out.push_back({"h" + std::to_string(i), gpus[i], 64, 256, 1});
  return out;
}

VmRequest vm(VmId id, ProfileId p) {
  VmRequest r;
  r.id = id;
  r.profile = p;
  return r;
}

std::uint8_t free_mask(const GpuState& g) { return g.free_blocks().bits(); }

std::multiset<ProfileId> profiles_on(const ClusterState& c) {
  std::multiset<ProfileId> out;
  for (const auto& [id, r] : c.residency()) out.insert(r.profile);
  return out;
}

}  // namespace

TEST_CASE("init lays out global indices host-major") {
  const auto c = ClusterState::init(hosts({2, 3}), PoolMode::Single);
  CHECK(c.gpu_count() == 5);
  CHECK(c.host_of(0) == 0);
  CHECK(c.host_of(2) == 1);
  CHECK(c.gpus_of_host(1) == std::vector<int>{2, 3, 4});
  CHECK(c.pool() == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(c.heavy_basket().empty());
  CHECK(c.light_basket().empty());
  CHECK(c.active_gpu_count() == 0);
  CHECK_NOTHROW(c.check_invariants());
}

TEST_CASE("dual-basket init seeds one GPU per basket") {
  const auto c = ClusterState::init(hosts({4, 4}), PoolMode::DualBasket);
  CHECK(c.heavy_basket() == std::vector<int>{0});
  CHECK(c.light_basket() == std::vector<int>{1});
  CHECK(c.pool().size() == 6);
  CHECK(c.pool().front() == 2);
  CHECK(c.basket_of(0) == Basket::Heavy);
  CHECK(c.basket_of(7) == Basket::Pool);
}

TEST_CASE("init rejects bad host lists") {
  CHECK_THROWS_AS(ClusterState::init({}, PoolMode::Single), std::invalid_argument);
  CHECK_THROWS_AS(ClusterState::init(hosts({0}), PoolMode::Single), std::invalid_argument);
  CHECK_THROWS_AS(ClusterState::init(hosts({9}), PoolMode::Single), std::invalid_argument);
  CHECK_THROWS_AS(ClusterState::init(hosts({1}), PoolMode::DualBasket), std::invalid_argument);
  CHECK_NOTHROW(ClusterState::init(hosts({1, 1}), PoolMode::DualBasket));
}

TEST_CASE("pool moves keep lists sorted") {
  auto c = ClusterState::init(hosts({4}), PoolMode::Single);
  CHECK(c.take_from_pool() == 0);
  c.move_gpu(3, Basket::Light);
  c.move_gpu(2, Basket::Light);
  CHECK(c.light_basket() == std::vector<int>{2, 3});
  CHECK(c.pool() == std::vector<int>{1});
  c.move_gpu(2, Basket::Pool);
  CHECK(c.pool() == std::vector<int>{1, 2});
}

TEST_CASE("intra-GPU migration moves a lone 1g.5gb to the CC-maximising block") {
  auto c = ClusterState::init(hosts({1}), PoolMode::Single);
  c.place(vm(1, ProfileId::k1g5gb), 0);
  c.place(vm(2, ProfileId::k1g5gb), 0);
  c.release_vm(1);  // leaves VM 2 alone at block 4
  REQUIRE(c.residency().at(2).start == 4);
  const int before = get_cc(c.gpu(0));
  CHECK(before == oracle::cc(static_cast<std::uint8_t>(~(1u << 4))));

  c.intra_migrate({2}, 0, {6}, 3600.0);
  CHECK(c.residency().at(2).start == 6);
  CHECK(get_cc(c.gpu(0)) == oracle::cc(static_cast<std::uint8_t>(~(1u << 6))));
  CHECK(get_cc(c.gpu(0)) > before);
  REQUIRE(c.migration_log().size() == 1);
  CHECK(c.migration_log()[0].kind == MigrationKind::Intra);
  CHECK(c.migration_log()[0].time == 3600.0);

  c.intra_migrate({}, 0, {}, 0.0);
  CHECK(c.migration_log().size() == 1);
  c.check_invariants();
}

TEST_CASE("intra-GPU migration to an illegal target changes nothing") {
  auto c = ClusterState::init(hosts({1}), PoolMode::Single);
  c.place(vm(1, ProfileId::k1g5gb), 0);  // block 6
  c.place(vm(2, ProfileId::k2g10gb), 0);
  const GpuState before = c.gpu(0);
  const int start2 = c.residency().at(2).start;
  CHECK_THROWS_AS(c.intra_migrate({1}, 0, {start2}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(c.intra_migrate({1}, 0, {7}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(c.intra_migrate({1, 2}, 0, {0}, 0.0), std::invalid_argument);
  CHECK(c.gpu(0) == before);
  CHECK(c.migration_log().empty());
  // Swapping two GIs is legal because all leave before any lands.
  const int other = start2 == 4 ? 0 : 4;
  c.intra_migrate({1, 2}, 0, {start2, other}, 0.0);
  CHECK(c.residency().at(1).start == start2);
  CHECK(c.residency().at(2).start == other);
  CHECK(c.migration_log().size() == 2);
  c.check_invariants();
}

TEST_CASE("inter-GPU migration of a lower-half 3g.20gb lands at block 4") {
  auto c = ClusterState::init(hosts({2}), PoolMode::Single);
  c.place(vm(1, ProfileId::k4g20gb), 1);   // destination: lower half taken
  c.place(vm(2, ProfileId::k3g20gb), 0);   // lands at 4 on an empty GPU
  c.intra_migrate({2}, 0, {0}, 0.0);       // move it to the lower half
  REQUIRE(c.residency().at(2).start == 0);
  CHECK(c.can_inter_migrate(0, 1));
  c.inter_migrate(0, 1, 7200.0);
  CHECK(c.gpu(0).empty());
  CHECK(c.residency().at(2).gpu == 1);
  CHECK(c.residency().at(2).start == 4);
  CHECK(c.migration_log().back().kind == MigrationKind::Inter);
  c.check_invariants();
}

TEST_CASE("inter-GPU migration aborts atomically when something does not fit") {
  auto c = ClusterState::init(hosts({2}), PoolMode::Single);
  c.place(vm(1, ProfileId::k4g20gb), 0);
  c.place(vm(2, ProfileId::k4g20gb), 1);
  const auto before = c.residency().size();
  CHECK_FALSE(c.can_inter_migrate(0, 1));
  CHECK_THROWS_AS(c.inter_migrate(0, 1, 0.0), std::invalid_argument);
  CHECK(c.residency().size() == before);
  CHECK(c.residency().at(1).gpu == 0);
  CHECK(c.migration_log().empty());

  // Empty source: nothing to do.
  auto d = ClusterState::init(hosts({2}), PoolMode::Single);
  CHECK(d.can_inter_migrate(0, 1));
  d.inter_migrate(0, 1, 0.0);
  CHECK(d.migration_log().empty());
}

TEST_CASE("inter-host migration respects host limits in strict mode") {
  std::vector<HostSpec> hs = {{"a", 1, 8, 8, 1}, {"b", 1, 4, 4, 1}};
  auto c = ClusterState::init(hs, PoolMode::Single);
  c.set_strict_host_capacity(true);
  VmRequest r = vm(1, ProfileId::k1g5gb);
  r.cpu = 6;
  r.ram = 1;
  CHECK(c.place(r, 0));
  CHECK_FALSE(c.can_inter_migrate(0, 1));
  CHECK_FALSE(c.probe(r, 1));
  c.set_strict_host_capacity(false);
  CHECK(c.can_inter_migrate(0, 1));
}

TEST_CASE("release frees blocks but keeps membership") {
  auto c = ClusterState::init(hosts({2}), PoolMode::DualBasket);
  c.place(vm(1, ProfileId::k7g40gb), 0);
  CHECK(c.active_gpu_count() == 1);
  c.release_vm(1);
  CHECK(c.gpu(0).free_blocks() == BlockSet::all());
  CHECK(c.basket_of(0) == Basket::Heavy);
  CHECK_FALSE(c.is_resident(1));
  CHECK_THROWS_AS(c.release_vm(1), std::out_of_range);
}

TEST_CASE("property: random operations preserve the cluster invariants") {
  std::mt19937_64 rng(2024);
  auto c = ClusterState::init(hosts({3, 2, 3}), PoolMode::DualBasket);
  VmId next = 0;
  std::size_t placed = 0, released = 0;
  for (int step = 0; step < 1000; ++step) {
    const auto op = rng() % 6;
    const int g = static_cast<int>(rng() % c.gpu_count());
    if (op <= 1) {
      const ProfileId p = kAllProfiles[rng() % kProfileCount];
      const auto expect = best_start(p, c.gpu(g).free_blocks());
      const auto got = c.place(vm(next++, p), g);
      CHECK(got == expect);
      placed += got.has_value();
    } else if (op == 2 && !c.residency().empty()) {
      auto it = c.residency().begin();
      std::advance(it, static_cast<long>(rng() % c.residency().size()));
      c.release_vm(it->first);
      ++released;
    } else if (op == 3) {
      const int h = static_cast<int>(rng() % c.gpu_count());
      if (h == g) continue;
      const auto profiles = profiles_on(c);
      const auto src = c.gpu(g).gi_count();
      const bool ok = c.can_inter_migrate(g, h);
      if (ok) {
        c.inter_migrate(g, h, step);
        CHECK(c.gpu(g).empty());
        CHECK(c.gpu(h).gi_count() >= src);
      } else {
        const auto snapshot = c.gpus();
        CHECK_THROWS(c.inter_migrate(g, h, step));
        CHECK(c.gpus() == snapshot);
      }
      CHECK(profiles_on(c) == profiles);
    } else if (op == 4 && !c.gpu(g).empty()) {
      // Re-lay the GPU from scratch in replay order; always legal.
      const auto order = replay_order(c.gpu(g));
      GpuState mock;
      std::vector<VmId> vms;
      std::vector<int> starts;
      for (const auto& [gi, p] : order) {
        const auto s = assign(p, gi, mock);
        if (!s) break;
        vms.push_back(gi);
        starts.push_back(*s);
      }
      if (vms.size() == order.size()) {
        const auto profiles = profiles_on(c);
        c.intra_migrate(vms, g, starts, step);
        CHECK(free_mask(c.gpu(g)) == free_mask(mock));
        CHECK(profiles_on(c) == profiles);
      }
    } else if (op == 5) {
      const auto b = static_cast<Basket>(rng() % 3);
      c.move_gpu(g, b);
      CHECK(c.basket_of(g) == b);
    }
    c.check_invariants();
  }
  CHECK(c.residency().size() == placed - released);
  std::size_t gis = 0;
  for (const auto& gpu : c.gpus()) gis += gpu.gi_count();
  CHECK(gis == c.residency().size());
  CHECK(c.pool().size() + c.heavy_basket().size() + c.light_basket().size() ==
        static_cast<std::size_t>(c.gpu_count()));
}

TEST_CASE("replay order: larger first, then VM id") {
  GpuState g;
  g.place_at(5, ProfileId::k1g5gb, 0);
  g.place_at(3, ProfileId::k1g10gb, 2);
  g.place_at(4, ProfileId::k3g20gb, 4);
  g.place_at(2, ProfileId::k1g5gb, 1);
  const auto order = replay_order(g);
  REQUIRE(order.size() == 4);
  CHECK(order[0].first == 4);
  CHECK(order[1].first == 3);
  CHECK(order[2].first == 2);
  CHECK(order[3].first == 5);
}

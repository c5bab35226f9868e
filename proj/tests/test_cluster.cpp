#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "trajan/cluster.hpp"
#include "trajan/synth.hpp"

using namespace trajan;
using namespace trajan::cluster;

namespace {

std::vector<LatLon> blob(synth::Rng& rng, LatLon centre, double spread_m, int n) {
  const LocalFrame f(centre);
  std::vector<LatLon> out;
  for (int i = 0; i < n; ++i) out.push_back(f.to_latlon({rng.normal(0, spread_m), rng.normal(0, spread_m)}));
  return out;
}

std::vector<LatLon> uniform_box(synth::Rng& rng, LatLon centre, double half_m, int n) {
  const LocalFrame f(centre);
  std::vector<LatLon> out;
  for (int i = 0; i < n; ++i) out.push_back(f.to_latlon({rng.uniform(-half_m, half_m), rng.uniform(-half_m, half_m)}));
  return out;
}

// Reference DBSCAN from the full distance matrix: clusters are connected
// components of core points; borders attach to any core within eps.
struct Reference {
  std::vector<bool> core;
  std::vector<int> component;  // for core points
  std::vector<std::set<int>> allowed;  // admissible clusters for border points
};

Reference reference_dbscan(const std::vector<LatLon>& pts, double eps, std::size_t min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  Reference ref;
  ref.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      near[i][j] = haversine(pts[i], pts[j]) <= eps;
      count += near[i][j];
    }
    ref.core[i] = count >= min_pts;
  }
  ref.component.assign(n, -1);
  int comp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ref.core[i] || ref.component[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    ref.component[i] = comp;
    while (!stack.empty()) {
      const auto a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (ref.core[b] && near[a][b] && ref.component[b] < 0) {
          ref.component[b] = comp;
          stack.push_back(b);
        }
      }
    }
    ++comp;
  }
  ref.allowed.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (ref.core[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (ref.core[j] && near[i][j]) ref.allowed[i].insert(ref.component[j]);
    }
  }
  return ref;
}

// Checks a labeling against the reference up to cluster-id permutation.
void check_against_reference(const ClusterLabeling& lab, const Reference& ref) {
  const std::size_t n = ref.core.size();
  std::map<int, int> to_ref, from_ref;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK((lab.role[i] == Role::Core) == ref.core[i]);
    if (!ref.core[i]) continue;
    auto [it, fresh] = to_ref.emplace(lab.label[i], ref.component[i]);
    CHECK(it->second == ref.component[i]);
    auto [jt, fresh2] = from_ref.emplace(ref.component[i], lab.label[i]);
    CHECK(jt->second == lab.label[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ref.core[i]) continue;
    if (ref.allowed[i].empty()) {
      CHECK(lab.label[i] == kNoise);
      CHECK(lab.role[i] == Role::Noise);
    } else {
      CHECK(lab.role[i] == Role::Border);
      REQUIRE(to_ref.count(lab.label[i]) == 1);
      CHECK(ref.allowed[i].count(to_ref[lab.label[i]]) == 1);
    }
  }
}

}  // namespace

TEST_CASE("parameter and input validation") {
  const std::vector<LatLon> none;
  CHECK_THROWS_AS(dbscan(std::span<const LatLon>(none), ClusterParams{}), DomainError);
  CHECK_THROWS_AS(optics(std::span<const LatLon>(none), 5, 100), DomainError);
  const std::vector<LatLon> one{{38.9, -76.9}};
  CHECK_THROWS_AS(dbscan(std::span<const LatLon>(one), ClusterParams{0, 5}), DomainError);
  CHECK_THROWS_AS(dbscan(std::span<const LatLon>(one), ClusterParams{10, 0}), DomainError);
  const auto ord = optics(std::span<const LatLon>(one), 1, 100);
  CHECK_THROWS_AS(extract_clusters(ord, 0), DomainError);
}

TEST_CASE("identical points form one all-core cluster") {
  const std::vector<LatLon> pts(12, LatLon{38.9, -76.9});
  const auto lab = dbscan(std::span<const LatLon>(pts), ClusterParams{10, 12});
  CHECK(lab.n_clusters == 1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(lab.label[i] == 0);
    CHECK(lab.role[i] == Role::Core);
  }
}

TEST_CASE("two blobs ten eps apart") {
  synth::Rng rng(1);
  const double eps = 300;
  const LatLon a{38.9, -76.9};
  auto pts = uniform_box(rng, a, 150, 50);
  const auto b = uniform_box(rng, destination_point(a, 90, 10 * eps), 150, 50);
  pts.insert(pts.end(), b.begin(), b.end());
  const auto lab = dbscan(std::span<const LatLon>(pts), ClusterParams{eps, 5});
  CHECK(lab.n_clusters == 2);
  CHECK(lab.noise_count() == 0);
  for (int i = 0; i < 50; ++i) CHECK(lab.label[i] == 0);
  for (int i = 50; i < 100; ++i) CHECK(lab.label[i] == 1);
}

TEST_CASE("dbscan matches a brute-force reference") {
  synth::Rng rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 200));
    std::vector<LatLon> pts;
    const int blobs = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(rng.uniform_int(0, blobs));
      if (k == blobs) {
        const auto p = uniform_box(rng, {38.9, -76.9}, 3000, 1);
        pts.push_back(p[0]);
      } else {
        const LatLon c = destination_point({38.9, -76.9}, 72.0 * k, 1500.0 * k);
        pts.push_back(blob(rng, c, 250, 1)[0]);
      }
    }
    const ClusterParams p{rng.uniform(50, 500), static_cast<std::size_t>(rng.uniform_int(1, 8))};
    const auto lab = dbscan(std::span<const LatLon>(pts), p);
    check_against_reference(lab, reference_dbscan(pts, p.eps, p.min_pts));
  }
}

TEST_CASE("shuffling changes only ids and border ties") {
  synth::Rng rng(3);
  auto pts = blob(rng, {38.9, -76.9}, 400, 150);
  const auto extra = blob(rng, {38.92, -76.88}, 300, 100);
  pts.insert(pts.end(), extra.begin(), extra.end());
  const ClusterParams p{150, 6};
  const auto base = dbscan(std::span<const LatLon>(pts), p);
  std::vector<std::size_t> perm(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
  }
  std::vector<LatLon> shuffled;
  for (auto i : perm) shuffled.push_back(pts[i]);
  const auto lab = dbscan(std::span<const LatLon>(shuffled), p);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK((lab.role[k] == Role::Core) == (base.role[perm[k]] == Role::Core));
    CHECK((lab.role[k] == Role::Noise) == (base.role[perm[k]] == Role::Noise));
  }
  CHECK(lab.n_clusters == base.n_clusters);
}

TEST_CASE("larger eps never adds noise") {
  synth::Rng rng(4);
  const auto pts = uniform_box(rng, {38.9, -76.9}, 2000, 300);
  std::size_t prev = pts.size() + 1;
  for (double eps : {20.0, 50.0, 100.0, 150.0, 250.0, 400.0, 800.0}) {
    const auto lab = dbscan(std::span<const LatLon>(pts), ClusterParams{eps, 5});
    CHECK(lab.noise_count() <= prev);
    prev = lab.noise_count();
  }
}

TEST_CASE("optics on a single point") {
  const std::vector<LatLon> one{{38.9, -76.9}};
  const auto ord = optics(std::span<const LatLon>(one), 5, 1000);
  REQUIRE(ord.order == std::vector<std::size_t>{0});
  CHECK(ord.reachability[0] == kUndefined);
}

TEST_CASE("optics ordering is a permutation with a two-valley plot") {
  synth::Rng rng(5);
  const LatLon a{38.9, -76.9};
  auto pts = blob(rng, a, 100, 60);
  const auto b = blob(rng, destination_point(a, 45, 3000), 100, 60);
  pts.insert(pts.end(), b.begin(), b.end());
  const auto ord = optics(std::span<const LatLon>(pts), 5, 5000);
  REQUIRE(ord.order.size() == pts.size());
  std::vector<std::size_t> sorted = ord.order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

  // The second blob begins where the plot spikes.
  std::size_t peak_pos = 1;
  for (std::size_t k = 1; k < ord.order.size(); ++k) {
    if (ord.reachability[ord.order[k]] > ord.reachability[ord.order[peak_pos]]) peak_pos = k;
  }
  CHECK(peak_pos == 60);
  const double peak = ord.reachability[ord.order[peak_pos]];
  double valley = 0;
  for (std::size_t k = 1; k < ord.order.size(); ++k) {
    if (k != peak_pos) valley = std::max(valley, ord.reachability[ord.order[k]]);
  }
  CHECK(peak > 2000);
  CHECK(valley < peak / 5);
  const bool first_half_a = ord.order[0] < 60;
  for (std::size_t k = 0; k < 60; ++k) CHECK((ord.order[k] < 60) == first_half_a);
}

TEST_CASE("extraction limits") {
  synth::Rng rng(6);
  const auto pts = uniform_box(rng, {38.9, -76.9}, 500, 100);
  const auto ord = optics(std::span<const LatLon>(pts), 4, 10000);
  double max_r = 0, min_r = kUndefined, min_core = kUndefined;
  for (std::size_t k = 1; k < ord.order.size(); ++k) {
    max_r = std::max(max_r, ord.reachability[ord.order[k]]);
    min_r = std::min(min_r, ord.reachability[ord.order[k]]);
  }
  for (double c : ord.core_distance) min_core = std::min(min_core, c);
  const auto one = extract_clusters(ord, max_r * 1.01);
  CHECK(one.n_clusters == 1);
  CHECK(one.noise_count() == 0);
  const auto none = extract_clusters(ord, std::min(min_r, min_core) * 0.99);
  CHECK(none.n_clusters == 0);
  CHECK(none.noise_count() == pts.size());
}

TEST_CASE("extraction agrees with dbscan at the same radius") {
  synth::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const LatLon a{38.9, -76.9};
    auto pts = blob(rng, a, 120, 70);
    const auto b = blob(rng, destination_point(a, rng.uniform(0, 360), 2500), 120, 70);
    const auto noise = uniform_box(rng, a, 4000, 15);
    pts.insert(pts.end(), b.begin(), b.end());
    pts.insert(pts.end(), noise.begin(), noise.end());
    const double t = rng.uniform(80, 250);
    const std::size_t min_pts = static_cast<std::size_t>(rng.uniform_int(3, 8));
    const auto ord = optics(std::span<const LatLon>(pts), min_pts, 3000);
    const auto cut = extract_clusters(ord, t);
    const auto db = dbscan(std::span<const LatLon>(pts), ClusterParams{t, min_pts});
    std::map<int, int> map_cut, map_db;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK((cut.role[i] == Role::Core) == (db.role[i] == Role::Core));
      if (db.role[i] != Role::Core) continue;
      // Core partitions coincide up to relabeling.
      auto [it, f1] = map_cut.emplace(cut.label[i], db.label[i]);
      CHECK(it->second == db.label[i]);
      auto [jt, f2] = map_db.emplace(db.label[i], cut.label[i]);
      CHECK(jt->second == cut.label[i]);
    }
  }
}

TEST_CASE("O-D pair distance") {
  const LatLon o{38.97, -76.49};
  const OdPair a{o, {38.98, -76.5}};
  CHECK(od_pair_distance(a, a) == 0.0);
  const OdPair b{o, destination_point(a.dest, 30, 1000)};
  CHECK(od_pair_distance(a, b) == doctest::Approx(1000).epsilon(1e-6));
  synth::Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const OdPair x{{rng.uniform(-60, 60), rng.uniform(-179, 179)}, {rng.uniform(-60, 60), rng.uniform(-179, 179)}};
    const OdPair y{{rng.uniform(-60, 60), rng.uniform(-179, 179)}, {rng.uniform(-60, 60), rng.uniform(-179, 179)}};
    CHECK(od_pair_distance(x, y) == od_pair_distance(y, x));
  }
}

TEST_CASE("O-D clustering groups matching flows") {
  synth::Rng rng(9);
  const LatLon h1{38.97, -76.49}, h2{38.99, -76.55};
  std::vector<OdPair> pairs;
  for (int i = 0; i < 30; ++i) pairs.push_back({blob(rng, h1, 80, 1)[0], blob(rng, h2, 80, 1)[0]});
  for (int i = 0; i < 30; ++i) pairs.push_back({blob(rng, h2, 80, 1)[0], blob(rng, h1, 80, 1)[0]});
  const auto lab = dbscan(std::span<const OdPair>(pairs), ClusterParams{600, 5});
  CHECK(lab.n_clusters == 2);
  for (int i = 1; i < 30; ++i) CHECK(lab.label[i] == lab.label[0]);
  for (int i = 31; i < 60; ++i) CHECK(lab.label[i] == lab.label[30]);
  CHECK(lab.label[0] != lab.label[30]);
  const auto ord = optics(std::span<const OdPair>(pairs), 5, 2000);
  const auto cut = extract_clusters(ord, 1000);
  CHECK(cut.n_clusters == 2);
}

TEST_CASE("labeling CSV") {
  ClusterLabeling lab;
  lab.label = {0, kNoise};
  lab.role = {Role::Core, Role::Noise};
  std::ostringstream out;
  write_labeling_csv(out, lab);
  CHECK(out.str() == "point_index,cluster_id,role\n0,0,core\n1,-1,noise\n");
}

TEST_CASE("index agrees with brute force") {
  synth::Rng rng(10);
  const auto pts = uniform_box(rng, {60.0, 10.0}, 20000, 500);
  const PointIndex index(pts, 700);
  std::vector<Neighbor> got;
  for (int q = 0; q < 300; ++q) {
    const LatLon p = uniform_box(rng, {60.0, 10.0}, 22000, 1)[0];
    const double r = rng.uniform(10, 5000);
    index.within(p, r, got);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (haversine(p, pts[i]) <= r) expect.push_back(i);
    }
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].index == expect[i]);
  }
}

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "trajan/synth.hpp"
#include "trajan/transit.hpp"

using namespace trajan;
using namespace trajan::transit;

namespace {

const LatLon kRef{38.98, -76.49};
const LocalFrame kFrame(kRef);

std::vector<LatLon> line(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<LatLon> out;
  for (auto [x, y] : xy) out.push_back(kFrame.to_latlon({x, y}));
  return out;
}

TransitNetwork network_of(std::vector<std::vector<LatLon>> routes) {
  TransitNetwork tn;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    tn.routes.push_back({"R" + std::to_string(i), "route " + std::to_string(i), std::move(routes[i])});
  }
  return tn;
}

double point_segment(LocalFrame::Xy p, LocalFrame::Xy a, LocalFrame::Xy b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double l2 = dx * dx + dy * dy;
  double t = l2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / l2 : 0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Midpoint-rule sampling of the covered share, in the same planar frame.
double sampled_coverage(const std::vector<std::vector<LatLon>>& paths, const TransitNetwork& tn,
                        double r, int samples) {
  const LocalFrame f(paths.front().front());
  double covered = 0, total = 0;
  for (const auto& p : paths) {
    for (std::size_t i = 1; i < p.size(); ++i) {
      const auto a = f.to_xy(p[i - 1]);
      const auto b = f.to_xy(p[i]);
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      total += len;
      int in = 0;
      for (int k = 0; k < samples; ++k) {
        const double t = (k + 0.5) / samples;
        const LocalFrame::Xy q{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
        bool hit = false;
        for (const auto& route : tn.routes) {
          for (std::size_t j = 1; j < route.line.size() && !hit; ++j) {
            hit = point_segment(q, f.to_xy(route.line[j - 1]), f.to_xy(route.line[j])) <= r;
          }
          if (hit) break;
        }
        in += hit;
      }
      covered += len * in / samples;
    }
  }
  return total > 0 ? covered / total : 0;
}

std::vector<LatLon> random_path(synth::Rng& rng, int n, double spread) {
  std::vector<LatLon> out;
  double x = rng.uniform(-spread, spread), y = rng.uniform(-spread, spread);
  for (int i = 0; i < n; ++i) {
    out.push_back(kFrame.to_latlon({x, y}));
    x += rng.normal(0, spread / 3);
    y += rng.normal(0, spread / 3);
  }
  return out;
}

Trip od_trip(const std::string& id, LatLon o, LatLon d) {
  Trip t;
  t.trip_id = id;
  t.waypoints = {{o.lat, o.lon, 0}, {d.lat, d.lon, 600'000}};
  return t;
}

}  // namespace

TEST_CASE("coverage of simple geometries") {
  const auto route = line({{0, 0}, {1000, 0}, {1000, 1500}});
  const auto tn = network_of({route});
  const std::vector<std::vector<LatLon>> same{route};
  CHECK(coverage_score(same, tn) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<std::vector<LatLon>> far{line({{0, 3000}, {2000, 3000}})};
  CHECK(coverage_score(far, tn) == 0.0);

  const auto half_route = network_of({line({{-1000, 0}, {600, 0}})});
  const std::vector<std::vector<LatLon>> half{line({{0, 0}, {2000, 0}})};
  CHECK(std::abs(coverage_score(half, half_route) - 0.5) <= 0.02);

  CHECK(coverage_score(same, TransitNetwork{}) == 0.0);
  CHECK_THROWS_AS(coverage_score(same, tn, 0), DomainError);
  CHECK(coverage_score(std::vector<std::vector<LatLon>>{}, tn) == 0.0);
}

TEST_CASE("coverage agrees with dense sampling") {
  synth::Rng rng(77);
  bool all_close = true;
  double worst = 0;
  for (int trial = 0; trial < 60; ++trial) {
    TransitNetwork tn;
    const int n_routes = static_cast<int>(rng.uniform_int(1, 3));
    for (int r = 0; r < n_routes; ++r) tn.routes.push_back({"R" + std::to_string(r), "", random_path(rng, 6, 2000)});
    const std::vector<std::vector<LatLon>> paths{random_path(rng, 8, 2000), random_path(rng, 4, 2000)};
    const double buffer = rng.uniform(100, 800);
    const double exact = covered_length(paths, tn, buffer, paths.front().front()).fraction();
    const double sampled = sampled_coverage(paths, tn, buffer, 4000);
    worst = std::max(worst, std::abs(exact - sampled));
    all_close = all_close && std::abs(exact - sampled) <= 1e-3;
  }
  MESSAGE("largest difference from sampling " << worst);
  CHECK(all_close);
}

TEST_CASE("coverage is monotone in routes and stable under densification") {
  synth::Rng rng(12);
  bool monotone = true, stable = true;
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<std::vector<LatLon>> paths{random_path(rng, 10, 3000)};
    TransitNetwork tn;
    double prev = coverage_score(paths, tn);
    for (int r = 0; r < 4; ++r) {
      tn.routes.push_back({"R" + std::to_string(r), "", random_path(rng, 5, 3000)});
      const double cur = coverage_score(paths, tn);
      monotone = monotone && cur >= prev - 1e-12;
      prev = cur;
    }
    std::vector<LatLon> dense;
    for (std::size_t i = 0; i < paths[0].size(); ++i) {
      if (i > 0) {
        const auto& a = paths[0][i - 1];
        const auto& b = paths[0][i];
        dense.push_back({(a.lat + b.lat) / 2, (a.lon + b.lon) / 2});
      }
      dense.push_back(paths[0][i]);
    }
    const std::vector<std::vector<LatLon>> densified{dense};
    stable = stable && std::abs(coverage_score(densified, tn) - prev) < 0.01;
  }
  CHECK(monotone);
  CHECK(stable);
}

TEST_CASE("O-D clustering for transit") {
  const LatLon home = kFrame.to_latlon({0, 0});
  const LatLon work = kFrame.to_latlon({6000, 2000});
  std::vector<Trip> same;
  for (int i = 0; i < 8; ++i) same.push_back(od_trip("s" + std::to_string(i), home, work));
  const auto one = cluster_od_pairs(same, {});
  CHECK(one.n_clusters == 1);
  CHECK(one.noise_count() == 0);

  synth::Rng rng(4);
  std::vector<Trip> trips;
  auto jitter = [&](double x, double y) {
    return kFrame.to_latlon({x + rng.normal(0, 80), y + rng.normal(0, 80)});
  };
  for (int i = 0; i < 30; ++i) trips.push_back(od_trip("a" + std::to_string(i), jitter(0, 0), jitter(4000, 0)));
  for (int i = 0; i < 30; ++i) {
    trips.push_back(od_trip("b" + std::to_string(i), jitter(10000, 0), jitter(10000, 5000)));
  }
  for (int i = 0; i < 6; ++i) {
    trips.push_back(od_trip("n" + std::to_string(i), jitter(rng.uniform(-30000, 30000), 20000 + 4000 * i),
                            jitter(rng.uniform(-30000, 30000), -20000 - 4000 * i)));
  }
  const auto lab = cluster_od_pairs(trips, {});
  CHECK(lab.n_clusters == 2);
  CHECK(lab.label[0] != lab.label[30]);
  bool a_same = true, b_same = true, noise = true;
  for (int i = 0; i < 30; ++i) {
    a_same = a_same && lab.label[static_cast<std::size_t>(i)] == lab.label[0];
    b_same = b_same && lab.label[static_cast<std::size_t>(30 + i)] == lab.label[30];
  }
  for (std::size_t i = 60; i < trips.size(); ++i) noise = noise && lab.label[i] == cluster::kNoise;
  CHECK(a_same);
  CHECK(b_same);
  CHECK(noise);

  CHECK_THROWS_AS(cluster_od_pairs(std::span(same).first(4), {}), DomainError);
  CHECK_THROWS_AS(cluster_od_pairs(same, {5, 500, 1000}), DomainError);
}

TEST_CASE("demand versus transit report") {
  const auto tn = network_of({line({{0, 0}, {5000, 0}}), line({{0, 2000}, {0, 6000}})});
  cluster::ClusterLabeling lab;
  std::vector<std::vector<std::vector<LatLon>>> traj;
  auto add = [&](int label, std::vector<LatLon> path) {
    lab.label.push_back(label);
    lab.role.push_back(label == cluster::kNoise ? cluster::Role::Noise : cluster::Role::Core);
    traj.push_back({std::move(path)});
  };
  // Cluster 0: along the first route, 10 trips.
  for (int i = 0; i < 10; ++i) add(0, line({{100, 50}, {4900, 50}}));
  // Cluster 1: the planted busy corridor far from any route, 25 trips.
  for (int i = 0; i < 25; ++i) add(1, line({{8000, 8000}, {12000, 9000}}));
  // Cluster 2: half on the second route, 6 trips.
  for (int i = 0; i < 6; ++i) add(2, line({{0, 4000}, {0, 6000}, {4000, 6000}}));
  for (int i = 0; i < 3; ++i) add(cluster::kNoise, line({{-9000, -9000}, {-8000, -9000}}));
  lab.n_clusters = 3;

  const auto rep = demand_vs_transit(lab, traj, tn);
  REQUIRE(rep.clusters.size() == 3);
  CHECK(rep.clusters[0].cluster_id == 1);
  CHECK(rep.clusters[0].flagged);
  CHECK(rep.clusters[0].covered_fraction == 0.0);
  CHECK(rep.clusters[1].cluster_id == 0);
  CHECK(rep.clusters[1].covered_fraction == doctest::Approx(1.0));
  CHECK_FALSE(rep.clusters[1].flagged);
  CHECK(rep.clusters[2].cluster_id == 2);
  CHECK(rep.clusters[2].covered_fraction == doctest::Approx(2400.0 / 6000.0).epsilon(1e-3));
  CHECK(rep.clusters[2].flagged);
  std::size_t weight = 0;
  for (const auto& c : rep.clusters) weight += c.n_trips;
  CHECK(weight == 41);
  CHECK(rep.noise_trips == 3);

  std::ostringstream a, b;
  write_coverage_csv(a, rep);
  write_coverage_csv(b, demand_vs_transit(lab, traj, tn, kDefaultBufferM, kDefaultUncoveredThreshold, 4));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("cluster_id,n_trips,covered_fraction,flagged\n1,25,0,true\n0,10,1", 0) == 0);

  const auto covered = demand_vs_transit(lab, traj, tn, 50000);
  for (const auto& c : covered.clusters) CHECK_FALSE(c.flagged);
  CHECK_THROWS_AS(demand_vs_transit(lab, std::span(traj).first(3), tn), DomainError);
}

TEST_CASE("matched polylines and heat layer") {
  const auto net = synth::grid_network({});
  mapmatch::MatchedTrip m;
  m.trip_id = "a";
  m.matched = true;
  m.route = {{1, 0}, {2, 10}, {mapmatch::kGapLink, 20}, {-5, 30}};
  const auto lines = matched_polylines(m, net);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].size() == 3);
  CHECK(lines[0].front() == net.link(*net.find_link(1)).geometry.front());
  CHECK(lines[1].front() == net.link(*net.find_link(-5)).geometry.front());

  mapmatch::MatchedTrip m2 = m;
  m2.route = {{1, 0}};
  const std::vector<mapmatch::MatchedTrip> trips{m, m2};
  const auto heat = link_heat(trips);
  REQUIRE(heat.size() == 3);
  CHECK(heat[0].link_id == -5);
  CHECK(heat[1].link_id == 1);
  CHECK(heat[1].traversals == 2);
  const auto gj = heat_layer_geojson(heat, net);
  CHECK(gj.find("\"traversals\":2") != std::string::npos);
}

TEST_CASE("transit network files") {
  const auto tn = network_of({line({{0, 0}, {1000, 0}}), line({{0, 0}, {0, 1000}, {500, 1500}})});
  const auto back = parse_transit(transit_geojson(tn));
  REQUIRE(back.routes.size() == 2);
  CHECK(back.routes[1].route_id == "R1");
  CHECK(back.routes[1].name == "route 1");
  CHECK(back.routes[1].line == tn.routes[1].line);
  const std::string no_id = R"({"type":"FeatureCollection","features":[{"type":"Feature",
    "geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]},"properties":{"name":"x"}}]})";
  CHECK_THROWS_AS(parse_transit(no_id), ParseError);
  const std::string point = R"({"type":"FeatureCollection","features":[{"type":"Feature",
    "geometry":{"type":"Point","coordinates":[0,0]},"properties":{"route_id":"x"}}]})";
  CHECK_THROWS_AS(parse_transit(point), ParseError);
}

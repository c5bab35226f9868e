#include <cmath>
#include <numbers>

#include "doctest.h"
#include "trajan/delaunay.hpp"
#include "trajan/isochrone.hpp"
#include "trajan/synth.hpp"

using namespace trajan;
using namespace trajan::isochrone;
using cluster::ClusterParams;

namespace {

const LatLon kCentre{39.25, -76.58};

std::vector<LatLon> disc(synth::Rng& rng, LatLon c, double radius, int n) {
  const LocalFrame f(c);
  std::vector<LatLon> out;
  while (static_cast<int>(out.size()) < n) {
    const double x = rng.uniform(-radius, radius), y = rng.uniform(-radius, radius);
    if (x * x + y * y <= radius * radius) out.push_back(f.to_latlon({x, y}));
  }
  return out;
}

bool segments_cross(LatLon a, LatLon b, LatLon c, LatLon d) {
  auto orient = [](LatLon p, LatLon q, LatLon r) {
    const double v = (q.lon - p.lon) * (r.lat - p.lat) - (q.lat - p.lat) * (r.lon - p.lon);
    return (v > 0) - (v < 0);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  return false;
}

void check_simple_ring(const GeoPolygon& poly) {
  const auto& r = poly.exterior();
  REQUIRE(r.size() >= 4);
  CHECK(r.front() == r.back());
  const std::size_t m = r.size() - 1;
  bool repeated = false, crossing = false;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) repeated |= r[i] == r[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      crossing |= segments_cross(r[i], r[i + 1], r[j], r[j + 1]);
    }
  }
  CHECK_FALSE(repeated);
  CHECK_FALSE(crossing);
  CHECK(ring_area_m2(r) > 0);  // counter-clockwise
}

double convex_area(std::span<const LatLon> pts) {
  const LocalFrame f(pts[0]);
  std::vector<delaunay::Point> xy;
  for (const auto& p : pts) {
    const auto v = f.to_xy(p);
    xy.push_back({v.x, v.y});
  }
  const delaunay::Triangulation tri(xy);
  std::vector<LatLon> ring;
  for (auto it = tri.hull.rbegin(); it != tri.hull.rend(); ++it) ring.push_back(pts[*it]);
  ring.push_back(ring.front());
  return std::abs(ring_area_m2(ring));
}

Trip radial_trip(LatLon c, double bearing, double length_m, double speed, const std::string& id,
                 synth::Rng& rng, double noise) {
  const std::vector<LatLon> line{c, destination_point(c, bearing, length_m)};
  Trip t;
  t.trip_id = id;
  t.waypoints = synth::drive_polyline(line, speed, 2000, 1'506'902'400'000);
  for (auto& w : t.waypoints) {
    const LocalFrame f(w.latlon());
    const auto p = f.to_latlon({rng.normal(0, noise), rng.normal(0, noise)});
    w.lat = p.lat;
    w.lon = p.lon;
  }
  t.waypoints.front().lat = c.lat;
  t.waypoints.front().lon = c.lon;
  return t;
}

GeoPolygon origin_box(LatLon c, double half_m) {
  const LocalFrame f(c);
  const auto lo = f.to_latlon({-half_m, -half_m});
  const auto hi = f.to_latlon({half_m, half_m});
  return GeoPolygon::box(lo.lat, lo.lon, hi.lat, hi.lon);
}

}  // namespace

TEST_CASE("default parameters load and validate") {
  IsochroneSpec spec;
  spec.origin = origin_box(kCentre, 200);
  CHECK_NOTHROW(spec.validate());
  REQUIRE(spec.thresholds_min == std::vector<double>{10, 20, 30, 40});
  REQUIRE(spec.params.size() == 4);
  CHECK(spec.params[0].eps == 1100);
  CHECK(spec.params[0].min_pts == 60);
  CHECK(spec.params[1].eps == 1300);
  CHECK(spec.params[1].min_pts == 20);
  CHECK(spec.params[2].eps == 1400);
  CHECK(spec.params[2].min_pts == 10);
  CHECK(spec.params[3].eps == 1600);
  CHECK(spec.params[3].min_pts == 5);

  auto bad = spec;
  bad.thresholds_min = {10, 10, 30, 40};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = spec;
  bad.params.pop_back();
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = spec;
  bad.thresholds_min[0] = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("collect_waypoints") {
  synth::Rng rng(1);
  const auto origin = origin_box(kCentre, 200);
  const Trip inside = radial_trip(kCentre, 30, 4500, 15, "in", rng, 0);  // 5 minutes
  const Trip outside = radial_trip(destination_point(kCentre, 0, 5000), 30, 4500, 15, "out", rng, 0);
  const std::vector<Trip> only_out{outside};
  CHECK(collect_waypoints(only_out, origin, 10).empty());
  const std::vector<Trip> both{inside, outside};
  CHECK(collect_waypoints(both, origin, 10).size() == inside.waypoints.size());

  std::vector<Trip> corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.push_back(radial_trip(kCentre, 36.0 * i, rng.uniform(3000, 40000), rng.uniform(8, 20),
                                 "r" + std::to_string(i), rng, 3));
  }
  std::size_t prev = 0;
  for (double t : {1.0, 5.0, 10.0, 20.0, 30.0, 40.0}) {
    const auto n = collect_waypoints(corpus, origin, t).size();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("dense disc hull approximates the disc") {
  synth::Rng rng(2);
  const double radius = 2000;
  const auto pts = disc(rng, kCentre, radius, 4000);
  const auto iso = filter_and_hull(pts, ClusterParams{300, 5});
  REQUIRE(iso.boundary);
  check_simple_ring(*iso.boundary);
  const double area = ring_area_m2(iso.boundary->exterior());
  const double expect = std::numbers::pi * radius * radius;
  CHECK(std::abs(area - expect) / expect < 0.10);
  CHECK(iso.n_outliers == 0);
  for (const auto& p : iso.kept) CHECK(point_in_polygon(p, *iso.boundary));
  CHECK(iso.kept.size() == pts.size());
}

TEST_CASE("far outliers never move the hull") {
  synth::Rng rng(3);
  const auto pts = disc(rng, kCentre, 1500, 2500);
  const ClusterParams p{250, 10};
  const auto base = filter_and_hull(pts, p);
  REQUIRE(base.boundary);
  for (int trial = 0; trial < 5; ++trial) {
    auto noisy = pts;
    const int extra = static_cast<int>(rng.uniform_int(1, 5));
    for (int k = 0; k < extra; ++k) {
      noisy.push_back(destination_point(kCentre, rng.uniform(0, 360), rng.uniform(9500, 20000)));
    }
    const auto iso = filter_and_hull(noisy, p);
    REQUIRE(iso.boundary);
    CHECK(iso.n_outliers == static_cast<std::size_t>(extra));
    CHECK(iso.boundary->exterior() == base.boundary->exterior());
    const double a0 = ring_area_m2(base.boundary->exterior());
    CHECK(std::abs(ring_area_m2(iso.boundary->exterior()) - a0) <= 0.01 * a0);
  }
}

TEST_CASE("a cross gives a non-convex hull") {
  synth::Rng rng(4);
  const LocalFrame f(kCentre);
  std::vector<LatLon> pts;
  for (int i = 0; i < 1500; ++i) {
    pts.push_back(f.to_latlon({rng.uniform(-5000, 5000), rng.uniform(-150, 150)}));
    pts.push_back(f.to_latlon({rng.uniform(-150, 150), rng.uniform(-5000, 5000)}));
  }
  const auto iso = filter_and_hull(pts, ClusterParams{300, 5});
  REQUIRE(iso.boundary);
  check_simple_ring(*iso.boundary);
  const double area = ring_area_m2(iso.boundary->exterior());
  CHECK(area < 0.5 * convex_area(pts));
  for (const auto& p : iso.kept) CHECK(point_in_polygon(p, *iso.boundary));
}

TEST_CASE("hull is deterministic and disconnected pieces are reported") {
  synth::Rng rng(5);
  auto pts = disc(rng, kCentre, 1000, 1500);
  const auto far = disc(rng, destination_point(kCentre, 90, 6000), 400, 300);
  pts.insert(pts.end(), far.begin(), far.end());
  const ClusterParams p{250, 5};
  const auto a = filter_and_hull(pts, p);
  const auto b = filter_and_hull(pts, p);
  REQUIRE(a.boundary);
  CHECK(a.boundary->exterior() == b.boundary->exterior());
  CHECK(a.n_discarded == 300);
  CHECK(a.discarded_fraction == doctest::Approx(300.0 / 1800.0));
  CHECK_FALSE(a.diagnostic.empty());
  check_simple_ring(*a.boundary);
}

TEST_CASE("too few points and all-noise input") {
  const std::vector<LatLon> few(3, kCentre);
  CHECK_THROWS_AS(filter_and_hull(few, ClusterParams{100, 5}), DomainError);
  std::vector<LatLon> sparse;
  for (int i = 0; i < 10; ++i) sparse.push_back(destination_point(kCentre, 36.0 * i, 5000));
  const auto iso = filter_and_hull(sparse, ClusterParams{100, 3});
  CHECK_FALSE(iso.boundary);
  CHECK(iso.n_outliers == 10);
  CHECK_FALSE(iso.diagnostic.empty());
}

TEST_CASE("radial world: hull radius tracks speed times time") {
  synth::Rng rng(6);
  const double v = 15.0;
  std::vector<Trip> trips;
  for (int s = 0; s < 24; ++s) {
    for (int k = 0; k < 2; ++k) {
      trips.push_back(radial_trip(kCentre, 15.0 * s, 40000, v, "s" + std::to_string(s) + "_" + std::to_string(k), rng, 4));
    }
  }
  IsochroneSpec spec;
  spec.origin = origin_box(kCentre, 200);
  spec.thresholds_min = {10, 20};
  spec.params = {default_params()[0], default_params()[1]};
  const auto isos = build_isochrones(trips, spec);
  REQUIRE(isos.size() == 2);
  for (const auto& iso : isos) {
    REQUIRE(iso.boundary);
    check_simple_ring(*iso.boundary);
    const double r = hull_radius(*iso.boundary, kCentre);
    const double expect = v * iso.threshold_min * 60;
    MESSAGE("t=" << iso.threshold_min << " radius " << r << " expected " << expect);
    CHECK(std::abs(r - expect) / expect <= 0.15);
  }
  CHECK(containment_fraction(isos[1], isos[0]) >= 0.99);

  spec.thresholds_min = {10};
  spec.params = {default_params()[0]};
  CHECK(build_isochrones(trips, spec).size() == 1);
}

TEST_CASE("GeoJSON output") {
  synth::Rng rng(7);
  const auto pts = disc(rng, kCentre, 500, 300);
  auto iso = filter_and_hull(pts, ClusterParams{150, 5});
  iso.threshold_min = 10;
  const std::vector<Isochrone> list{iso};
  const auto text = to_geojson(list);
  CHECK(text.find("\"threshold_min\":10") != std::string::npos);
  CHECK(text.find("\"n_points\":300") != std::string::npos);
  CHECK(text.find("Polygon") != std::string::npos);
}

#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "trajan/network.hpp"
#include "trajan/synth.hpp"

using namespace trajan;
using namespace trajan::network;

namespace {

const char* kTwoNode = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"link_id":7,"from_node":1,"to_node":2,"oneway":true},
 "geometry":{"type":"LineString","coordinates":[[-76.9,38.9],[-76.89,38.9]]}}]})";

const char* kMissingNode = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"node_id":1},"geometry":{"type":"Point","coordinates":[-76.9,38.9]}},
{"type":"Feature","properties":{"node_id":2},"geometry":{"type":"Point","coordinates":[-76.89,38.9]}},
{"type":"Feature","properties":{"link_id":1,"from_node":1,"to_node":2,"oneway":false},
 "geometry":{"type":"LineString","coordinates":[[-76.9,38.9],[-76.89,38.9]]}},
{"type":"Feature","properties":{"link_id":2,"from_node":2,"to_node":9,"oneway":false},
 "geometry":{"type":"LineString","coordinates":[[-76.89,38.9],[-76.88,38.9]]}}]})";

LinkProjection at(const RoadNetwork& net, LinkIndex li, double offset) {
  LinkProjection p;
  p.link = li;
  p.link_id = net.link(li).id;
  p.offset_m = offset;
  p.point = net.point_at(li, offset);
  return p;
}

LinkProjection random_projection(const RoadNetwork& net, synth::Rng& rng) {
  const auto li = static_cast<LinkIndex>(rng.uniform_int(0, net.links().size() - 1));
  return at(net, li, rng.uniform() * net.link(li).length_m);
}

// Node-to-node relaxation until fixpoint.
std::vector<double> bellman_ford(const RoadNetwork& net, NodeIndex src) {
  std::vector<double> d(net.nodes().size(), std::numeric_limits<double>::infinity());
  d[src] = 0;
  for (std::size_t round = 0; round < net.nodes().size(); ++round) {
    bool changed = false;
    for (const auto& l : net.links()) {
      if (d[l.from] + l.length_m < d[l.to]) {
        d[l.to] = d[l.from] + l.length_m;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

double oracle_distance(const RoadNetwork& net, const LinkProjection& a, const LinkProjection& b) {
  double best = std::numeric_limits<double>::infinity();
  if (a.link == b.link && b.offset_m >= a.offset_m) best = b.offset_m - a.offset_m;
  const auto& la = net.link(a.link);
  const auto& lb = net.link(b.link);
  const auto d = bellman_ford(net, la.to);
  best = std::min(best, (la.length_m - a.offset_m) + d[lb.from] + b.offset_m);
  return best;
}

}  // namespace

TEST_CASE("two-node network has one link of the right length") {
  const auto net = parse_network_geojson(kTwoNode);
  REQUIRE(net.links().size() == 1);
  REQUIRE(net.nodes().size() == 2);
  const double expect = haversine(LatLon{38.9, -76.9}, LatLon{38.9, -76.89});
  CHECK(net.link(0).length_m == doctest::Approx(expect).epsilon(1e-12));
  CHECK(net.link(0).id == 7);
  CHECK(net.find_link(-7) == std::nullopt);
}

TEST_CASE("missing node reference names the feature") {
  try {
    (void)parse_network_geojson(kMissingNode);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("feature 3") != std::string::npos);
    CHECK(msg.find("9") != std::string::npos);
  }
}

TEST_CASE("length property mismatch is rejected") {
  std::string text = kTwoNode;
  text.replace(text.find("\"oneway\":true"), 13, "\"oneway\":true,\"length_m\":10");
  CHECK_THROWS_AS(parse_network_geojson(text), ParseError);
}

TEST_CASE("grid fixture counts") {
  synth::GridWorld w;
  const auto net = synth::grid_network(w);
  CHECK(net.nodes().size() == 100);
  CHECK(net.links().size() == 360);
  // Round trip through the GeoJSON writer.
  const auto feats = synth::grid_features(w);
  const auto again = parse_network_geojson(synth::network_geojson(feats));
  CHECK(again.links().size() == 360);
  for (std::size_t i = 0; i < net.links().size(); ++i) {
    CHECK(again.links()[i].id == net.links()[i].id);
    CHECK(again.links()[i].length_m == doctest::Approx(net.links()[i].length_m));
  }
}

TEST_CASE("nearest_links on-link and out-of-range queries") {
  const auto net = synth::grid_network({});
  const auto li = *net.find_link(5);
  const LatLon p = net.point_at(li, 37.0);
  const auto res = net.nearest_links(p, 50, 8);
  REQUIRE(!res.empty());
  CHECK(std::abs(res.front().link_id) == 5);
  CHECK(res.front().distance_m < 1e-6);
  CHECK(res.front().offset_m == doctest::Approx(37.0).epsilon(1e-6));

  const LatLon far = destination_point(synth::grid_node({}, 0, 0), 225.0, 5000.0);
  CHECK(net.nearest_links(far, 200, 8).empty());
}

TEST_CASE("nearest_links agrees with a brute-force scan") {
  const auto net = synth::grid_network({});
  synth::Rng rng(11);
  const LatLon lo = synth::grid_node({}, -1, -1);
  const LatLon hi = synth::grid_node({}, 10, 10);
  for (int q = 0; q < 1000; ++q) {
    const LatLon p{rng.uniform(lo.lat, hi.lat), rng.uniform(lo.lon, hi.lon)};
    const double radius = rng.uniform(5, 300);
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto a = net.nearest_links(p, radius, k);
    const auto b = net.nearest_links_brute(p, radius, k);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].link == b[i].link);
      CHECK(a[i].distance_m == b[i].distance_m);
      CHECK(a[i].distance_m <= radius);
    }
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].distance_m <= a[i].distance_m);
  }
}

TEST_CASE("shortest_path basic cases") {
  const auto net = synth::grid_network({});
  const auto l1 = *net.find_link(1);
  const auto a = at(net, l1, 50.0);
  const auto same = shortest_path(net, a, a);
  CHECK(same.reachable);
  CHECK(same.links.empty());
  CHECK(same.distance_m == 0.0);

  // Links 1, 2, 3 run eastward along row 0.
  const auto l3 = *net.find_link(3);
  const auto start = at(net, l1, 0.0);
  const auto end = at(net, l3, net.link(l3).length_m);
  const auto r = shortest_path(net, start, end);
  REQUIRE(r.reachable);
  REQUIRE(r.links.size() == 3);
  CHECK(net.link(r.links[0]).id == 1);
  CHECK(net.link(r.links[1]).id == 2);
  CHECK(net.link(r.links[2]).id == 3);
  double sum = 0;
  for (auto li : r.links) sum += net.link(li).length_m;
  CHECK(r.distance_m == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("one-way links make paths unreachable") {
  synth::GridWorld w;
  w.rows = 1;
  w.cols = 3;
  w.two_way = false;
  const auto net = synth::grid_network(w);
  const auto l1 = *net.find_link(1);
  const auto l2 = *net.find_link(2);
  CHECK(shortest_path(net, at(net, l1, 10), at(net, l2, 10)).reachable);
  const auto back = shortest_path(net, at(net, l2, 10), at(net, l1, 10));
  CHECK_FALSE(back.reachable);
  CHECK(std::isinf(back.distance_m));
}

TEST_CASE("shortest_path matches Bellman-Ford") {
  synth::GridWorld w;
  w.two_way = true;
  auto feats = synth::grid_features(w);
  // Make a few streets one-way to exercise direction handling.
  for (auto& f : feats) {
    if (f.link_id % 7 == 0) f.oneway = true;
  }
  const auto net = RoadNetwork::build(feats);
  synth::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_projection(net, rng);
    const auto b = random_projection(net, rng);
    const auto r = shortest_path(net, a, b);
    const double expect = oracle_distance(net, a, b);
    REQUIRE(r.reachable == std::isfinite(expect));
    if (!r.reachable) continue;
    CHECK(r.distance_m == doctest::Approx(expect).epsilon(1e-9));
    // Route is connected and its length adds up.
    if (!r.links.empty()) {
      CHECK(r.links.front() == a.link);
      CHECK(r.links.back() == b.link);
      for (std::size_t k = 1; k < r.links.size(); ++k) {
        CHECK(net.link(r.links[k - 1]).to == net.link(r.links[k]).from);
      }
    }
    const std::vector<LinkProjection> targets{b};
    const auto many = route_distances(net, a, targets, 1e9);
    REQUIRE(many[0].has_value());
    CHECK(*many[0] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("triangle inequality and reversal symmetry") {
  const auto net = synth::grid_network({});
  synth::Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_projection(net, rng);
    const auto b = random_projection(net, rng);
    const auto c = random_projection(net, rng);
    const double ab = shortest_path(net, a, b).distance_m;
    const double bc = shortest_path(net, b, c).distance_m;
    const double ac = shortest_path(net, a, c).distance_m;
    CHECK(ac <= ab + bc + 1e-6);

    auto reverse = [&](const LinkProjection& p) {
      const auto ri = *net.find_link(-p.link_id);
      return at(net, ri, net.link(ri).length_m - p.offset_m);
    };
    const double ba = shortest_path(net, reverse(b), reverse(a)).distance_m;
    CHECK(std::abs(ba - ab) <= 1e-9 * std::max(1.0, ab));
  }
}

TEST_CASE("dedupe_route_nodes") {
  const std::vector<TraversalRecord> plain{{1, 10}, {2, 20}, {3, 30}};
  CHECK(dedupe_route_nodes(plain) == plain);
  const std::vector<TraversalRecord> dup{{1, 10}, {1, 11}, {2, 20}};
  CHECK(dedupe_route_nodes(dup) == std::vector<TraversalRecord>{{1, 10}, {2, 20}});
  CHECK(dedupe_route_nodes(std::vector<TraversalRecord>{}).empty());

  synth::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TraversalRecord> seq;
    const auto n = rng.uniform_int(0, 40);
    for (std::int64_t i = 0; i < n; ++i) seq.push_back({rng.uniform_int(1, 3), i});
    const auto out = dedupe_route_nodes(seq);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].link_id != out[i].link_id);
    // Order preserved: the output is a subsequence with increasing times.
    std::size_t j = 0;
    for (const auto& r : out) {
      while (j < seq.size() && !(seq[j] == r)) ++j;
      REQUIRE(j < seq.size());
      ++j;
    }
    // Each run keeps its first record.
    std::size_t runs = seq.empty() ? 0 : 1;
    for (std::size_t i = 1; i < seq.size(); ++i) runs += seq[i].link_id != seq[i - 1].link_id;
    CHECK(out.size() == runs);
  }
}

TEST_CASE("sampled traces follow the planted route") {
  const auto net = synth::grid_network({});
  synth::Rng rng(1);
  const auto route = synth::random_walk_route(net, rng, 6);
  REQUIRE(route.links.size() == 6);
  for (std::size_t i = 1; i < route.links.size(); ++i) {
    CHECK(net.link(route.links[i - 1]).to == net.link(route.links[i]).from);
  }
  const auto tr = synth::sample_route(net, route, {}, rng);
  CHECK_NOTHROW(validate_trip(tr.trip));
  for (const auto& wp : tr.trip.waypoints) {
    const auto near = net.nearest_links(wp.latlon(), 1.0, 1);
    CHECK(!near.empty());
  }
}

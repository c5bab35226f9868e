#include "trajan/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace trajan::network {

namespace {

using nlohmann::json;

constexpr double kMetersPerDegLat = kEarthRadiusM * std::numbers::pi / 180.0;
constexpr double kIndexCellM = 250.0;
constexpr std::size_t kMaxIndexCells = 4'000'000;
// Endpoint coordinates of links sharing a node must agree within this.
constexpr double kNodeSnapM = 1.0;

double cos_deg(double deg) { return std::cos(deg * std::numbers::pi / 180.0); }

struct Projected {
  double distance = 0.0;
  std::size_t segment = 0;
  double t = 0.0;
};

Projected project_polyline(const LocalFrame& frame, std::span<const LatLon> geom) {
  Projected best{std::numeric_limits<double>::infinity(), 0, 0.0};
  for (std::size_t i = 0; i + 1 < geom.size(); ++i) {
    const auto a = frame.to_xy(geom[i]);
    const auto b = frame.to_xy(geom[i + 1]);
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((-a.x * dx - a.y * dy) / len2, 0.0, 1.0);
    const double px = a.x + t * dx, py = a.y + t * dy;
    const double d = std::hypot(px, py);
    if (d < best.distance) best = {d, i, t};
  }
  return best;
}

bool projection_less(const LinkProjection& x, const LinkProjection& y) {
  if (x.distance_m != y.distance_m) return x.distance_m < y.distance_m;
  return x.link < y.link;
}

// Reusable per-thread Dijkstra workspace; entries are valid only when their
// stamp matches the current run.
struct Workspace {
  std::vector<double> dist;
  std::vector<LinkIndex> pred_link;
  std::vector<std::uint32_t> stamp;
  std::vector<std::uint8_t> settled;
  std::uint32_t current = 0;

  void reset(std::size_t n) {
    if (dist.size() != n) {
      dist.assign(n, 0.0);
      pred_link.assign(n, 0);
      stamp.assign(n, 0);
      settled.assign(n, 0);
      current = 0;
    }
    if (++current == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      current = 1;
    }
  }
  double get(NodeIndex n) const {
    return stamp[n] == current ? dist[n] : std::numeric_limits<double>::infinity();
  }
  bool is_settled(NodeIndex n) const { return stamp[n] == current && settled[n]; }
  void set(NodeIndex n, double d, LinkIndex pred) {
    if (stamp[n] != current) {
      stamp[n] = current;
      settled[n] = 0;
    }
    dist[n] = d;
    pred_link[n] = pred;
  }
};

constexpr LinkIndex kNoLink = std::numeric_limits<LinkIndex>::max();

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

// Runs Dijkstra from `source` (initial distance `d0`), stopping once every
// node in `stop_at` is settled or the frontier exceeds `limit`.
void run_dijkstra(const RoadNetwork& net, Workspace& ws, NodeIndex source, double d0,
                  double limit, std::span<const NodeIndex> stop_at) {
  using Entry = std::pair<double, NodeIndex>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  ws.set(source, d0, kNoLink);
  pq.emplace(d0, source);
  std::size_t remaining = 0;
  std::vector<NodeIndex> stops(stop_at.begin(), stop_at.end());
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  remaining = stops.size();
  while (!pq.empty()) {
    const auto [d, n] = pq.top();
    pq.pop();
    if (ws.is_settled(n) || d > ws.get(n)) continue;
    if (d > limit) break;
    ws.settled[n] = 1;
    if (!stops.empty() && std::binary_search(stops.begin(), stops.end(), n)) {
      if (--remaining == 0) break;
    }
    for (LinkIndex li : net.outgoing(n)) {
      const auto& l = net.link(li);
      const double nd = d + l.length_m;
      if (nd < ws.get(l.to)) {
        ws.set(l.to, nd, li);
        pq.emplace(nd, l.to);
      }
    }
  }
}

}  // namespace

double polyline_length(std::span<const LatLon> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += haversine(line[i - 1], line[i]);
  return total;
}

RoadNetwork RoadNetwork::build(std::vector<FeatureSpec> features,
                               std::map<NodeId, LatLon> declared_nodes) {
  std::stable_sort(features.begin(), features.end(),
                   [](const auto& a, const auto& b) { return a.link_id < b.link_id; });
  std::map<NodeId, LatLon> positions = declared_nodes;
  const bool explicit_nodes = !declared_nodes.empty();
  auto bind_node = [&](NodeId id, LatLon at, LinkId link) {
    auto it = positions.find(id);
    if (it == positions.end()) {
      if (explicit_nodes) {
        throw ParseError("link " + std::to_string(link) + " references missing node " +
                         std::to_string(id));
      }
      positions.emplace(id, at);
      return;
    }
    if (haversine(it->second, at) > kNodeSnapM) {
      throw ParseError("link " + std::to_string(link) + " endpoint disagrees with node " +
                       std::to_string(id) + " position");
    }
  };
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (f.link_id <= 0) {
      throw ParseError("link id must be positive, got " + std::to_string(f.link_id));
    }
    if (i > 0 && features[i - 1].link_id == f.link_id) {
      throw ParseError("duplicate link id " + std::to_string(f.link_id));
    }
    if (f.geometry.size() < 2) {
      throw ParseError("link " + std::to_string(f.link_id) + " has fewer than 2 vertices");
    }
    for (const auto& p : f.geometry) {
      if (!is_valid(p)) {
        throw ParseError("link " + std::to_string(f.link_id) + " has invalid coordinates");
      }
    }
    bind_node(f.from_node, f.geometry.front(), f.link_id);
    bind_node(f.to_node, f.geometry.back(), f.link_id);
  }

  RoadNetwork net;
  net.nodes_.reserve(positions.size());
  for (const auto& [id, pos] : positions) {
    net.node_lookup_.emplace(id, static_cast<NodeIndex>(net.nodes_.size()));
    net.nodes_.push_back({id, pos});
  }
  auto make_link = [&](LinkId id, NodeId from, NodeId to, std::vector<LatLon> geom,
                       bool oneway) {
    Link l;
    l.id = id;
    l.from = net.node_lookup_.at(from);
    l.to = net.node_lookup_.at(to);
    l.cumulative_m.assign(geom.size(), 0.0);
    for (std::size_t i = 1; i < geom.size(); ++i) {
      l.cumulative_m[i] = l.cumulative_m[i - 1] + haversine(geom[i - 1], geom[i]);
    }
    l.length_m = l.cumulative_m.back();
    l.geometry = std::move(geom);
    l.oneway = oneway;
    net.link_lookup_.emplace(id, static_cast<LinkIndex>(net.links_.size()));
    net.links_.push_back(std::move(l));
  };
  for (auto& f : features) {
    if (!f.oneway) {
      std::vector<LatLon> reversed(f.geometry.rbegin(), f.geometry.rend());
      make_link(f.link_id, f.from_node, f.to_node, f.geometry, false);
      make_link(-f.link_id, f.to_node, f.from_node, std::move(reversed), false);
    } else {
      make_link(f.link_id, f.from_node, f.to_node, std::move(f.geometry), true);
    }
  }

  net.adjacency_offsets_.assign(net.nodes_.size() + 1, 0);
  for (const auto& l : net.links_) ++net.adjacency_offsets_[l.from + 1];
  for (std::size_t i = 1; i < net.adjacency_offsets_.size(); ++i) {
    net.adjacency_offsets_[i] += net.adjacency_offsets_[i - 1];
  }
  net.adjacency_.assign(net.links_.size(), 0);
  std::vector<std::uint32_t> fill(net.adjacency_offsets_.begin(),
                                  net.adjacency_offsets_.end() - 1);
  for (LinkIndex i = 0; i < net.links_.size(); ++i) {
    net.adjacency_[fill[net.links_[i].from]++] = i;
  }
  net.build_index();
  return net;
}

void RoadNetwork::build_index() {
  buckets_.clear();
  index_rows_ = index_cols_ = 0;
  if (links_.empty()) return;
  double max_lat = -90, max_lon = -180;
  min_lat_ = 90;
  min_lon_ = 180;
  for (const auto& l : links_) {
    for (const auto& p : l.geometry) {
      min_lat_ = std::min(min_lat_, p.lat);
      max_lat = std::max(max_lat, p.lat);
      min_lon_ = std::min(min_lon_, p.lon);
      max_lon = std::max(max_lon, p.lon);
    }
  }
  max_abs_lat_ = std::min(89.0, std::max(std::abs(min_lat_), std::abs(max_lat)));
  double cell_m = kIndexCellM;
  while (true) {
    cell_lat_deg_ = cell_m / kMetersPerDegLat;
    cell_lon_deg_ = cell_m / (kMetersPerDegLat * cos_deg(max_abs_lat_));
    index_rows_ = static_cast<int>((max_lat - min_lat_) / cell_lat_deg_) + 1;
    index_cols_ = static_cast<int>((max_lon - min_lon_) / cell_lon_deg_) + 1;
    if (static_cast<std::size_t>(index_rows_) * static_cast<std::size_t>(index_cols_) <=
        kMaxIndexCells) {
      break;
    }
    cell_m *= 2.0;
  }
  buckets_.assign(static_cast<std::size_t>(index_rows_) * index_cols_, {});
  auto row_of = [&](double lat) {
    return std::clamp(static_cast<int>(std::floor((lat - min_lat_) / cell_lat_deg_)), 0,
                      index_rows_ - 1);
  };
  auto col_of = [&](double lon) {
    return std::clamp(static_cast<int>(std::floor((lon - min_lon_) / cell_lon_deg_)), 0,
                      index_cols_ - 1);
  };
  for (LinkIndex li = 0; li < links_.size(); ++li) {
    const auto& g = links_[li].geometry;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      const int r0 = row_of(std::min(g[i].lat, g[i + 1].lat));
      const int r1 = row_of(std::max(g[i].lat, g[i + 1].lat));
      const int c0 = col_of(std::min(g[i].lon, g[i + 1].lon));
      const int c1 = col_of(std::max(g[i].lon, g[i + 1].lon));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          auto& bucket = buckets_[static_cast<std::size_t>(r) * index_cols_ + c];
          if (bucket.empty() || bucket.back() != li) bucket.push_back(li);
        }
      }
    }
  }
}

std::vector<LinkIndex> RoadNetwork::index_candidates(LatLon p, double radius_m) const {
  std::vector<LinkIndex> out;
  if (buckets_.empty()) return out;
  const double dlat = radius_m / kMetersPerDegLat * 1.01 + 1e-9;
  const double lat_for_lon = std::min(89.9, std::abs(p.lat) + dlat);
  const double dlon = radius_m / (kMetersPerDegLat * cos_deg(lat_for_lon)) * 1.01 + 1e-9;
  const double r0f = std::floor((p.lat - dlat - min_lat_) / cell_lat_deg_);
  const double r1f = std::floor((p.lat + dlat - min_lat_) / cell_lat_deg_);
  const double c0f = std::floor((p.lon - dlon - min_lon_) / cell_lon_deg_);
  const double c1f = std::floor((p.lon + dlon - min_lon_) / cell_lon_deg_);
  if (r1f < 0 || c1f < 0 || r0f >= index_rows_ || c0f >= index_cols_) return out;
  const int r0 = std::max(0, static_cast<int>(r0f));
  const int r1 = std::min(index_rows_ - 1, static_cast<int>(r1f));
  const int c0 = std::max(0, static_cast<int>(c0f));
  const int c1 = std::min(index_cols_ - 1, static_cast<int>(c1f));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const auto& bucket = buckets_[static_cast<std::size_t>(r) * index_cols_ + c];
      out.insert(out.end(), bucket.begin(), bucket.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<LinkIndex> RoadNetwork::find_link(LinkId id) const {
  auto it = link_lookup_.find(id);
  if (it == link_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeIndex> RoadNetwork::find_node(NodeId id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const LinkIndex> RoadNetwork::outgoing(NodeIndex n) const {
  return std::span<const LinkIndex>(adjacency_).subspan(
      adjacency_offsets_[n], adjacency_offsets_[n + 1] - adjacency_offsets_[n]);
}

LinkProjection RoadNetwork::project(LatLon p, LinkIndex li) const {
  const auto& l = links_.at(li);
  const LocalFrame frame(p);
  const auto pr = project_polyline(frame, l.geometry);
  const auto& a = l.geometry[pr.segment];
  const auto& b = l.geometry[pr.segment + 1];
  LinkProjection out;
  out.link = li;
  out.link_id = l.id;
  out.point = {a.lat + pr.t * (b.lat - a.lat), a.lon + pr.t * (b.lon - a.lon)};
  out.offset_m = l.cumulative_m[pr.segment] +
                 pr.t * (l.cumulative_m[pr.segment + 1] - l.cumulative_m[pr.segment]);
  out.offset_m = std::clamp(out.offset_m, 0.0, l.length_m);
  out.distance_m = pr.distance;
  return out;
}

std::vector<LinkProjection> RoadNetwork::nearest_links(LatLon p, double radius_m,
                                                       std::size_t k) const {
  std::vector<LinkProjection> out;
  for (LinkIndex li : index_candidates(p, radius_m)) {
    auto pr = project(p, li);
    if (pr.distance_m <= radius_m) out.push_back(pr);
  }
  std::sort(out.begin(), out.end(), projection_less);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<LinkProjection> RoadNetwork::nearest_links_brute(LatLon p, double radius_m,
                                                             std::size_t k) const {
  std::vector<LinkProjection> out;
  for (LinkIndex li = 0; li < links_.size(); ++li) {
    auto pr = project(p, li);
    if (pr.distance_m <= radius_m) out.push_back(pr);
  }
  std::sort(out.begin(), out.end(), projection_less);
  if (out.size() > k) out.resize(k);
  return out;
}

LatLon RoadNetwork::point_at(LinkIndex li, double offset_m) const {
  const auto& l = links_.at(li);
  offset_m = std::clamp(offset_m, 0.0, l.length_m);
  auto it = std::upper_bound(l.cumulative_m.begin(), l.cumulative_m.end(), offset_m);
  std::size_t seg = it == l.cumulative_m.begin()
                        ? 0
                        : static_cast<std::size_t>(it - l.cumulative_m.begin()) - 1;
  if (seg + 1 >= l.geometry.size()) seg = l.geometry.size() - 2;
  const double seg_len = l.cumulative_m[seg + 1] - l.cumulative_m[seg];
  const double t = seg_len > 0 ? (offset_m - l.cumulative_m[seg]) / seg_len : 0.0;
  const auto& a = l.geometry[seg];
  const auto& b = l.geometry[seg + 1];
  return {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
}

RoadNetwork parse_network_geojson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("network GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw ParseError("network GeoJSON: expected a FeatureCollection");
  }
  std::vector<RoadNetwork::FeatureSpec> specs;
  std::vector<std::size_t> spec_feature;
  std::vector<std::optional<double>> declared_length;
  std::map<NodeId, LatLon> declared;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto fail = [&](const std::string& what) -> ParseError {
      return ParseError("network feature " + std::to_string(i) + ": " + what);
    };
    const auto& f = features[i];
    try {
      const auto& geom = f.at("geometry");
      const auto type = geom.at("type").get<std::string>();
      const auto& props = f.at("properties");
      if (type == "Point") {
        const auto& c = geom.at("coordinates");
        const NodeId id = props.at("node_id").get<NodeId>();
        if (!declared.emplace(id, LatLon{c.at(1).get<double>(), c.at(0).get<double>()})
                 .second) {
          throw fail("duplicate node_id " + std::to_string(id));
        }
        continue;
      }
      if (type != "LineString") throw fail("unsupported geometry type " + type);
      RoadNetwork::FeatureSpec spec;
      spec.link_id = props.at("link_id").get<LinkId>();
      spec.from_node = props.at("from_node").get<NodeId>();
      spec.to_node = props.at("to_node").get<NodeId>();
      spec.oneway = props.at("oneway").get<bool>();
      for (const auto& c : geom.at("coordinates")) {
        spec.geometry.push_back({c.at(1).get<double>(), c.at(0).get<double>()});
      }
      std::optional<double> len;
      if (props.contains("length_m")) len = props["length_m"].get<double>();
      specs.push_back(std::move(spec));
      spec_feature.push_back(i);
      declared_length.push_back(len);
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto fail = [&](const std::string& what) {
      return ParseError("network feature " + std::to_string(spec_feature[s]) + ": link " +
                        std::to_string(specs[s].link_id) + " " + what);
    };
    if (!declared.empty()) {
      for (NodeId n : {specs[s].from_node, specs[s].to_node}) {
        if (!declared.contains(n)) throw fail("references missing node " + std::to_string(n));
      }
    }
    for (const auto& p : specs[s].geometry) {
      if (!is_valid(p)) throw fail("has invalid coordinates");
    }
    if (specs[s].geometry.size() < 2) throw fail("has fewer than 2 vertices");
    if (declared_length[s]) {
      const double gc = polyline_length(specs[s].geometry);
      if (std::abs(*declared_length[s] - gc) > 0.001 * gc) {
        throw fail("declared length disagrees with geometry by more than 0.1%");
      }
    }
  }
  return RoadNetwork::build(std::move(specs), std::move(declared));
}

RoadNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network_geojson(ss.str());
}

std::vector<std::optional<double>> route_distances(const RoadNetwork& net,
                                                   const LinkProjection& a,
                                                   std::span<const LinkProjection> targets,
                                                   double limit_m) {
  std::vector<std::optional<double>> out(targets.size());
  const auto& la = net.link(a.link);
  const double head = la.length_m - a.offset_m;
  std::vector<NodeIndex> stops;
  stops.reserve(targets.size());
  for (const auto& t : targets) stops.push_back(net.link(t.link).from);
  auto& ws = workspace();
  ws.reset(net.nodes().size());
  run_dijkstra(net, ws, la.to, head, limit_m, stops);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    std::optional<double> best;
    if (t.link == a.link && t.offset_m >= a.offset_m) best = t.offset_m - a.offset_m;
    const NodeIndex from = net.link(t.link).from;
    if (ws.is_settled(from)) {
      const double via = ws.get(from) + t.offset_m;
      if (!best || via < *best) best = via;
    }
    if (best && *best <= limit_m) out[i] = best;
  }
  return out;
}

Route shortest_path(const RoadNetwork& net, const LinkProjection& a, const LinkProjection& b) {
  Route route;
  if (a.link == b.link && a.offset_m == b.offset_m) {
    route.reachable = true;
    route.distance_m = 0.0;
    return route;
  }
  if (a.link == b.link && b.offset_m > a.offset_m) {
    route.reachable = true;
    route.distance_m = b.offset_m - a.offset_m;
    route.links = {a.link};
    return route;
  }
  const auto& la = net.link(a.link);
  const auto& lb = net.link(b.link);
  auto& ws = workspace();
  ws.reset(net.nodes().size());
  const NodeIndex stop[] = {lb.from};
  run_dijkstra(net, ws, la.to, la.length_m - a.offset_m,
               std::numeric_limits<double>::infinity(), stop);
  if (!ws.is_settled(lb.from)) return route;
  std::vector<LinkIndex> middle;
  for (NodeIndex n = lb.from; ws.pred_link[n] != kNoLink; n = net.link(ws.pred_link[n]).from) {
    middle.push_back(ws.pred_link[n]);
  }
  route.reachable = true;
  route.distance_m = ws.get(lb.from) + b.offset_m;
  route.links.push_back(a.link);
  route.links.insert(route.links.end(), middle.rbegin(), middle.rend());
  route.links.push_back(b.link);
  return route;
}

std::vector<TraversalRecord> dedupe_route_nodes(std::span<const TraversalRecord> seq) {
  std::vector<TraversalRecord> out;
  for (const auto& r : seq) {
    if (!out.empty() && out.back().link_id == r.link_id) {
      out.back().t = std::min(out.back().t, r.t);
    } else {
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace trajan::network

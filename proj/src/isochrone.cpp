#include "trajan/isochrone.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include "trajan/delaunay.hpp"
#include "trajan/geojson.hpp"

namespace trajan::isochrone {

namespace {

using delaunay::kNone;
using delaunay::Point;
using delaunay::Triangulation;

std::size_t tri_of(std::size_t e) { return e / 3; }

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

double tri_radius(const Triangulation& t, std::span<const Point> pts, std::size_t tri) {
  return delaunay::circumradius(pts[t.triangles[3 * tri]], pts[t.triangles[3 * tri + 1]],
                                pts[t.triangles[3 * tri + 2]]);
}

// Erodes the convex triangulation of `pts` from the outside and returns the
// boundary as point indices in clockwise order.
std::vector<std::size_t> carve(std::span<const Point> pts, double alpha) {
  const Triangulation tri(pts);
  const std::size_t nt = tri.triangle_count();
  std::vector<bool> alive(nt, true);
  std::vector<double> radius(nt);
  for (std::size_t t = 0; t < nt; ++t) radius[t] = tri_radius(tri, pts, t);

  auto is_boundary = [&](std::size_t e) {
    const auto o = tri.halfedges[e];
    return o == kNone || !alive[tri_of(o)];
  };
  std::vector<int> boundary_deg(pts.size(), 0);
  for (std::size_t e = 0; e < tri.halfedges.size(); ++e) {
    if (tri.halfedges[e] == kNone) {
      ++boundary_deg[tri.triangles[e]];
      ++boundary_deg[tri.triangles[delaunay::next_halfedge(e)]];
    }
  }

  using Entry = std::pair<double, std::size_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> queue(cmp);
  for (std::size_t e = 0; e < tri.halfedges.size(); ++e) {
    if (tri.halfedges[e] == kNone && radius[tri_of(e)] > alpha) {
      queue.push({radius[tri_of(e)], tri_of(e)});
    }
  }
  while (!queue.empty()) {
    const auto [r, t] = queue.top();
    queue.pop();
    if (!alive[t]) continue;
    std::size_t edge = kNone;
    int count = 0;
    for (std::size_t e = 3 * t; e < 3 * t + 3; ++e) {
      if (is_boundary(e)) {
        edge = e;
        ++count;
      }
    }
    if (count != 1) continue;
    const std::size_t v = tri.triangles[delaunay::prev_halfedge(edge)];
    if (boundary_deg[v] != 0) continue;
    alive[t] = false;
    // Edge a-b leaves the boundary and a-v, v-b join it.
    boundary_deg[v] += 2;
    for (std::size_t e : {delaunay::next_halfedge(edge), delaunay::prev_halfedge(edge)}) {
      const auto o = tri.halfedges[e];
      if (o != kNone && alive[tri_of(o)] && radius[tri_of(o)] > alpha) {
        queue.push({radius[tri_of(o)], tri_of(o)});
      }
    }
  }

  std::map<std::size_t, std::size_t> next;
  for (std::size_t t = 0; t < nt; ++t) {
    if (!alive[t]) continue;
    for (std::size_t e = 3 * t; e < 3 * t + 3; ++e) {
      if (is_boundary(e)) {
        next.emplace(tri.triangles[e], tri.triangles[delaunay::next_halfedge(e)]);
      }
    }
  }
  std::vector<std::size_t> ring;
  const std::size_t start = next.begin()->first;
  std::size_t cur = start;
  do {
    ring.push_back(cur);
    cur = next.at(cur);
  } while (cur != start && ring.size() <= next.size());
  if (ring.size() != next.size()) throw std::logic_error("concave hull boundary is not a simple ring");
  return ring;
}

}  // namespace

std::vector<double> default_thresholds() { return {10, 20, 30, 40}; }

std::vector<cluster::ClusterParams> default_params() {
  return {{1100, 60}, {1300, 20}, {1400, 10}, {1600, 5}};
}

void IsochroneSpec::validate() const {
  if (thresholds_min.empty()) throw DomainError("isochrone: no thresholds");
  if (thresholds_min.size() != params.size()) {
    throw DomainError("isochrone: need one parameter set per threshold");
  }
  for (std::size_t i = 0; i < thresholds_min.size(); ++i) {
    if (!(thresholds_min[i] > 0)) throw DomainError("isochrone: thresholds must be positive");
    if (i > 0 && !(thresholds_min[i] > thresholds_min[i - 1])) {
      throw DomainError("isochrone: thresholds must be strictly increasing");
    }
    params[i].validate();
  }
}

ConcaveHull concave_hull(std::span<const LatLon> points, double alpha_m) {
  if (!(alpha_m > 0)) throw DomainError("concave hull: alpha must be positive");
  ConcaveHull out;
  if (points.empty()) {
    out.diagnostic = "no points";
    return out;
  }
  double mlat = 0, mlon = 0;
  for (const auto& p : points) {
    mlat += p.lat;
    mlon += p.lon;
  }
  const LocalFrame frame({mlat / static_cast<double>(points.size()), mlon / static_cast<double>(points.size())});

  // Unique positions with multiplicities.
  std::vector<Point> xy;
  std::vector<std::size_t> owner(points.size());
  {
    std::map<std::pair<double, double>, std::size_t> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [it, fresh] = seen.emplace(std::make_pair(points[i].lat, points[i].lon), xy.size());
      if (fresh) {
        const auto v = frame.to_xy(points[i]);
        xy.push_back({v.x, v.y});
      }
      owner[i] = it->second;
    }
  }
  std::vector<std::size_t> mult(xy.size(), 0);
  for (auto o : owner) ++mult[o];

  std::optional<Triangulation> tri;
  try {
    tri.emplace(xy);
  } catch (const DomainError&) {
    out.n_discarded = points.size();
    out.discarded_fraction = 1.0;
    out.diagnostic = "degenerate point set (fewer than three non-collinear points)";
    return out;
  }

  const std::size_t nt = tri->triangle_count();
  std::vector<bool> small(nt);
  for (std::size_t t = 0; t < nt; ++t) small[t] = tri_radius(*tri, xy, t) <= alpha_m;
  UnionFind uf(nt);
  for (std::size_t e = 0; e < tri->halfedges.size(); ++e) {
    const auto o = tri->halfedges[e];
    if (o != kNone && small[tri_of(e)] && small[tri_of(o)]) uf.unite(tri_of(e), tri_of(o));
  }
  // Vertex membership per component root.
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t t = 0; t < nt; ++t) {
    if (!small[t]) continue;
    auto& m = members[uf.find(t)];
    for (std::size_t k = 0; k < 3; ++k) m.push_back(tri->triangles[3 * t + k]);
  }
  if (members.empty()) {
    out.n_discarded = points.size();
    out.discarded_fraction = 1.0;
    out.diagnostic = "no triangle fits within alpha";
    return out;
  }
  std::vector<std::size_t> best;
  std::size_t best_weight = 0;
  for (auto& [root, verts] : members) {
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    std::size_t w = 0;
    for (auto v : verts) w += mult[v];
    if (w > best_weight) {
      best_weight = w;
      best = verts;
    }
  }
  if (members.size() > 1) {
    out.diagnostic = "alpha shape has " + std::to_string(members.size()) +
                     " components; kept the largest";
  }

  std::vector<Point> sub;
  std::vector<bool> in_best(xy.size(), false);
  for (auto v : best) {
    sub.push_back(xy[v]);
    in_best[v] = true;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (in_best[owner[i]]) {
      out.kept.push_back(points[i]);
    } else {
      ++out.n_discarded;
    }
  }
  out.discarded_fraction = static_cast<double>(out.n_discarded) / static_cast<double>(points.size());

  const auto ring_idx = carve(sub, alpha_m);
  std::vector<LatLon> ring;
  for (auto it = ring_idx.rbegin(); it != ring_idx.rend(); ++it) {
    ring.push_back(frame.to_latlon({sub[*it].x, sub[*it].y}));
  }
  ring.push_back(ring.front());
  out.boundary = GeoPolygon(ring);
  return out;
}

std::vector<LatLon> collect_waypoints(std::span<const Trip> trips, const GeoPolygon& origin,
                                      double threshold_min) {
  if (!(threshold_min >= 0)) throw DomainError("threshold must be non-negative");
  const auto limit = static_cast<TimestampMs>(std::llround(threshold_min * 60000.0));
  std::vector<LatLon> out;
  for (const auto& trip : trips) {
    if (trip.waypoints.empty()) continue;
    const auto& first = trip.waypoints.front();
    if (!point_in_polygon(first.latlon(), origin)) continue;
    for (const auto& w : trip.waypoints) {
      if (w.t - first.t <= limit) out.push_back(w.latlon());
    }
  }
  return out;
}

Isochrone filter_and_hull(std::span<const LatLon> points, const cluster::ClusterParams& p) {
  p.validate();
  if (points.size() < p.min_pts) {
    throw DomainError("isochrone: " + std::to_string(points.size()) +
                      " points is fewer than min_pts " + std::to_string(p.min_pts));
  }
  Isochrone iso;
  iso.n_points = points.size();
  const auto lab = cluster::dbscan(points, p);
  std::vector<LatLon> survivors;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (lab.label[i] == cluster::kNoise) {
      ++iso.n_outliers;
    } else {
      survivors.push_back(points[i]);
    }
  }
  if (survivors.empty()) {
    iso.diagnostic = "all points are noise";
    return iso;
  }
  auto hull = concave_hull(survivors, p.eps);
  iso.boundary = std::move(hull.boundary);
  iso.kept = std::move(hull.kept);
  iso.n_discarded = hull.n_discarded;
  iso.discarded_fraction = hull.discarded_fraction;
  iso.diagnostic = std::move(hull.diagnostic);
  return iso;
}

std::vector<Isochrone> build_isochrones(std::span<const Trip> trips, const IsochroneSpec& spec) {
  spec.validate();
  std::vector<Isochrone> out;
  for (std::size_t i = 0; i < spec.thresholds_min.size(); ++i) {
    const auto pts = collect_waypoints(trips, spec.origin, spec.thresholds_min[i]);
    Isochrone iso;
    if (pts.size() < spec.params[i].min_pts) {
      iso.n_points = pts.size();
      iso.diagnostic = "only " + std::to_string(pts.size()) + " points, fewer than min_pts";
    } else {
      iso = filter_and_hull(pts, spec.params[i]);
    }
    iso.threshold_min = spec.thresholds_min[i];
    if (!out.empty() && iso.boundary && out.back().boundary) {
      const double frac = containment_fraction(iso, out.back());
      if (frac < 0.99) {
        std::ostringstream msg;
        msg << "contains " << frac * 100 << "% of the previous threshold's points";
        iso.diagnostic += iso.diagnostic.empty() ? msg.str() : "; " + msg.str();
      }
    }
    out.push_back(std::move(iso));
  }
  return out;
}

double hull_radius(const GeoPolygon& boundary, LatLon centre) {
  double r = 0;
  for (const auto& v : boundary.exterior()) r = std::max(r, haversine(centre, v));
  return r;
}

double containment_fraction(const Isochrone& outer, const Isochrone& inner) {
  if (inner.kept.empty()) return 1.0;
  if (!outer.boundary) return 0.0;
  std::size_t in = 0;
  for (const auto& p : inner.kept) in += point_in_polygon(p, *outer.boundary) ? 1 : 0;
  return static_cast<double>(in) / static_cast<double>(inner.kept.size());
}

LatLon ring_centroid(const GeoPolygon& poly) {
  const auto& ring = poly.exterior();
  const std::size_t n = ring.size() - 1;
  double lat = 0, lon = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lat += ring[i].lat;
    lon += ring[i].lon;
  }
  return {lat / static_cast<double>(n), lon / static_cast<double>(n)};
}

std::string to_geojson(std::span<const Isochrone> isochrones) {
  geojson::FeatureWriter out;
  for (const auto& iso : isochrones) {
    if (!iso.boundary) continue;
    out.add_polygon(*iso.boundary,
                    {{"threshold_min", iso.threshold_min},
                     {"n_points", static_cast<std::int64_t>(iso.n_points)},
                     {"n_outliers", static_cast<std::int64_t>(iso.n_outliers)},
                     {"n_discarded", static_cast<std::int64_t>(iso.n_discarded)}});
  }
  return out.str();
}

}  // namespace trajan::isochrone

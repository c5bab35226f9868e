#include "trajan/transit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>

#include "trajan/geojson.hpp"

namespace trajan::transit {

namespace {

using Xy = LocalFrame::Xy;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Xy sub(Xy a, Xy b) { return {a.x - b.x, a.y - b.y}; }
double dot(Xy a, Xy b) { return a.x * b.x + a.y * b.y; }

// Parameters t in [0, 1] where a + t (b - a) lies within r of point c.
std::optional<Interval> disk_interval(Xy a, Xy d, Xy c, double r) {
  const Xy f = sub(a, c);
  const double qa = dot(d, d);
  const double qb = 2 * dot(f, d);
  const double qc = dot(f, f) - r * r;
  if (qa == 0) {
    if (qc <= 0) return Interval{0, 1};
    return std::nullopt;
  }
  const double disc = qb * qb - 4 * qa * qc;
  if (disc < 0) return std::nullopt;
  const double s = std::sqrt(disc);
  return Interval{(-qb - s) / (2 * qa), (-qb + s) / (2 * qa)};
}

// Clip [lo, hi] by the constraint lo_v <= k0 + k1 t <= hi_v.
bool clip(double k0, double k1, double lo_v, double hi_v, Interval& iv) {
  if (k1 == 0) return k0 >= lo_v && k0 <= hi_v;
  double t0 = (lo_v - k0) / k1, t1 = (hi_v - k0) / k1;
  if (t0 > t1) std::swap(t0, t1);
  iv.lo = std::max(iv.lo, t0);
  iv.hi = std::min(iv.hi, t1);
  return iv.lo <= iv.hi;
}

// Parameters where segment a->b lies within r of segment c->e. The
// buffered segment is convex, so the answer is a single interval: the hull
// of the end-cap disks and the central rectangle.
std::optional<Interval> segment_interval(Xy a, Xy b, Xy c, Xy e, double r) {
  const Xy d = sub(b, a);
  std::optional<Interval> out;
  auto take = [&](std::optional<Interval> iv) {
    if (!iv) return;
    iv->lo = std::max(iv->lo, 0.0);
    iv->hi = std::min(iv->hi, 1.0);
    if (iv->lo > iv->hi) return;
    if (!out) {
      out = iv;
    } else {
      out->lo = std::min(out->lo, iv->lo);
      out->hi = std::max(out->hi, iv->hi);
    }
  };
  take(disk_interval(a, d, c, r));
  take(disk_interval(a, d, e, r));
  const Xy u = sub(e, c);
  const double len = std::sqrt(dot(u, u));
  if (len > 0) {
    const Xy uh{u.x / len, u.y / len};
    const Xy nh{-uh.y, uh.x};
    const Xy f = sub(a, c);
    Interval iv{0, 1};
    if (clip(dot(f, uh), dot(d, uh), 0, len, iv) && clip(dot(f, nh), dot(d, nh), -r, r, iv)) {
      take(iv);
    }
  }
  return out;
}

struct RouteSegment {
  Xy a, b;
  double min_x, max_x, min_y, max_y;
};

std::vector<RouteSegment> project_routes(const TransitNetwork& tn, const LocalFrame& f) {
  std::vector<RouteSegment> out;
  for (const auto& r : tn.routes) {
    for (std::size_t i = 1; i < r.line.size(); ++i) {
      const Xy a = f.to_xy(r.line[i - 1]);
      const Xy b = f.to_xy(r.line[i]);
      out.push_back({a, b, std::min(a.x, b.x), std::max(a.x, b.x), std::min(a.y, b.y),
                     std::max(a.y, b.y)});
    }
  }
  return out;
}

CoverageLength covered_projected(std::span<const std::vector<LatLon>> polylines,
                                 std::span<const RouteSegment> routes, double r,
                                 const LocalFrame& f) {
  CoverageLength out;
  std::vector<Interval> ivs;
  for (const auto& line : polylines) {
    for (std::size_t i = 1; i < line.size(); ++i) {
      const Xy a = f.to_xy(line[i - 1]);
      const Xy b = f.to_xy(line[i]);
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      out.total_m += len;
      if (len == 0) continue;
      ivs.clear();
      const double lo_x = std::min(a.x, b.x) - r, hi_x = std::max(a.x, b.x) + r;
      const double lo_y = std::min(a.y, b.y) - r, hi_y = std::max(a.y, b.y) + r;
      for (const auto& s : routes) {
        if (s.max_x < lo_x || s.min_x > hi_x || s.max_y < lo_y || s.min_y > hi_y) continue;
        if (auto iv = segment_interval(a, b, s.a, s.b, r)) ivs.push_back(*iv);
      }
      std::sort(ivs.begin(), ivs.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
      double covered = 0, cur_lo = 0, cur_hi = -1;
      for (const auto& iv : ivs) {
        if (iv.lo > cur_hi) {
          if (cur_hi >= cur_lo) covered += cur_hi - cur_lo;
          cur_lo = iv.lo;
          cur_hi = iv.hi;
        } else {
          cur_hi = std::max(cur_hi, iv.hi);
        }
      }
      if (cur_hi >= cur_lo) covered += cur_hi - cur_lo;
      out.covered_m += covered * len;
    }
  }
  return out;
}

std::optional<LatLon> first_point(std::span<const std::vector<LatLon>> polylines) {
  for (const auto& l : polylines) {
    if (!l.empty()) return l.front();
  }
  return std::nullopt;
}

}  // namespace

void TransitNetwork::validate() const {
  for (const auto& r : routes) {
    if (r.line.size() < 2) throw DomainError("transit route " + r.route_id + " has fewer than two points");
  }
}

TransitNetwork parse_transit(const std::string& text) {
  const auto features = geojson::parse_features(text, "transit network");
  TransitNetwork tn;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const auto where = "transit network feature " + std::to_string(i);
    if (f.type != geojson::GeometryType::LineString) throw ParseError(where + ": expected a LineString");
    const auto id = f.text("route_id");
    if (!id || id->empty()) throw ParseError(where + ": missing route_id");
    if (f.coords.size() < 2) throw ParseError(where + ": route needs at least two points");
    tn.routes.push_back({*id, f.text("name").value_or(""), f.coords});
  }
  return tn;
}

TransitNetwork load_transit(const std::string& path) {
  auto tn = parse_transit(geojson::read_text_file(path));
  tn.name = path;
  return tn;
}

std::string transit_geojson(const TransitNetwork& tn) {
  geojson::FeatureWriter w;
  for (const auto& r : tn.routes) w.add_line(r.line, {{"route_id", r.route_id}, {"name", r.name}});
  return w.str();
}

void OdClusterParams::validate() const {
  if (min_pts < 1) throw DomainError("min_pts must be at least 1");
  if (!(max_eps > 0) || !(threshold > 0)) throw DomainError("OPTICS radii must be positive");
  if (threshold > max_eps) throw DomainError("extraction threshold exceeds the OPTICS radius");
}

cluster::ClusterLabeling cluster_od_pairs(std::span<const Trip> trips, const OdClusterParams& p) {
  p.validate();
  if (trips.size() < p.min_pts) {
    throw DomainError("need at least " + std::to_string(p.min_pts) + " trips to cluster, got " +
                      std::to_string(trips.size()));
  }
  std::vector<cluster::OdPair> pairs;
  pairs.reserve(trips.size());
  for (const auto& t : trips) {
    if (t.waypoints.empty()) throw DomainError("trip " + t.trip_id + " has no waypoints");
    pairs.push_back({t.waypoints.front().latlon(), t.waypoints.back().latlon()});
  }
  return cluster::extract_clusters(cluster::optics(pairs, p.min_pts, p.max_eps), p.threshold);
}

std::vector<std::vector<LatLon>> matched_polylines(const mapmatch::MatchedTrip& m,
                                                   const network::RoadNetwork& net) {
  std::vector<std::vector<LatLon>> out;
  std::vector<LatLon> cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(std::move(cur));
    cur.clear();
  };
  for (const auto& e : m.route) {
    if (e.link_id == mapmatch::kGapLink) {
      flush();
      continue;
    }
    const auto idx = net.find_link(e.link_id);
    if (!idx) throw DomainError("matched link " + std::to_string(e.link_id) + " is not in the network");
    const auto& g = net.link(*idx).geometry;
    for (const auto& p : g) {
      if (cur.empty() || !(cur.back() == p)) cur.push_back(p);
    }
  }
  flush();
  return out;
}

CoverageLength covered_length(std::span<const std::vector<LatLon>> polylines,
                              const TransitNetwork& tn, double buffer_m, LatLon frame_ref) {
  if (!(buffer_m > 0)) throw DomainError("coverage buffer must be positive");
  const LocalFrame f(frame_ref);
  const auto routes = project_routes(tn, f);
  return covered_projected(polylines, routes, buffer_m, f);
}

double coverage_score(std::span<const std::vector<LatLon>> polylines, const TransitNetwork& tn,
                      double buffer_m) {
  if (!(buffer_m > 0)) throw DomainError("coverage buffer must be positive");
  const auto ref = first_point(polylines);
  if (!ref) return 0.0;
  return covered_length(polylines, tn, buffer_m, *ref).fraction();
}

CoverageReport demand_vs_transit(const cluster::ClusterLabeling& labeling,
                                 std::span<const std::vector<std::vector<LatLon>>> trajectories,
                                 const TransitNetwork& tn, double buffer_m,
                                 double uncovered_threshold, std::size_t workers) {
  if (!(buffer_m > 0)) throw DomainError("coverage buffer must be positive");
  if (!(uncovered_threshold >= 0 && uncovered_threshold <= 1)) {
    throw DomainError("uncovered threshold must lie in [0, 1]");
  }
  if (workers == 0) throw DomainError("worker count must be positive");
  if (trajectories.size() != labeling.label.size()) {
    throw DomainError("trajectory count does not match the clustering");
  }
  tn.validate();

  CoverageReport rep;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(labeling.n_clusters));
  for (std::size_t i = 0; i < labeling.label.size(); ++i) {
    if (labeling.label[i] == cluster::kNoise) {
      ++rep.noise_trips;
    } else {
      members.at(static_cast<std::size_t>(labeling.label[i])).push_back(i);
    }
  }

  // One frame for the whole report so every cluster is measured alike.
  std::optional<LatLon> ref;
  for (const auto& t : trajectories) {
    if ((ref = first_point(t))) break;
  }
  const LocalFrame frame(ref.value_or(LatLon{}));
  const auto routes = project_routes(tn, frame);

  std::vector<ClusterCoverage> rows(members.size());
  auto score = [&](std::size_t c) {
    CoverageLength acc;
    for (auto i : members[c]) {
      const auto part = covered_projected(trajectories[i], routes, buffer_m, frame);
      acc.covered_m += part.covered_m;
      acc.total_m += part.total_m;
    }
    rows[c] = {static_cast<int>(c), members[c].size(), acc.fraction(),
               acc.fraction() < uncovered_threshold};
  };
  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(1, members.size()));
  if (n_threads == 1) {
    for (std::size_t c = 0; c < members.size(); ++c) score(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < members.size(); c += n_threads) score(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ClusterCoverage& a, const ClusterCoverage& b) {
    return a.n_trips > b.n_trips;
  });
  rep.clusters = std::move(rows);
  return rep;
}

void write_coverage_csv(std::ostream& out, const CoverageReport& r) {
  out << "cluster_id,n_trips,covered_fraction,flagged\n";
  for (const auto& c : r.clusters) {
    out << c.cluster_id << ',' << c.n_trips << ',' << format_number(c.covered_fraction) << ','
        << (c.flagged ? "true" : "false") << '\n';
  }
}

std::vector<LinkHeat> link_heat(std::span<const mapmatch::MatchedTrip> matched) {
  std::map<network::LinkId, std::int64_t> counts;
  for (const auto& m : matched) {
    for (const auto& e : m.route) {
      if (e.link_id != mapmatch::kGapLink) ++counts[e.link_id];
    }
  }
  std::vector<LinkHeat> out;
  for (const auto& [id, n] : counts) out.push_back({id, n});
  return out;
}

std::string heat_layer_geojson(std::span<const LinkHeat> heat, const network::RoadNetwork& net) {
  geojson::FeatureWriter w;
  for (const auto& h : heat) {
    const auto idx = net.find_link(h.link_id);
    if (!idx) throw DomainError("heat link " + std::to_string(h.link_id) + " is not in the network");
    w.add_line(net.link(*idx).geometry, {{"link_id", h.link_id}, {"traversals", h.traversals}});
  }
  return w.str();
}

}  // namespace trajan::transit

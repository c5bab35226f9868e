#include "trajan/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>
#include <set>

namespace trajan::cluster {

namespace {

constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;

NeighborFn point_neighbors(std::span<const LatLon> points, const PointIndex& index) {
  return [points, &index](std::size_t i, double r, std::vector<Neighbor>& out) {
    index.within(points[i], r, out);
  };
}

NeighborFn od_neighbors(std::span<const OdPair> pairs, const PointIndex& origins) {
  return [pairs, &origins](std::size_t i, double r, std::vector<Neighbor>& out) {
    std::vector<Neighbor> near;
    origins.within(pairs[i].origin, r, near);
    out.clear();
    for (const auto& nb : near) {
      const double d = nb.distance + haversine(pairs[i].dest, pairs[nb.index].dest);
      if (d <= r) out.push_back({nb.index, d});
    }
  };
}

std::vector<LatLon> origins_of(std::span<const OdPair> pairs) {
  std::vector<LatLon> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.origin);
  return out;
}

}  // namespace

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::Core: return "core";
    case Role::Border: return "border";
    case Role::Noise: return "noise";
  }
  return "noise";
}

void ClusterParams::validate() const {
  if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("eps must be positive");
  if (min_pts < 1) throw DomainError("min_pts must be at least 1");
}

std::size_t ClusterLabeling::noise_count() const {
  return static_cast<std::size_t>(std::count(label.begin(), label.end(), kNoise));
}

PointIndex::PointIndex(std::span<const LatLon> points, double cell_m)
    : points_(points.begin(), points.end()) {
  if (!(cell_m > 0)) throw DomainError("index cell size must be positive");
  if (points_.empty()) return;
  double max_lat = -90, max_lon = -180, max_abs = 0;
  min_lat_ = 90;
  min_lon_ = 180;
  for (const auto& p : points_) {
    if (!is_valid(p)) throw DomainError("invalid coordinate in point set");
    min_lat_ = std::min(min_lat_, p.lat);
    max_lat = std::max(max_lat, p.lat);
    min_lon_ = std::min(min_lon_, p.lon);
    max_lon = std::max(max_lon, p.lon);
    max_abs = std::max(max_abs, std::abs(p.lat));
  }
  cell_lat_ = cell_m / kMetersPerDegree;
  const double c = std::max(std::cos(std::min(max_abs, 89.0) * std::numbers::pi / 180.0), 1e-3);
  cell_lon_ = cell_m / (kMetersPerDegree * c);
  // Keep the bucket count bounded for sparse, wide inputs.
  const double budget = 4.0 * static_cast<double>(points_.size()) + 1024.0;
  while (((max_lat - min_lat_) / cell_lat_ + 1) * ((max_lon - min_lon_) / cell_lon_ + 1) > budget) {
    cell_lat_ *= 2;
    cell_lon_ *= 2;
  }
  rows_ = static_cast<long>((max_lat - min_lat_) / cell_lat_) + 1;
  cols_ = static_cast<long>((max_lon - min_lon_) / cell_lon_) + 1;
  buckets_.assign(static_cast<std::size_t>(rows_ * cols_), {});
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const long r = static_cast<long>((points_[i].lat - min_lat_) / cell_lat_);
    const long col = static_cast<long>((points_[i].lon - min_lon_) / cell_lon_);
    buckets_[static_cast<std::size_t>(r * cols_ + col)].push_back(i);
  }
}

void PointIndex::within(LatLon p, double radius_m, std::vector<Neighbor>& out) const {
  out.clear();
  if (points_.empty()) return;
  const double dlat = radius_m / kMetersPerDegree;
  const double top = std::min(90.0, std::abs(p.lat) + dlat);
  const double cos_top = std::cos(top * std::numbers::pi / 180.0);
  const bool polar = top >= 89.999 || radius_m >= kEarthRadiusM;
  const double dlon = polar ? 360.0 : std::min(360.0, radius_m / (kMetersPerDegree * cos_top));
  const long r0 = std::max(0L, static_cast<long>(std::floor((p.lat - dlat - min_lat_) / cell_lat_)));
  const long r1 = std::min(rows_ - 1, static_cast<long>(std::floor((p.lat + dlat - min_lat_) / cell_lat_)));
  long c0 = std::max(0L, static_cast<long>(std::floor((p.lon - dlon - min_lon_) / cell_lon_)));
  long c1 = std::min(cols_ - 1, static_cast<long>(std::floor((p.lon + dlon - min_lon_) / cell_lon_)));
  if (dlon >= 180.0 || p.lon - dlon < -180.0 || p.lon + dlon > 180.0) {
    c0 = 0;
    c1 = cols_ - 1;
  }
  for (long r = r0; r <= r1; ++r) {
    for (long c = c0; c <= c1; ++c) {
      for (std::size_t i : buckets_[static_cast<std::size_t>(r * cols_ + c)]) {
        const double d = haversine(p, points_[i]);
        if (d <= radius_m) out.push_back({i, d});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
}

double od_pair_distance(const OdPair& a, const OdPair& b) {
  return haversine(a.origin, b.origin) + haversine(a.dest, b.dest);
}

ClusterLabeling dbscan(std::size_t n, const ClusterParams& p, const NeighborFn& neighbors) {
  p.validate();
  if (n == 0) throw DomainError("dbscan: empty input");
  constexpr int kUnvisited = -2;
  ClusterLabeling lab;
  lab.label.assign(n, kUnvisited);
  lab.role.assign(n, Role::Noise);
  std::vector<Neighbor> nb;
  int cluster = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (lab.label[i] != kUnvisited) continue;
    neighbors(i, p.eps, nb);
    if (nb.size() < p.min_pts) {
      lab.label[i] = kNoise;
      continue;
    }
    ++cluster;
    lab.label[i] = cluster;
    lab.role[i] = Role::Core;
    std::deque<std::size_t> queue;
    for (const auto& x : nb) queue.push_back(x.index);
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (lab.label[q] == kNoise) {
        lab.label[q] = cluster;
        lab.role[q] = Role::Border;
        continue;
      }
      if (lab.label[q] != kUnvisited) continue;
      lab.label[q] = cluster;
      neighbors(q, p.eps, nb);
      if (nb.size() >= p.min_pts) {
        lab.role[q] = Role::Core;
        for (const auto& x : nb) {
          if (lab.label[x.index] == kUnvisited || lab.label[x.index] == kNoise) {
            queue.push_back(x.index);
          }
        }
      } else {
        lab.role[q] = Role::Border;
      }
    }
  }
  lab.n_clusters = cluster + 1;
  return lab;
}

ClusterLabeling dbscan(std::span<const LatLon> points, const ClusterParams& p) {
  p.validate();
  if (points.empty()) throw DomainError("dbscan: empty input");
  const PointIndex index(points, p.eps);
  return dbscan(points.size(), p, point_neighbors(points, index));
}

ClusterLabeling dbscan(std::span<const OdPair> pairs, const ClusterParams& p) {
  p.validate();
  if (pairs.empty()) throw DomainError("dbscan: empty input");
  const auto origins = origins_of(pairs);
  const PointIndex index(origins, p.eps);
  return dbscan(pairs.size(), p, od_neighbors(pairs, index));
}

ReachabilityOrdering optics(std::size_t n, std::size_t min_pts, double max_eps,
                            const NeighborFn& neighbors) {
  if (n == 0) throw DomainError("optics: empty input");
  if (min_pts < 1) throw DomainError("min_pts must be at least 1");
  if (!(max_eps > 0)) throw DomainError("max_eps must be positive");
  ReachabilityOrdering ord;
  ord.reachability.assign(n, kUndefined);
  ord.core_distance.assign(n, kUndefined);
  ord.order.reserve(n);
  std::vector<bool> processed(n, false);
  std::vector<Neighbor> nb;
  std::vector<double> dists;
  std::set<std::pair<double, std::size_t>> seeds;

  auto expand = [&](std::size_t p) {
    neighbors(p, max_eps, nb);
    processed[p] = true;
    ord.order.push_back(p);
    if (nb.size() < min_pts) return;
    dists.clear();
    for (const auto& x : nb) dists.push_back(x.distance);
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(min_pts - 1),
                     dists.end());
    const double core = dists[min_pts - 1];
    ord.core_distance[p] = core;
    for (const auto& x : nb) {
      if (processed[x.index]) continue;
      const double r = std::max(core, x.distance);
      double& cur = ord.reachability[x.index];
      if (cur == kUndefined) {
        cur = r;
        seeds.insert({r, x.index});
      } else if (r < cur) {
        seeds.erase({cur, x.index});
        cur = r;
        seeds.insert({r, x.index});
      }
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (processed[i]) continue;
    expand(i);
    while (!seeds.empty()) {
      const auto [r, q] = *seeds.begin();
      seeds.erase(seeds.begin());
      expand(q);
    }
  }
  return ord;
}

ReachabilityOrdering optics(std::span<const LatLon> points, std::size_t min_pts, double max_eps) {
  if (points.empty()) throw DomainError("optics: empty input");
  if (!(max_eps > 0)) throw DomainError("max_eps must be positive");
  const PointIndex index(points, max_eps);
  return optics(points.size(), min_pts, max_eps, point_neighbors(points, index));
}

ReachabilityOrdering optics(std::span<const OdPair> pairs, std::size_t min_pts, double max_eps) {
  if (pairs.empty()) throw DomainError("optics: empty input");
  if (!(max_eps > 0)) throw DomainError("max_eps must be positive");
  const auto origins = origins_of(pairs);
  const PointIndex index(origins, max_eps);
  return optics(pairs.size(), min_pts, max_eps, od_neighbors(pairs, index));
}

ClusterLabeling extract_clusters(const ReachabilityOrdering& ord, double threshold) {
  if (!(threshold > 0)) throw DomainError("extraction threshold must be positive");
  ClusterLabeling lab;
  const std::size_t n = ord.reachability.size();
  lab.label.assign(n, kNoise);
  lab.role.assign(n, Role::Noise);
  int cluster = -1;
  for (std::size_t p : ord.order) {
    const bool core = ord.core_distance[p] <= threshold;
    if (ord.reachability[p] > threshold) {
      if (core) {
        ++cluster;
        lab.label[p] = cluster;
        lab.role[p] = Role::Core;
      }
    } else if (cluster >= 0) {
      lab.label[p] = cluster;
      lab.role[p] = core ? Role::Core : Role::Border;
    }
  }
  lab.n_clusters = cluster + 1;
  return lab;
}

void write_labeling_csv(std::ostream& out, const ClusterLabeling& lab) {
  out << "point_index,cluster_id,role\n";
  for (std::size_t i = 0; i < lab.label.size(); ++i) {
    out << i << ',' << lab.label[i] << ',' << to_string(lab.role[i]) << '\n';
  }
}

}  // namespace trajan::cluster

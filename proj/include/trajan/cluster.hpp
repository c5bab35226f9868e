#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "trajan/core.hpp"

namespace trajan::cluster {

inline constexpr int kNoise = -1;
inline constexpr double kUndefined = std::numeric_limits<double>::infinity();

enum class Role { Core, Border, Noise };
std::string_view to_string(Role r) noexcept;

struct ClusterParams {
  double eps = 1000.0;  // meters
  std::size_t min_pts = 5;
  void validate() const;
};

struct ClusterLabeling {
  std::vector<int> label;  // cluster id or kNoise
  std::vector<Role> role;
  int n_clusters = 0;

  std::size_t noise_count() const;
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Fills `out` with every item within `radius` of item i (including i),
/// ascending index.
using NeighborFn = std::function<void(std::size_t i, double radius, std::vector<Neighbor>& out)>;

/// Bucket grid over lat/lon for radius queries under the haversine metric.
class PointIndex {
 public:
  PointIndex(std::span<const LatLon> points, double cell_m);
  void within(LatLon p, double radius_m, std::vector<Neighbor>& out) const;
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<LatLon> points_;
  double min_lat_ = 0, min_lon_ = 0, cell_lat_ = 1, cell_lon_ = 1;
  long rows_ = 1, cols_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

struct OdPair {
  LatLon origin;
  LatLon dest;
};

/// Sum of origin and destination great-circle separations.
double od_pair_distance(const OdPair& a, const OdPair& b);

ClusterLabeling dbscan(std::size_t n, const ClusterParams& p, const NeighborFn& neighbors);
ClusterLabeling dbscan(std::span<const LatLon> points, const ClusterParams& p);
ClusterLabeling dbscan(std::span<const OdPair> pairs, const ClusterParams& p);

struct ReachabilityOrdering {
  std::vector<std::size_t> order;
  std::vector<double> reachability;   // by point index; kUndefined if none
  std::vector<double> core_distance;  // by point index; kUndefined if not core
};

ReachabilityOrdering optics(std::size_t n, std::size_t min_pts, double max_eps,
                            const NeighborFn& neighbors);
ReachabilityOrdering optics(std::span<const LatLon> points, std::size_t min_pts, double max_eps);
ReachabilityOrdering optics(std::span<const OdPair> pairs, std::size_t min_pts, double max_eps);

/// Horizontal cut through the reachability plot at `threshold`.
ClusterLabeling extract_clusters(const ReachabilityOrdering& ord, double threshold);

/// CSV: point_index,cluster_id,role
void write_labeling_csv(std::ostream& out, const ClusterLabeling& lab);

}  // namespace trajan::cluster

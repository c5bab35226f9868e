#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trajan/cluster.hpp"
#include "trajan/core.hpp"
#include "trajan/mapmatch.hpp"
#include "trajan/network.hpp"

namespace trajan::transit {

struct TransitRoute {
  std::string route_id;
  std::string name;
  std::vector<LatLon> line;
};

struct TransitNetwork {
  std::string name;
  std::vector<TransitRoute> routes;

  /// Throws DomainError for routes with fewer than two points.
  void validate() const;
};

/// LineString features with {route_id, name}. Throws ParseError.
TransitNetwork parse_transit(const std::string& text);
TransitNetwork load_transit(const std::string& path);
std::string transit_geojson(const TransitNetwork& tn);

inline constexpr double kDefaultBufferM = 400.0;
inline constexpr double kDefaultUncoveredThreshold = 0.5;

struct OdClusterParams {
  std::size_t min_pts = 5;
  double max_eps = 2000.0;     // meters, OPTICS neighbourhood cap
  double threshold = 1000.0;   // meters, extraction cut
  void validate() const;
};

/// OPTICS over first/last waypoint pairs, cut at `threshold`. Throws
/// DomainError with fewer than min_pts trips.
cluster::ClusterLabeling cluster_od_pairs(std::span<const Trip> trips, const OdClusterParams& p);

/// Link geometry of a matched route, joined end to end; gaps start a new
/// polyline.
std::vector<std::vector<LatLon>> matched_polylines(const mapmatch::MatchedTrip& m,
                                                   const network::RoadNetwork& net);

struct CoverageLength {
  double covered_m = 0.0;
  double total_m = 0.0;
  double fraction() const { return total_m > 0 ? covered_m / total_m : 0.0; }
};

/// Length of each polyline lying within `buffer_m` of any route, computed
/// exactly per segment as a union of parameter intervals in a local planar
/// frame about `frame_ref`.
CoverageLength covered_length(std::span<const std::vector<LatLon>> polylines,
                              const TransitNetwork& tn, double buffer_m, LatLon frame_ref);

/// Covered share of the polylines' total length. Empty network gives 0.
/// Throws DomainError unless buffer_m > 0.
double coverage_score(std::span<const std::vector<LatLon>> polylines, const TransitNetwork& tn,
                      double buffer_m = kDefaultBufferM);

struct ClusterCoverage {
  int cluster_id = 0;
  std::size_t n_trips = 0;
  double covered_fraction = 0.0;
  bool flagged = false;
};

struct CoverageReport {
  std::vector<ClusterCoverage> clusters;  // by n_trips descending, then cluster id
  std::size_t noise_trips = 0;
};

/// Scores every cluster of `labeling`. trajectories[i] holds the matched
/// polylines of trip i.
CoverageReport demand_vs_transit(const cluster::ClusterLabeling& labeling,
                                 std::span<const std::vector<std::vector<LatLon>>> trajectories,
                                 const TransitNetwork& tn, double buffer_m = kDefaultBufferM,
                                 double uncovered_threshold = kDefaultUncoveredThreshold,
                                 std::size_t workers = 1);

/// cluster_id,n_trips,covered_fraction,flagged
void write_coverage_csv(std::ostream& out, const CoverageReport& r);

struct LinkHeat {
  network::LinkId link_id = 0;
  std::int64_t traversals = 0;
};

/// Traversal counts per directed link over the matched trips, by link id.
std::vector<LinkHeat> link_heat(std::span<const mapmatch::MatchedTrip> matched);

/// Link geometries with their traversal counts.
std::string heat_layer_geojson(std::span<const LinkHeat> heat, const network::RoadNetwork& net);

}  // namespace trajan::transit

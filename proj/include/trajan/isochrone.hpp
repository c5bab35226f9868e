#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajan/cluster.hpp"
#include "trajan/core.hpp"

namespace trajan::isochrone {

/// Default thresholds (minutes) and their DBSCAN parameters.
std::vector<double> default_thresholds();
std::vector<cluster::ClusterParams> default_params();

struct IsochroneSpec {
  GeoPolygon origin;
  std::vector<double> thresholds_min = default_thresholds();
  std::vector<cluster::ClusterParams> params = default_params();

  /// Thresholds positive and strictly increasing, one valid parameter set
  /// per threshold. Throws DomainError otherwise.
  void validate() const;
};

struct ConcaveHull {
  std::optional<GeoPolygon> boundary;
  std::vector<LatLon> kept;       // points of the retained component
  std::size_t n_discarded = 0;    // points outside the retained component
  double discarded_fraction = 0.0;
  std::string diagnostic;
};

/// Alpha-shape style hull: keeps the largest component of Delaunay
/// triangles whose circumradius is at most alpha, then erodes the convex
/// triangulation of that component from the outside while the boundary
/// stays a simple ring through every retained point.
ConcaveHull concave_hull(std::span<const LatLon> points, double alpha_m);

struct Isochrone {
  double threshold_min = 0.0;
  std::optional<GeoPolygon> boundary;  // CCW exterior ring
  std::size_t n_points = 0;            // points collected
  std::size_t n_outliers = 0;          // DBSCAN noise
  std::size_t n_discarded = 0;         // non-noise points outside the boundary component
  double discarded_fraction = 0.0;
  std::vector<LatLon> kept;
  std::string diagnostic;
};

/// Waypoints within `threshold_min` of the start of every trip that begins
/// inside `origin`.
std::vector<LatLon> collect_waypoints(std::span<const Trip> trips, const GeoPolygon& origin,
                                      double threshold_min);

/// DBSCAN, drop noise, hull the survivors with alpha = eps. Throws
/// DomainError when there are fewer than min_pts points.
Isochrone filter_and_hull(std::span<const LatLon> points, const cluster::ClusterParams& p);

std::vector<Isochrone> build_isochrones(std::span<const Trip> trips, const IsochroneSpec& spec);

/// Largest vertex distance from `centre`.
double hull_radius(const GeoPolygon& boundary, LatLon centre);

/// Fraction of `inner.kept` inside `outer.boundary` (1 when inner is empty).
double containment_fraction(const Isochrone& outer, const Isochrone& inner);

/// Mean of the exterior ring vertices.
LatLon ring_centroid(const GeoPolygon& poly);

/// Polygon features with threshold_min, n_points, n_outliers.
std::string to_geojson(std::span<const Isochrone> isochrones);

}  // namespace trajan::isochrone

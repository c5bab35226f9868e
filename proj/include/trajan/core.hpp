#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trajan {

// Error taxonomy. The CLI maps DomainError to exit status 1 and the
// others to exit status 2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean Earth radius used for every great-circle computation.
inline constexpr double kEarthRadiusM = 6371008.8;

/// Epoch milliseconds, UTC.
using TimestampMs = std::int64_t;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

bool is_valid(LatLon p) noexcept;

struct Waypoint {
  double lat = 0.0;
  double lon = 0.0;
  TimestampMs t = 0;

  LatLon latlon() const noexcept { return {lat, lon}; }
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

enum class TravelMode { Vehicle, Pedestrian, Unknown };
enum class WeightClass { W0_14, W14_26, W26_plus, Unknown };
enum class Provider { Fleet, Consumer, Unknown };

std::string_view to_string(TravelMode m) noexcept;
std::string_view to_string(WeightClass w) noexcept;
std::string_view to_string(Provider p) noexcept;

// Parsers accept the names produced by to_string; an empty field maps to
// Unknown. Anything else yields nullopt.
std::optional<TravelMode> parse_travel_mode(std::string_view s) noexcept;
std::optional<WeightClass> parse_weight_class(std::string_view s) noexcept;
std::optional<Provider> parse_provider(std::string_view s) noexcept;

inline constexpr std::array<WeightClass, 4> kAllWeightClasses = {
    WeightClass::W0_14, WeightClass::W14_26, WeightClass::W26_plus,
    WeightClass::Unknown};

struct Trip {
  std::string trip_id;
  std::string device_id;
  TravelMode mode = TravelMode::Unknown;
  WeightClass weight_class = WeightClass::Unknown;
  Provider provider = Provider::Unknown;
  std::vector<Waypoint> waypoints;

  TimestampMs start_time() const { return waypoints.front().t; }
  TimestampMs end_time() const { return waypoints.back().t; }
  TimestampMs duration_ms() const { return end_time() - start_time(); }

  friend bool operator==(const Trip&, const Trip&) = default;
};

/// Why a trip fails validation, or nullopt when it is valid.
/// Reasons are stable snake_case tokens used in ingest reports.
std::optional<std::string> trip_defect(const Trip& trip);

/// Throws DomainError naming the defect.
void validate_trip(const Trip& trip);

/// Closed lat/lon ring polygon with optional holes.
class GeoPolygon {
 public:
  GeoPolygon() = default;
  /// Rings must be closed and carry at least 4 vertices including the
  /// closing one; violations throw DomainError.
  explicit GeoPolygon(std::vector<LatLon> exterior,
                      std::vector<std::vector<LatLon>> holes = {});

  /// Closes the ring if needed, then validates.
  static GeoPolygon from_open_ring(std::vector<LatLon> ring);
  /// Axis-aligned lat/lon box.
  static GeoPolygon box(double min_lat, double min_lon, double max_lat,
                        double max_lon);

  const std::vector<LatLon>& exterior() const noexcept { return exterior_; }
  const std::vector<std::vector<LatLon>>& holes() const noexcept {
    return holes_;
  }
  bool empty() const noexcept { return exterior_.empty(); }

  double min_lat() const noexcept { return min_lat_; }
  double max_lat() const noexcept { return max_lat_; }
  double min_lon() const noexcept { return min_lon_; }
  double max_lon() const noexcept { return max_lon_; }

  friend bool operator==(const GeoPolygon& a, const GeoPolygon& b) {
    return a.exterior_ == b.exterior_ && a.holes_ == b.holes_;
  }

 private:
  std::vector<LatLon> exterior_;
  std::vector<std::vector<LatLon>> holes_;
  double min_lat_ = 0, max_lat_ = 0, min_lon_ = 0, max_lon_ = 0;
};

struct GridSpec {
  LatLon origin;  // south-west corner of cell (0, 0)
  double cell_m = 0.0;
  int rows = 0;
  int cols = 0;

  /// Throws DomainError when cell size or dimensions are not positive.
  void validate() const;
};

struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

// --- geodesy ---------------------------------------------------------------

/// Great-circle distance in meters on the mean-radius sphere.
/// Throws DomainError on out-of-range or non-finite coordinates.
double haversine(LatLon a, LatLon b);
inline double haversine(const Waypoint& a, const Waypoint& b) {
  return haversine(a.latlon(), b.latlon());
}

/// Initial bearing from a to b in degrees, [0, 360), 0 = north.
double initial_bearing(LatLon a, LatLon b);

/// Point reached travelling `distance_m` from `from` along `bearing_deg`.
LatLon destination_point(LatLon from, double bearing_deg, double distance_m);

/// Average speed between two fixes in m/s. Throws DomainError when
/// b.t <= a.t.
double segment_speed(const Waypoint& a, const Waypoint& b);

/// Even-odd containment; points on an edge (within ~1e-9 degrees) or a
/// vertex count as inside. Points inside a hole are outside unless they
/// lie on the hole's edge.
bool point_in_polygon(LatLon p, const GeoPolygon& poly);

/// Same test against a bare closed ring. Throws DomainError for rings
/// with fewer than 4 vertices.
bool point_in_ring(LatLon p, std::span<const LatLon> ring);

/// True when the polygons share any area or boundary point.
bool polygons_intersect(const GeoPolygon& a, const GeoPolygon& b);

/// Signed planar area of a ring in square meters (local equirectangular
/// projection about the ring's first vertex). Positive when
/// counter-clockwise.
double ring_area_m2(std::span<const LatLon> ring);

/// Cell containing p, or nullopt outside the grid. Uses an equirectangular
/// projection about the grid origin; points on a cell boundary fall in the
/// higher-index cell.
std::optional<GridCell> grid_index(LatLon p, const GridSpec& g);

LatLon grid_cell_center(GridCell c, const GridSpec& g);

/// Corner ring (closed, counter-clockwise) of a grid cell.
std::vector<LatLon> grid_cell_ring(GridCell c, const GridSpec& g);

/// Local equirectangular frame: meters east/north of a reference point.
/// Affine in lat/lon, so straight lines and containment are preserved.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(LatLon ref);

  struct Xy {
    double x = 0.0;
    double y = 0.0;
  };

  Xy to_xy(LatLon p) const noexcept;
  LatLon to_latlon(Xy xy) const noexcept;
  LatLon reference() const noexcept { return ref_; }

 private:
  LatLon ref_;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lon_ = 0.0;
};

/// Lower median of an unsorted sample (element at index (n-1)/2 after
/// sorting). Throws DomainError on empty input.
double lower_median(std::vector<double> values);

/// Lower quantile: element at rank ceil(q*n) (1-based), clamped to [1, n],
/// of a sorted sample.
double lower_quantile_sorted(std::span<const double> sorted, double q);

/// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view s);

/// Shortest round-trip decimal form without exponent.
std::string format_number(double v);

}  // namespace trajan

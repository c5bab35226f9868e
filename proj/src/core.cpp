#include "trajan/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace trajan {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMetersPerDegLat = kEarthRadiusM * kDegToRad;

// Tolerance (degrees) for treating a point as lying on a polygon edge.
constexpr double kEdgeTolDeg = 1e-9;

// Nudge applied before flooring grid coordinates so a point computed to sit
// exactly on a cell boundary is not lost to rounding in the lower cell.
constexpr double kGridBoundaryNudge = 1e-9;

void require_valid(LatLon p) {
  if (!is_valid(p)) {
    throw DomainError("invalid coordinate (" + std::to_string(p.lat) + ", " +
                      std::to_string(p.lon) + ")");
  }
}

void check_ring(const std::vector<LatLon>& ring, const char* what) {
  if (ring.size() < 4) {
    throw DomainError(std::string(what) + " ring needs at least 4 vertices");
  }
  if (ring.front() != ring.back()) {
    throw DomainError(std::string(what) + " ring is not closed");
  }
  for (const auto& p : ring) require_valid(p);
}

bool on_segment(LatLon p, LatLon a, LatLon b) {
  const double dx = b.lon - a.lon;
  const double dy = b.lat - a.lat;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const double ex = a.lon + t * dx - p.lon;
  const double ey = a.lat + t * dy - p.lat;
  return ex * ex + ey * ey <= kEdgeTolDeg * kEdgeTolDeg;
}

bool on_ring_edge(LatLon p, std::span<const LatLon> ring) {
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    if (on_segment(p, ring[i], ring[i + 1])) return true;
  }
  return false;
}

bool ray_cast(LatLon p, std::span<const LatLon> ring) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const LatLon& a = ring[i];
    const LatLon& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

double orient(LatLon a, LatLon b, LatLon c) {
  return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
}

bool segments_intersect(LatLon a, LatLon b, LatLon c, LatLon d) {
  const double d1 = orient(c, d, a);
  const double d2 = orient(c, d, b);
  const double d3 = orient(a, b, c);
  const double d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) ||
         on_segment(d, a, b);
}

}  // namespace

bool is_valid(LatLon p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
         p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

std::string_view to_string(TravelMode m) noexcept {
  switch (m) {
    case TravelMode::Vehicle: return "Vehicle";
    case TravelMode::Pedestrian: return "Pedestrian";
    case TravelMode::Unknown: break;
  }
  return "Unknown";
}

std::string_view to_string(WeightClass w) noexcept {
  switch (w) {
    case WeightClass::W0_14: return "W0_14";
    case WeightClass::W14_26: return "W14_26";
    case WeightClass::W26_plus: return "W26_plus";
    case WeightClass::Unknown: break;
  }
  return "Unknown";
}

std::string_view to_string(Provider p) noexcept {
  switch (p) {
    case Provider::Fleet: return "Fleet";
    case Provider::Consumer: return "Consumer";
    case Provider::Unknown: break;
  }
  return "Unknown";
}

std::optional<TravelMode> parse_travel_mode(std::string_view s) noexcept {
  if (s == "Vehicle") return TravelMode::Vehicle;
  if (s == "Pedestrian") return TravelMode::Pedestrian;
  if (s == "Unknown" || s.empty()) return TravelMode::Unknown;
  return std::nullopt;
}

std::optional<WeightClass> parse_weight_class(std::string_view s) noexcept {
  if (s == "W0_14") return WeightClass::W0_14;
  if (s == "W14_26") return WeightClass::W14_26;
  if (s == "W26_plus") return WeightClass::W26_plus;
  if (s == "Unknown" || s.empty()) return WeightClass::Unknown;
  return std::nullopt;
}

std::optional<Provider> parse_provider(std::string_view s) noexcept {
  if (s == "Fleet") return Provider::Fleet;
  if (s == "Consumer") return Provider::Consumer;
  if (s == "Unknown" || s.empty()) return Provider::Unknown;
  return std::nullopt;
}

std::optional<std::string> trip_defect(const Trip& trip) {
  for (const auto& w : trip.waypoints) {
    if (!is_valid(w.latlon())) return "coordinate_bounds";
    if (w.t <= 0) return "timestamp_not_positive";
  }
  if (trip.waypoints.size() < 2) return "too_few_waypoints";
  for (std::size_t i = 1; i < trip.waypoints.size(); ++i) {
    if (trip.waypoints[i].t < trip.waypoints[i - 1].t) {
      return "timestamps_decreasing";
    }
  }
  return std::nullopt;
}

void validate_trip(const Trip& trip) {
  if (auto defect = trip_defect(trip)) {
    throw DomainError("trip '" + trip.trip_id + "': " + *defect);
  }
}

GeoPolygon::GeoPolygon(std::vector<LatLon> exterior,
                       std::vector<std::vector<LatLon>> holes)
    : exterior_(std::move(exterior)), holes_(std::move(holes)) {
  check_ring(exterior_, "exterior");
  for (const auto& h : holes_) check_ring(h, "hole");
  min_lat_ = max_lat_ = exterior_.front().lat;
  min_lon_ = max_lon_ = exterior_.front().lon;
  for (const auto& p : exterior_) {
    min_lat_ = std::min(min_lat_, p.lat);
    max_lat_ = std::max(max_lat_, p.lat);
    min_lon_ = std::min(min_lon_, p.lon);
    max_lon_ = std::max(max_lon_, p.lon);
  }
}

GeoPolygon GeoPolygon::from_open_ring(std::vector<LatLon> ring) {
  if (!ring.empty() && ring.front() != ring.back()) ring.push_back(ring.front());
  return GeoPolygon(std::move(ring));
}

GeoPolygon GeoPolygon::box(double min_lat, double min_lon, double max_lat,
                           double max_lon) {
  return GeoPolygon({{min_lat, min_lon},
                     {min_lat, max_lon},
                     {max_lat, max_lon},
                     {max_lat, min_lon},
                     {min_lat, min_lon}});
}

void GridSpec::validate() const {
  if (!(cell_m > 0.0) || !std::isfinite(cell_m)) {
    throw DomainError("grid cell size must be positive");
  }
  if (rows < 1 || cols < 1) throw DomainError("grid rows and cols must be >= 1");
  if (!is_valid(origin)) throw DomainError("grid origin is not a valid coordinate");
}

double haversine(LatLon a, LatLon b) {
  require_valid(a);
  require_valid(b);
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double initial_bearing(LatLon a, LatLon b) {
  require_valid(a);
  require_valid(b);
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::atan2(y, x) * kRadToDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

LatLon destination_point(LatLon from, double bearing_deg, double distance_m) {
  require_valid(from);
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDegToRad;
  const double phi1 = from.lat * kDegToRad;
  const double lambda1 = from.lon * kDegToRad;
  const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = lambda2 * kRadToDeg;
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {phi2 * kRadToDeg, lon};
}

double segment_speed(const Waypoint& a, const Waypoint& b) {
  if (b.t <= a.t) {
    throw DomainError("segment_speed: non-positive duration");
  }
  return haversine(a, b) / (static_cast<double>(b.t - a.t) / 1000.0);
}

bool point_in_ring(LatLon p, std::span<const LatLon> ring) {
  if (ring.size() < 4) throw DomainError("polygon ring needs at least 4 vertices");
  if (on_ring_edge(p, ring)) return true;
  return ray_cast(p, ring);
}

bool point_in_polygon(LatLon p, const GeoPolygon& poly) {
  const auto& ext = poly.exterior();
  if (ext.size() < 4) throw DomainError("degenerate polygon");
  if (p.lat < poly.min_lat() - kEdgeTolDeg || p.lat > poly.max_lat() + kEdgeTolDeg ||
      p.lon < poly.min_lon() - kEdgeTolDeg || p.lon > poly.max_lon() + kEdgeTolDeg) {
    return false;
  }
  if (!point_in_ring(p, ext)) return false;
  for (const auto& hole : poly.holes()) {
    if (on_ring_edge(p, hole)) continue;
    if (ray_cast(p, hole)) return false;
  }
  return true;
}

bool polygons_intersect(const GeoPolygon& a, const GeoPolygon& b) {
  if (a.max_lat() < b.min_lat() || b.max_lat() < a.min_lat() ||
      a.max_lon() < b.min_lon() || b.max_lon() < a.min_lon()) {
    return false;
  }
  const auto& ra = a.exterior();
  const auto& rb = b.exterior();
  for (std::size_t i = 0; i + 1 < ra.size(); ++i) {
    for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
      if (segments_intersect(ra[i], ra[i + 1], rb[j], rb[j + 1])) return true;
    }
  }
  return point_in_polygon(ra.front(), b) || point_in_polygon(rb.front(), a);
}

double ring_area_m2(std::span<const LatLon> ring) {
  if (ring.size() < 4) return 0.0;
  const LocalFrame frame(ring.front());
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const auto p = frame.to_xy(ring[i]);
    const auto q = frame.to_xy(ring[i + 1]);
    twice += p.x * q.y - q.x * p.y;
  }
  return twice / 2.0;
}

LocalFrame::LocalFrame(LatLon ref)
    : ref_(ref),
      m_per_deg_lat_(kMetersPerDegLat),
      m_per_deg_lon_(kMetersPerDegLat * std::cos(ref.lat * kDegToRad)) {}

LocalFrame::Xy LocalFrame::to_xy(LatLon p) const noexcept {
  return {(p.lon - ref_.lon) * m_per_deg_lon_, (p.lat - ref_.lat) * m_per_deg_lat_};
}

LatLon LocalFrame::to_latlon(Xy xy) const noexcept {
  return {ref_.lat + xy.y / m_per_deg_lat_, ref_.lon + xy.x / m_per_deg_lon_};
}

std::optional<GridCell> grid_index(LatLon p, const GridSpec& g) {
  const LocalFrame frame(g.origin);
  const auto xy = frame.to_xy(p);
  const double fc = std::floor(xy.x / g.cell_m + kGridBoundaryNudge);
  const double fr = std::floor(xy.y / g.cell_m + kGridBoundaryNudge);
  if (fc < 0 || fr < 0 || fc >= g.cols || fr >= g.rows) return std::nullopt;
  return GridCell{static_cast<int>(fr), static_cast<int>(fc)};
}

LatLon grid_cell_center(GridCell c, const GridSpec& g) {
  const LocalFrame frame(g.origin);
  return frame.to_latlon({(c.col + 0.5) * g.cell_m, (c.row + 0.5) * g.cell_m});
}

std::vector<LatLon> grid_cell_ring(GridCell c, const GridSpec& g) {
  const LocalFrame frame(g.origin);
  const double x0 = c.col * g.cell_m, x1 = (c.col + 1) * g.cell_m;
  const double y0 = c.row * g.cell_m, y1 = (c.row + 1) * g.cell_m;
  return {frame.to_latlon({x0, y0}), frame.to_latlon({x1, y0}),
          frame.to_latlon({x1, y1}), frame.to_latlon({x0, y1}),
          frame.to_latlon({x0, y0})};
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of empty sample");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double lower_quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[400];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, ptr);
}

}  // namespace trajan

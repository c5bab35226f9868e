#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trajan/core.hpp"

namespace trajan::geojson {

using PropValue = std::variant<std::string, std::int64_t, double, bool>;
using Properties = std::map<std::string, PropValue>;

enum class GeometryType { Point, LineString, Polygon };

struct Feature {
  GeometryType type = GeometryType::Point;
  // Point: one coordinate. LineString: the vertices. Polygon: exterior ring.
  std::vector<LatLon> coords;
  std::vector<std::vector<LatLon>> holes;
  Properties props;

  /// Property as text (numbers and booleans are rendered); nullopt if absent.
  std::optional<std::string> text(const std::string& key) const;
  std::optional<std::int64_t> integer(const std::string& key) const;
  std::optional<double> number(const std::string& key) const;

  /// Polygon geometry; throws ParseError for other types.
  GeoPolygon polygon() const;
};

/// Parses a FeatureCollection; throws ParseError naming the offending
/// feature index.
std::vector<Feature> parse_features(const std::string& text, const std::string& what);
std::vector<Feature> load_features(const std::string& path, const std::string& what);

/// Builds a FeatureCollection with deterministic output (sorted property
/// keys, shortest round-trip number formatting).
class FeatureWriter {
 public:
  void add_point(LatLon p, Properties props);
  void add_line(const std::vector<LatLon>& line, Properties props);
  void add_polygon(const GeoPolygon& poly, Properties props);
  std::string str() const;
  std::size_t size() const noexcept { return features_.size(); }

 private:
  std::vector<std::string> features_;
};

std::string read_text_file(const std::string& path);

}  // namespace trajan::geojson

#include "trajan/geojson.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace trajan::geojson {

namespace {

using nlohmann::json;

LatLon read_position(const json& c) {
  if (!c.is_array() || c.size() < 2) throw std::invalid_argument("bad position");
  return {c[1].get<double>(), c[0].get<double>()};
}

std::vector<LatLon> read_positions(const json& arr) {
  std::vector<LatLon> out;
  for (const auto& c : arr) out.push_back(read_position(c));
  return out;
}

json position(LatLon p) { return json::array({p.lon, p.lat}); }

json positions(const std::vector<LatLon>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(position(p));
  return arr;
}

json to_json(const Properties& props) {
  json j = json::object();
  for (const auto& [k, v] : props) {
    std::visit([&](const auto& x) { j[k] = x; }, v);
  }
  return j;
}

std::string feature_text(json geometry, const Properties& props) {
  json f;
  f["type"] = "Feature";
  f["properties"] = to_json(props);
  f["geometry"] = std::move(geometry);
  return f.dump();
}

}  // namespace

std::optional<std::string> Feature::text(const std::string& key) const {
  auto it = props.find(key);
  if (it == props.end()) return std::nullopt;
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else {
          return json(v).dump();
        }
      },
      it->second);
}

std::optional<std::int64_t> Feature::integer(const std::string& key) const {
  auto it = props.find(key);
  if (it == props.end()) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  return std::nullopt;
}

std::optional<double> Feature::number(const std::string& key) const {
  auto it = props.find(key);
  if (it == props.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  return std::nullopt;
}

GeoPolygon Feature::polygon() const {
  if (type != GeometryType::Polygon) throw ParseError("feature is not a Polygon");
  try {
    return GeoPolygon(coords, holes);
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid polygon: ") + e.what());
  }
}

std::vector<Feature> parse_features(const std::string& text, const std::string& what) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array()) {
    throw ParseError(what + ": expected a FeatureCollection");
  }
  std::vector<Feature> out;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    try {
      Feature feat;
      const auto& geom = f.at("geometry");
      const auto type = geom.at("type").get<std::string>();
      const auto& coords = geom.at("coordinates");
      if (type == "Point") {
        feat.type = GeometryType::Point;
        feat.coords = {read_position(coords)};
      } else if (type == "LineString") {
        feat.type = GeometryType::LineString;
        feat.coords = read_positions(coords);
      } else if (type == "Polygon") {
        feat.type = GeometryType::Polygon;
        if (!coords.is_array() || coords.empty()) throw std::invalid_argument("empty polygon");
        feat.coords = read_positions(coords[0]);
        for (std::size_t r = 1; r < coords.size(); ++r) {
          feat.holes.push_back(read_positions(coords[r]));
        }
      } else {
        throw std::invalid_argument("unsupported geometry type " + type);
      }
      if (f.contains("properties") && f["properties"].is_object()) {
        for (const auto& [k, v] : f["properties"].items()) {
          if (v.is_string()) {
            feat.props[k] = v.get<std::string>();
          } else if (v.is_boolean()) {
            feat.props[k] = v.get<bool>();
          } else if (v.is_number_integer()) {
            feat.props[k] = v.get<std::int64_t>();
          } else if (v.is_number()) {
            feat.props[k] = v.get<double>();
          }
        }
      }
      out.push_back(std::move(feat));
    } catch (const std::exception& e) {
      throw ParseError(what + " feature " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return ss.str();
}

std::vector<Feature> load_features(const std::string& path, const std::string& what) {
  return parse_features(read_text_file(path), what);
}

void FeatureWriter::add_point(LatLon p, Properties props) {
  json g;
  g["type"] = "Point";
  g["coordinates"] = position(p);
  features_.push_back(feature_text(std::move(g), props));
}

void FeatureWriter::add_line(const std::vector<LatLon>& line, Properties props) {
  json g;
  g["type"] = "LineString";
  g["coordinates"] = positions(line);
  features_.push_back(feature_text(std::move(g), props));
}

void FeatureWriter::add_polygon(const GeoPolygon& poly, Properties props) {
  json g;
  g["type"] = "Polygon";
  json rings = json::array();
  rings.push_back(positions(poly.exterior()));
  for (const auto& h : poly.holes()) rings.push_back(positions(h));
  g["coordinates"] = std::move(rings);
  features_.push_back(feature_text(std::move(g), props));
}

std::string FeatureWriter::str() const {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < features_.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += features_[i];
  }
  out += "\n]}\n";
  return out;
}

}  // namespace trajan::geojson

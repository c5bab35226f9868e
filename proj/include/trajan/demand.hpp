#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajan/core.hpp"
#include "trajan/mapmatch.hpp"
#include "trajan/network.hpp"

namespace trajan::demand {

enum class ZoneLevel { TAZ, Zip, County, State };
std::string_view to_string(ZoneLevel l) noexcept;
/// Case-insensitive; throws ParseError on unknown names.
ZoneLevel parse_zone_level(std::string_view s);

struct Zone {
  std::string id;
  std::string name;
  std::string parent;  // id in the next level up, may be empty
  GeoPolygon polygon;
};

/// Zones of one level, ordered by id. Point lookup is edge-inclusive and
/// the lowest id wins when zones share a boundary.
class ZoneSystem {
 public:
  ZoneSystem(ZoneLevel level, std::vector<Zone> zones);

  ZoneLevel level() const noexcept { return level_; }
  std::span<const Zone> zones() const noexcept { return zones_; }
  std::optional<std::size_t> locate(LatLon p) const;
  std::optional<std::size_t> index_of(const std::string& id) const;

 private:
  ZoneLevel level_;
  std::vector<Zone> zones_;
};

/// GeoJSON Polygon features with properties {zone_id, name, level} and an
/// optional parent.
ZoneSystem parse_zones(const std::string& text);
ZoneSystem load_zones(const std::string& path);

using ZonePair = std::pair<std::string, std::string>;

struct ODMatrix {
  std::vector<std::string> zone_ids;  // zone system order
  std::map<ZonePair, std::int64_t> counts;
  std::int64_t unassigned = 0;
  std::optional<double> factor;  // set by expand_matrix

  std::int64_t total() const;
  std::int64_t count(const std::string& o, const std::string& d) const;
  /// count * factor, or the count itself when not expanded.
  double expanded(const std::string& o, const std::string& d) const;
  std::map<std::string, std::int64_t> row_sums() const;
  void merge(const ODMatrix& other);

  friend bool operator==(const ODMatrix&, const ODMatrix&) = default;
};

/// Origin zone of the first waypoint, destination zone of the last.
ODMatrix build_od_matrix(std::span<const Trip> trips, const ZoneSystem& zones,
                         std::size_t workers = 1);

/// Re-keys every entry by the parent of its zones. Throws DomainError when
/// a zone with trips has no parent in the map.
ODMatrix aggregate_matrix(const ODMatrix& m, const std::map<std::string, std::string>& parent_of,
                          const std::vector<std::string>& parent_ids);
std::map<std::string, std::string> parent_map(const ZoneSystem& zones);

/// Throws DomainError unless factor > 0.
ODMatrix expand_matrix(const ODMatrix& m, double factor);

/// round(1 / pr); throws DomainError unless 0 < pr.
std::int64_t expansion_factor_from_pr(double pr);

/// origin_zone,dest_zone,count,expanded_count for non-zero entries.
void write_od_csv(std::ostream& out, const ODMatrix& m);

/// Tab-separated rank, origin_zone, dest_zone, count, expanded_count over
/// every ordered pair of zones that carry trips, by flow descending. Pairs
/// below min_flow are summed into a trailing OTHER row.
void write_chord_table(std::ostream& out, const ODMatrix& m, std::int64_t min_flow);

// --- penetration -----------------------------------------------------------

struct AtrRecord {
  std::string station_id;
  network::LinkId link_id = 0;
  std::int64_t hour = 0;  // hours since the epoch, UTC
  std::int64_t count = 0;
};

/// Accepts "YYYY-MM-DDTHH" optionally followed by ":00", ":00:00" and "Z".
std::int64_t parse_hour_utc(std::string_view s);
std::string format_hour_utc(std::int64_t hour);

/// Header station_id,link_id,hour_utc,count. Throws ParseError with the
/// line number on bad rows or duplicate station-hours.
std::vector<AtrRecord> parse_atr_csv(std::istream& in);
std::vector<AtrRecord> load_atr(const std::string& path);

struct StationHour {
  std::int64_t hour = 0;
  std::int64_t traversals = 0;
  std::int64_t count = 0;
  std::optional<double> pr;  // absent when count is 0
  bool anomaly = false;      // pr > 1
};

struct StationEstimate {
  std::string station_id;
  network::LinkId link_id = 0;
  std::vector<StationHour> hours;
  std::size_t valid_hours = 0;
  double mean_pr = 0.0;
  double median_pr = 0.0;
  std::size_t anomalies = 0;
};

enum class PrAggregate { Median, Mean };
PrAggregate parse_pr_aggregate(std::string_view s);

struct PenetrationEstimate {
  std::vector<StationEstimate> stations;  // by station id
  std::size_t valid_station_hours = 0;
  double hourly_mean = 0.0;    // over all valid station-hours
  double hourly_median = 0.0;
  double station_median = 0.0;  // median across stations of station means
  double station_mean = 0.0;    // mean across stations of station means

  double aggregate(PrAggregate a) const { return a == PrAggregate::Median ? station_median : station_mean; }
};

/// Traversals per station-hour: matched trips entering the station's road
/// (either direction) during that hour, each trip counted once.
/// Throws ConfigError when a station link is not in `net`.
PenetrationEstimate estimate_penetration(std::span<const mapmatch::MatchedTrip> matched,
                                         std::span<const AtrRecord> atr,
                                         const network::RoadNetwork& net);

/// station_id,link_id,hour_utc,traversals,count,pr,anomaly
void write_penetration_csv(std::ostream& out, const PenetrationEstimate& est);
std::string penetration_summary_json(const PenetrationEstimate& est, PrAggregate a);

// --- corridor --------------------------------------------------------------

struct Corridor {
  std::string name;
  GeoPolygon polygon;
};

enum class DayType { Weekday, Weekend };
std::string_view to_string(DayType d) noexcept;

struct CorridorOptions {
  int utc_offset_hours = -5;
};

inline constexpr const char* kUnassignedRoute = "UNASSIGNED";

struct CorridorTrip {
  std::string trip_id;
  TimestampMs depart = 0;
  double travel_time_s = 0.0;
  int hour = 0;  // local departure hour
  DayType day = DayType::Weekday;
  std::string route;
};

struct HourlyTravelTime {
  DayType day = DayType::Weekday;
  int hour = 0;
  std::size_t n = 0;
  double median_s = 0.0;
  double mean_s = 0.0;
};

struct CorridorReport {
  std::vector<CorridorTrip> trips;
  std::vector<HourlyTravelTime> hourly;  // by day type then hour
  std::map<std::string, std::size_t> route_counts;
  std::map<std::string, double> route_shares;  // over assigned trips
  std::size_t assigned = 0;
  std::size_t unassigned = 0;

  /// Local hour with the largest median for a day type, if any.
  std::optional<int> peak_hour(DayType d) const;
};

/// Local weekday/weekend and hour of a timestamp.
DayType day_type(TimestampMs t, int utc_offset_hours);
int local_hour(TimestampMs t, int utc_offset_hours);

CorridorReport corridor_analysis(std::span<const Trip> trips, const GeoPolygon& a,
                                 const GeoPolygon& b, std::span<const Corridor> corridors,
                                 const CorridorOptions& opt = {});

/// day_type,hour,n,median_s,mean_s
void write_corridor_hourly_csv(std::ostream& out, const CorridorReport& r);
/// route,trips,share
void write_route_split_csv(std::ostream& out, const CorridorReport& r);

// --- origin heat map -------------------------------------------------------

struct OriginHeatmap {
  GridSpec grid;
  std::vector<std::int64_t> counts;  // row-major
  std::int64_t out_of_grid = 0;

  std::int64_t at(GridCell c) const;
  std::int64_t total() const;
  GridCell argmax() const;
};

OriginHeatmap origin_heatmap(std::span<const Trip> trips, const GridSpec& g);

}  // namespace trajan::demand

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajan/core.hpp"

namespace trajan::enforcement {

// --- speed grid ------------------------------------------------------------

enum class ThresholdMode { Absolute, AboveCellMean };
std::string_view to_string(ThresholdMode m) noexcept;
/// "absolute" or "cell-mean"; throws ConfigError otherwise.
ThresholdMode parse_threshold_mode(std::string_view s);

struct SpeedThreshold {
  ThresholdMode mode = ThresholdMode::Absolute;
  double speed_mps = 29.0;  // used by Absolute only
  void validate() const;
};

struct SpeedCell {
  std::int64_t total = 0;
  std::int64_t high = 0;
  std::array<std::int64_t, 8> octant{};  // N, NE, E, SE, S, SW, W, NW
  std::int64_t speed_sum_um = 0;  // micrometres per second, exact under merging

  double mean_speed() const {
    return total > 0 ? static_cast<double>(speed_sum_um) / 1e6 / static_cast<double>(total) : 0.0;
  }
  double high_ratio() const {
    return total > 0 ? static_cast<double>(high) / static_cast<double>(total) : 0.0;
  }
};

struct SpeedGrid {
  GridSpec grid;
  SpeedThreshold threshold;
  std::vector<SpeedCell> cells;  // row-major
  std::int64_t segments = 0;     // consecutive-waypoint pairs seen
  std::int64_t out_of_grid = 0;
  std::int64_t skipped = 0;      // zero or negative duration

  const SpeedCell& at(GridCell c) const;
  std::int64_t total() const;
  /// Occupied cells ordered by high-speed ratio descending, then by index.
  std::vector<GridCell> top_cells(std::size_t k, std::int64_t min_total = 1) const;
};

/// 0 = north, clockwise in 45 degree sectors centred on each direction.
int bearing_octant(double bearing_deg) noexcept;

/// Each segment goes to the cell holding its midpoint. Partial grids are
/// built per worker and merged.
SpeedGrid speed_grid(std::span<const Trip> trips, const GridSpec& g, const SpeedThreshold& th,
                     std::size_t workers = 1);

/// row,col,total,high,mean_speed_mps,octant_0..octant_7 for every cell.
void write_speed_grid_csv(std::ostream& out, const SpeedGrid& grid);
/// Cell polygons of occupied cells with their counts.
std::string speed_grid_geojson(const SpeedGrid& grid);

// --- weigh-in-motion circumvention ----------------------------------------

struct WimSite {
  std::string site_id;
  LatLon station;
  GeoPolygon corridor;
  GeoPolygon gate_up;
  GeoPolygon gate_down;
  GeoPolygon buffer;

  /// Gates must not touch the station buffer and must both meet the
  /// corridor. Throws DomainError.
  void validate() const;
};

/// FeatureCollection where each feature carries site_id and a role in
/// {station, corridor, gate_up, gate_down, buffer}. Sites come back in id
/// order. Throws ParseError on unknown roles or incomplete sites.
std::vector<WimSite> parse_wim_sites(const std::string& text);
std::vector<WimSite> load_wim_sites(const std::string& path);
std::string wim_sites_geojson(std::span<const WimSite> sites);

enum class Passage { Compliant, Circumventing };

struct WimPassage {
  std::string trip_id;
  WeightClass weight_class = WeightClass::Unknown;
  Passage passage = Passage::Compliant;
  double gate_to_gate_s = 0.0;
};

/// Relevant trips only, for one site. The window runs from the last
/// upstream-gate fix before the first downstream-gate fix that follows an
/// upstream one; nullopt if the trip never makes that passage.
std::optional<WimPassage> classify_passage(const Trip& trip, const WimSite& site);

struct EvasionRow {
  WeightClass weight_class = WeightClass::Unknown;
  std::int64_t relevant = 0;
  std::int64_t circumventing = 0;

  std::int64_t compliant() const { return relevant - circumventing; }
  double percentage() const;
};

struct EvasionReport {
  std::string site_id;
  std::vector<EvasionRow> rows;        // one per weight class, Unknown last
  std::vector<WimPassage> passages;    // by trip id

  const EvasionRow& row(WeightClass w) const;
};

EvasionReport detect_wim_evasion(std::span<const Trip> trips, const WimSite& site);

/// site_id,weight_class,relevant,circumventing,circumvent_pct with the
/// percentage to two decimals. Unknown is listed only when it has trips.
void write_evasion_csv(std::ostream& out, std::span<const EvasionReport> reports);

/// Percentage rounded half away from zero to two decimals.
std::string format_percent(double pct);

struct DetourCost {
  std::size_t circumventing = 0;
  std::size_t slower = 0;
  std::optional<double> compliant_median_s;
  std::optional<double> fraction;  // undefined without compliant or circumventing trips
  std::string diagnostic;
};

/// Share of circumventing passages slower gate-to-gate than the compliant
/// median.
DetourCost detour_cost(const EvasionReport& report);

}  // namespace trajan::enforcement

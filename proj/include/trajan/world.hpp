#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trajan/demand.hpp"
#include "trajan/enforcement.hpp"
#include "trajan/network.hpp"
#include "trajan/synth.hpp"
#include "trajan/transit.hpp"

namespace trajan::synth {

/// Everything the synthetic corpus plants. Areas are laid out around the
/// grid origin: the street grid itself, a weigh station 5 km south, a
/// two-route corridor 8 km north and an isochrone origin 20 km east.
struct WorldSpec {
  std::uint64_t seed = 42;
  GridWorld grid{{38.9, -76.9}, 12, 12, 250.0, 1, 1, true};
  TimestampMs start = 1'506'902'400'000;  // 2017-10-02T00:00:00Z, a Monday

  // Probe fleet on the street grid.
  double p = 0.02;
  int atr_stations = 3;
  int atr_hours = 12;
  std::int64_t atr_min_count = 300;
  std::int64_t atr_max_count = 900;
  int background_trips = 200;
  int route_links = 8;
  int covered_commuters = 20;
  int uncovered_commuters = 40;
  double noise_sigma_m = 4.0;
  TimestampMs interval_ms = 2000;
  double fleet_speed_mps = 14.0;

  // Weigh station passages per weight class (W0_14, W14_26, W26_plus).
  std::vector<std::int64_t> wim_relevant{3794, 12333, 4847};
  std::vector<double> wim_percent{1.45, 0.61, 0.00};
  std::int64_t wim_bystanders = 200;

  // Corridor fleet, local time.
  int utc_offset_hours = -5;
  int corridor_days = 7;
  int corridor_trips_per_hour = 4;
  double corridor_north_share = 0.7;
  std::vector<int> peak_hours{7, 16, 17};
  double peak_slowdown = 1.6;

  // Radial fleet for isochrones.
  int isochrone_trips = 500;
  double isochrone_speed_mps = 10.0;
  double isochrone_duration_min = 45.0;

  /// Throws ConfigError for infeasible plants.
  void validate() const;
};

struct World {
  WorldSpec spec;
  std::vector<network::RoadNetwork::FeatureSpec> network;
  std::vector<Trip> trips;
  ZoneTiling zones;
  std::vector<demand::AtrRecord> atr;
  enforcement::WimSite wim_site;
  transit::TransitNetwork transit;
  GeoPolygon corridor_origin;
  GeoPolygon corridor_destination;
  std::vector<demand::Corridor> corridors;
  GeoPolygon isochrone_origin;
  std::string truth_json;
};

World generate_world(const WorldSpec& spec);

/// Corridor definition file: Polygon features with role in {origin,
/// destination, corridor} and a name.
std::string corridor_geojson(const GeoPolygon& origin, const GeoPolygon& destination,
                             std::span<const demand::Corridor> corridors);

/// ATR CSV with header station_id,link_id,hour_utc,count.
std::string atr_csv(std::span<const demand::AtrRecord> atr);

/// File name and content of every corpus file, in a fixed order.
std::vector<std::pair<std::string, std::string>> world_files(const World& w);

}  // namespace trajan::synth

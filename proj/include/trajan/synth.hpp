#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajan/core.hpp"
#include "trajan/demand.hpp"
#include "trajan/enforcement.hpp"
#include "trajan/network.hpp"

namespace trajan::synth {

/// Deterministic random source. Distributions are implemented here rather
/// than taken from <random> so corpora are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double sigma = 1.0);
  bool bernoulli(double p) { return uniform() < p; }
  std::int64_t binomial(std::int64_t n, double p);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Square lattice of two-way (or one-way eastward/northward) streets.
struct GridWorld {
  LatLon origin{38.9, -76.9};
  int rows = 10;
  int cols = 10;
  double spacing_m = 200.0;
  network::LinkId first_link_id = 1;
  network::NodeId first_node_id = 1;
  bool two_way = true;
};

LatLon grid_node(const GridWorld& w, int row, int col);
network::NodeId grid_node_id(const GridWorld& w, int row, int col);
std::vector<network::RoadNetwork::FeatureSpec> grid_features(const GridWorld& w);
network::RoadNetwork grid_network(const GridWorld& w);

/// Network input GeoJSON for a feature list.
std::string network_geojson(std::span<const network::RoadNetwork::FeatureSpec> features);

struct PlantedRoute {
  std::vector<network::LinkIndex> links;
  double start_offset_m = 0.0;
  double end_offset_m = 0.0;
};

/// Random walk of `n_links` connected links without immediate U-turns,
/// starting and ending at random offsets inside the end links.
PlantedRoute random_walk_route(const network::RoadNetwork& net, Rng& rng, int n_links);

struct TraceOptions {
  std::string trip_id = "trip";
  std::string device_id = "device";
  WeightClass weight_class = WeightClass::Unknown;
  Provider provider = Provider::Fleet;
  double speed_mps = 14.0;
  TimestampMs interval_ms = 1000;
  double noise_sigma_m = 0.0;
  TimestampMs t0 = 1'506'902'400'000;  // 2017-10-02T00:00:00Z
};

struct SampledTrace {
  Trip trip;
  std::vector<network::LinkId> truth;  // links the trace actually covers
};

/// Drives the route at constant speed, sampling every interval, with
/// isotropic Gaussian position noise.
SampledTrace sample_route(const network::RoadNetwork& net, const PlantedRoute& route,
                          const TraceOptions& opt, Rng& rng);

/// Waypoints along a polyline at constant speed (no noise).
std::vector<Waypoint> drive_polyline(std::span<const LatLon> line, double speed_mps,
                                     TimestampMs interval_ms, TimestampMs t0);

/// Nested rectangular zones over a width x height box: two states split
/// west/east, a 2x2 county grid and a 4x4 TAZ grid, each with parents.
struct ZoneTiling {
  std::vector<demand::Zone> taz;
  std::vector<demand::Zone> county;
  std::vector<demand::Zone> state;
};
ZoneTiling tile_zones(LatLon south_west, double width_m, double height_m);

/// Zone input GeoJSON for one level.
std::string zones_geojson(std::span<const demand::Zone> zones, demand::ZoneLevel level);

/// Straight east-west main road with a weigh station, gates either side
/// and a detour loop that leaves after the upstream gate and rejoins
/// before the downstream one.
struct WimReplica {
  enforcement::WimSite site;
  std::vector<LatLon> main_line;
  std::vector<LatLon> detour_line;
  std::vector<LatLon> partial_line;  // enters the upstream gate, turns off before the station
};
WimReplica wim_replica(const std::string& site_id, LatLon west_end);

struct WimPlant {
  WeightClass weight_class = WeightClass::Unknown;
  std::int64_t relevant = 0;
  std::int64_t circumventing = 0;
};

/// Circumventing count for a published percentage, round(pct * n / 100).
std::int64_t planted_circumventing(std::int64_t relevant, double pct);

/// Relevant trips per plant with exactly the planted number of detours
/// (chosen at random), plus `bystanders` trips that never reach the
/// downstream gate. Speeds vary between 18 and 24 m/s at 5 s sampling.
std::vector<Trip> wim_trips(const WimReplica& r, std::span<const WimPlant> plants,
                            std::int64_t bystanders, Rng& rng, const std::string& id_prefix,
                            TimestampMs t0);

}  // namespace trajan::synth

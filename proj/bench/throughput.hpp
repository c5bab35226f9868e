#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trajan/core.hpp"
#include "trajan/network.hpp"

namespace trajan::bench {

/// Noisy 1 Hz traces of random walks on the default synthetic grid.
struct Workload {
  network::RoadNetwork net;
  std::vector<Trip> trips;
  std::size_t waypoints = 0;
};

Workload grid_workload(std::size_t n_trips, int links_per_trip, std::uint64_t seed);

struct IngestRate {
  std::size_t trips = 0;
  std::size_t waypoints = 0;
  double wall_s = 0.0;
  double waypoints_per_s = 0.0;
};

/// Parse from CSV text, drop outliers, per-trip stats and corpus summary.
IngestRate measure_ingest(const Workload& w);

struct MatchRate {
  std::size_t trips = 0;
  std::size_t workers = 1;
  double wall_s = 0.0;
  double trips_per_s_per_worker = 0.0;
  std::size_t matched = 0;
};

MatchRate measure_matching(const Workload& w, std::size_t workers);

}  // namespace trajan::bench

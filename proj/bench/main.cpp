#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "throughput.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Throughput benchmark on the synthetic grid world", "trajan_bench"};
  std::size_t trips = 2000;
  int links = 8;
  std::size_t workers = 1;
  std::uint64_t seed = 7;
  app.add_option("--trips", trips, "Number of trips")->check(CLI::PositiveNumber);
  app.add_option("--links", links, "Links per trip")->check(CLI::Range(2, 1000));
  app.add_option("-j,--workers", workers, "Matching workers")->check(CLI::Range(1, 1024));
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  const auto w = trajan::bench::grid_workload(trips, links, seed);
  const auto ingest = trajan::bench::measure_ingest(w);
  const auto match = trajan::bench::measure_matching(w, workers);
  std::printf("ingest trips=%zu waypoints=%zu wall_s=%.3f waypoints_per_s=%.0f\n", ingest.trips,
              ingest.waypoints, ingest.wall_s, ingest.waypoints_per_s);
  std::printf("match trips=%zu matched=%zu workers=%zu wall_s=%.3f trips_per_s_per_worker=%.1f\n",
              match.trips, match.matched, match.workers, match.wall_s, match.trips_per_s_per_worker);
  return 0;
}

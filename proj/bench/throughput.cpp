#include "throughput.hpp"

#include <chrono>
#include <sstream>

#include "trajan/ingest.hpp"
#include "trajan/mapmatch.hpp"
#include "trajan/synth.hpp"

namespace trajan::bench {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Workload grid_workload(std::size_t n_trips, int links_per_trip, std::uint64_t seed) {
  Workload w{synth::grid_network({}), {}, 0};
  synth::Rng rng(seed);
  for (std::size_t i = 0; i < n_trips; ++i) {
    synth::TraceOptions opt;
    opt.trip_id = "b" + std::to_string(i);
    opt.device_id = "d" + std::to_string(i % 97);
    opt.noise_sigma_m = 4.0;
    opt.t0 += static_cast<TimestampMs>(i) * 60'000;
    const auto route = synth::random_walk_route(w.net, rng, links_per_trip);
    w.trips.push_back(synth::sample_route(w.net, route, opt, rng).trip);
    w.waypoints += w.trips.back().waypoints.size();
  }
  return w;
}

IngestRate measure_ingest(const Workload& w) {
  std::ostringstream csv;
  ingest::write_trips_csv(csv, w.trips);
  const auto text = csv.str();

  const auto t0 = std::chrono::steady_clock::now();
  std::istringstream in(text);
  const auto parsed = ingest::parse_trips(in, ingest::Format::CSV);
  std::vector<ingest::TripStats> stats;
  stats.reserve(parsed.trips.size());
  for (const auto& t : parsed.trips) {
    if (auto f = ingest::filter_outlier_waypoints(t); f.trip) stats.push_back(ingest::trip_stats(*f.trip));
  }
  if (!stats.empty()) ingest::summarize_corpus(stats);
  IngestRate r;
  r.wall_s = seconds_since(t0);
  r.trips = parsed.trips.size();
  r.waypoints = parsed.report.waypoints_read;
  r.waypoints_per_s = static_cast<double>(r.waypoints) / r.wall_s;
  return r;
}

MatchRate measure_matching(const Workload& w, std::size_t workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = mapmatch::match_batch(w.trips, w.net, mapmatch::HmmParams{}, workers);
  MatchRate r;
  r.wall_s = seconds_since(t0);
  r.trips = w.trips.size();
  r.workers = workers;
  r.matched = res.report.matched;
  r.trips_per_s_per_worker = static_cast<double>(r.trips) / r.wall_s / static_cast<double>(workers);
  return r;
}

}  // namespace trajan::bench

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajan/core.hpp"
#include "trajan/network.hpp"

namespace trajan::mapmatch {

struct HmmParams {
  double sigma_gps = 4.07;        // meters
  double beta = 20.0;             // meters
  double candidate_radius = 200;  // meters
  std::size_t max_candidates = 8;
  /// Routes longer than the great-circle hop plus this slack are treated
  /// as unreachable.
  double route_slack_m = 1000.0;
  /// Backward drift along one link (noise) up to this many meters is
  /// scored as standing still instead of looping around the block.
  double backtrack_tolerance_m = 30.0;

  /// Throws DomainError unless every field is positive.
  void validate() const;
};

/// Link id used in a matched route to mark a break between independently
/// matched pieces.
inline constexpr network::LinkId kGapLink = 0;

/// Candidate graph for one run of waypoints.
struct Lattice {
  std::vector<std::size_t> waypoint;  // index into the trip for each step
  std::vector<std::vector<network::LinkProjection>> candidates;
  // transition[s][i][j]: step s candidate i -> step s+1 candidate j.
  // route_gap is |route - great circle|; nullopt when unreachable.
  std::vector<std::vector<std::vector<std::optional<double>>>> route_gap;

  double emission(const HmmParams& p, std::size_t step, std::size_t cand) const;
  /// -inf when unreachable.
  double transition(const HmmParams& p, std::size_t step, std::size_t from, std::size_t to) const;
  /// Joint log-likelihood of a candidate path (one index per step).
  double path_score(const HmmParams& p, std::span<const std::size_t> path) const;
};

/// Candidates for every waypoint (empty where none lie within radius).
std::vector<std::vector<network::LinkProjection>> candidates_for(
    const network::RoadNetwork& net, std::span<const Waypoint> wps, const HmmParams& p);

/// Splits the trip into lattices at waypoints without candidates and at
/// steps where no candidate pair is connected.
std::vector<Lattice> build_lattices(const network::RoadNetwork& net,
                                    std::span<const Waypoint> wps, const HmmParams& p);

struct ViterbiResult {
  std::vector<std::size_t> path;  // chosen candidate per step
  double score = 0.0;
};

/// Most likely candidate path; ties go to the smaller candidate index.
ViterbiResult viterbi(const Lattice& lat, const HmmParams& p);

struct RouteEntry {
  network::LinkId link_id = 0;  // kGapLink marks a break
  TimestampMs t_entry = 0;
  friend bool operator==(const RouteEntry&, const RouteEntry&) = default;
};

struct MatchedTrip {
  std::string trip_id;
  bool matched = false;
  std::vector<RouteEntry> route;
  std::vector<std::optional<network::LinkProjection>> chosen;  // per waypoint
  double log_likelihood = 0.0;
  double squared_distance_sum = 0.0;  // sum of d^2 over chosen candidates
  double route_gap_sum = 0.0;         // sum of |route - great circle|
  std::size_t pieces = 0;

  /// Route link ids without gap markers.
  std::vector<network::LinkId> links() const;
};

/// Matches one trip. Never throws for unmatchable input; `matched` is false
/// when no waypoint has a candidate.
MatchedTrip match(const Trip& trip, const network::RoadNetwork& net, const HmmParams& p);

struct BatchReport {
  std::size_t trips = 0;
  std::size_t matched = 0;
  std::size_t unmatchable = 0;
  std::size_t waypoints = 0;
  std::size_t workers = 1;
  double wall_s = 0.0;
  double trips_per_s = 0.0;
  std::vector<std::string> unmatchable_ids;

  std::string to_json() const;
};

struct BatchResult {
  std::vector<MatchedTrip> trips;  // sorted by trip_id
  BatchReport report;
};

/// Parallel matching; output is independent of the worker count.
BatchResult match_batch(std::span<const Trip> trips, const network::RoadNetwork& net,
                        const HmmParams& p, std::size_t workers);

/// CSV with header trip_id,seq,link_id,t_entry_ms. Gap markers are written
/// with link_id GAP.
void write_matched_csv(std::ostream& out, std::span<const MatchedTrip> trips);

/// Longest common subsequence length between matched and true link ids.
std::size_t recovered_links(std::span<const network::LinkId> matched,
                            std::span<const network::LinkId> truth);

}  // namespace trajan::mapmatch

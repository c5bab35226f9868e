#include "trajan/mapmatch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace trajan::mapmatch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool stays_on_link(const network::LinkProjection& a, const network::LinkProjection& b,
                   const HmmParams& p) {
  return a.link == b.link && b.offset_m >= a.offset_m - p.backtrack_tolerance_m;
}

}  // namespace

void HmmParams::validate() const {
  if (!(sigma_gps > 0) || !(beta > 0) || !(candidate_radius > 0) || max_candidates == 0 ||
      !(route_slack_m > 0) || !(backtrack_tolerance_m >= 0)) {
    throw DomainError("HMM parameters must be positive");
  }
}

double Lattice::emission(const HmmParams& p, std::size_t step, std::size_t cand) const {
  const double d = candidates[step][cand].distance_m;
  return -(d * d) / (2.0 * p.sigma_gps * p.sigma_gps);
}

double Lattice::transition(const HmmParams& p, std::size_t step, std::size_t from,
                           std::size_t to) const {
  const auto& g = route_gap[step][from][to];
  return g ? -*g / p.beta : kNegInf;
}

double Lattice::path_score(const HmmParams& p, std::span<const std::size_t> path) const {
  double s = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    s += emission(p, i, path[i]);
    if (i + 1 < path.size()) s += transition(p, i, path[i], path[i + 1]);
  }
  return s;
}

std::vector<std::vector<network::LinkProjection>> candidates_for(
    const network::RoadNetwork& net, std::span<const Waypoint> wps, const HmmParams& p) {
  std::vector<std::vector<network::LinkProjection>> out;
  out.reserve(wps.size());
  for (const auto& w : wps) {
    out.push_back(net.nearest_links(w.latlon(), p.candidate_radius, p.max_candidates));
  }
  return out;
}

std::vector<Lattice> build_lattices(const network::RoadNetwork& net,
                                    std::span<const Waypoint> wps, const HmmParams& p) {
  p.validate();
  const auto cands = candidates_for(net, wps, p);
  std::vector<Lattice> out;
  Lattice cur;
  std::vector<bool> alive;

  auto close = [&] {
    if (!cur.waypoint.empty()) out.push_back(std::move(cur));
    cur = Lattice{};
    alive.clear();
  };
  auto start = [&](std::size_t w) {
    cur.waypoint = {w};
    cur.candidates = {cands[w]};
    alive.assign(cands[w].size(), true);
  };

  for (std::size_t w = 0; w < wps.size(); ++w) {
    if (cands[w].empty()) {
      close();
      continue;
    }
    if (cur.waypoint.empty()) {
      start(w);
      continue;
    }
    const std::size_t prev_w = cur.waypoint.back();
    const auto& prev = cur.candidates.back();
    const auto& next = cands[w];
    const double gc = haversine(wps[prev_w].latlon(), wps[w].latlon());
    std::vector<std::vector<std::optional<double>>> gaps(prev.size());
    std::vector<bool> next_alive(next.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      auto dist = network::route_distances(net, prev[i], next, gc + p.route_slack_m);
      gaps[i].resize(next.size());
      for (std::size_t j = 0; j < next.size(); ++j) {
        if (stays_on_link(prev[i], next[j], p)) {
          dist[j] = std::max(0.0, next[j].offset_m - prev[i].offset_m);
        }
        if (dist[j]) {
          gaps[i][j] = std::abs(*dist[j] - gc);
          if (alive[i]) {
            next_alive[j] = true;
            any = true;
          }
        }
      }
    }
    if (!any) {
      close();
      start(w);
      continue;
    }
    cur.waypoint.push_back(w);
    cur.candidates.push_back(next);
    cur.route_gap.push_back(std::move(gaps));
    alive = std::move(next_alive);
  }
  close();
  return out;
}

ViterbiResult viterbi(const Lattice& lat, const HmmParams& p) {
  ViterbiResult res;
  const std::size_t steps = lat.candidates.size();
  if (steps == 0) return res;
  std::vector<double> score(lat.candidates[0].size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = lat.emission(p, 0, i);
  std::vector<std::vector<std::size_t>> back(steps);
  for (std::size_t s = 0; s + 1 < steps; ++s) {
    const std::size_t n = lat.candidates[s + 1].size();
    std::vector<double> next(n, kNegInf);
    back[s + 1].assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < score.size(); ++i) {
        if (score[i] == kNegInf) continue;
        const double tr = lat.transition(p, s, i, j);
        if (tr == kNegInf) continue;
        const double v = score[i] + tr;
        if (v > next[j]) {
          next[j] = v;
          back[s + 1][j] = i;
        }
      }
      if (next[j] != kNegInf) next[j] += lat.emission(p, s + 1, j);
    }
    score = std::move(next);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (score[i] > score[best]) best = i;
  }
  res.score = score[best];
  res.path.assign(steps, 0);
  res.path[steps - 1] = best;
  for (std::size_t s = steps - 1; s > 0; --s) res.path[s - 1] = back[s][res.path[s]];
  return res;
}

std::vector<network::LinkId> MatchedTrip::links() const {
  std::vector<network::LinkId> out;
  for (const auto& e : route) {
    if (e.link_id != kGapLink) out.push_back(e.link_id);
  }
  return out;
}

MatchedTrip match(const Trip& trip, const network::RoadNetwork& net, const HmmParams& p) {
  MatchedTrip m;
  m.trip_id = trip.trip_id;
  m.chosen.assign(trip.waypoints.size(), std::nullopt);
  const auto& wps = trip.waypoints;
  const auto lattices = build_lattices(net, wps, p);
  if (lattices.empty()) return m;
  m.matched = true;
  m.pieces = lattices.size();

  for (std::size_t k = 0; k < lattices.size(); ++k) {
    const auto& lat = lattices[k];
    const auto vr = viterbi(lat, p);
    m.log_likelihood += vr.score;
    if (k > 0) m.route.push_back({kGapLink, wps[lat.waypoint.front()].t});

    std::vector<network::TraversalRecord> piece;
    for (std::size_t s = 0; s < lat.waypoint.size(); ++s) {
      const auto& c = lat.candidates[s][vr.path[s]];
      m.chosen[lat.waypoint[s]] = c;
      m.squared_distance_sum += c.distance_m * c.distance_m;
      if (s == 0) {
        piece.push_back({c.link_id, wps[lat.waypoint[0]].t});
        continue;
      }
      m.route_gap_sum += *lat.route_gap[s - 1][vr.path[s - 1]][vr.path[s]];
      const auto& a = lat.candidates[s - 1][vr.path[s - 1]];
      if (stays_on_link(a, c, p)) continue;
      const auto route = network::shortest_path(net, a, c);
      const TimestampMs t0 = wps[lat.waypoint[s - 1]].t;
      const TimestampMs t1 = wps[lat.waypoint[s]].t;
      double pos = net.link(a.link).length_m - a.offset_m;
      for (std::size_t r = 1; r < route.links.size(); ++r) {
        const double f = route.distance_m > 0 ? std::clamp(pos / route.distance_m, 0.0, 1.0) : 0.0;
        const auto t = t0 + static_cast<TimestampMs>(std::llround(f * static_cast<double>(t1 - t0)));
        piece.push_back({net.link(route.links[r]).id, t});
        pos += net.link(route.links[r]).length_m;
      }
    }
    for (const auto& r : network::dedupe_route_nodes(piece)) {
      m.route.push_back({r.link_id, r.t});
    }
  }
  return m;
}

std::string BatchReport::to_json() const {
  nlohmann::json j;
  j["trips"] = trips;
  j["matched"] = matched;
  j["unmatchable"] = unmatchable;
  j["waypoints"] = waypoints;
  j["workers"] = workers;
  j["wall_s"] = wall_s;
  j["trips_per_s"] = trips_per_s;
  j["unmatchable_ids"] = unmatchable_ids;
  return j.dump(2);
}

BatchResult match_batch(std::span<const Trip> trips, const network::RoadNetwork& net,
                        const HmmParams& p, std::size_t workers) {
  p.validate();
  if (workers == 0) throw DomainError("worker count must be positive");
  const auto t_start = std::chrono::steady_clock::now();
  BatchResult res;
  res.trips.resize(trips.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < trips.size(); i = next++) {
      res.trips[i] = match(trips[i], net, p);
    }
  };
  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(trips.size(), 1));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::stable_sort(res.trips.begin(), res.trips.end(),
                   [](const MatchedTrip& a, const MatchedTrip& b) { return a.trip_id < b.trip_id; });

  auto& r = res.report;
  r.trips = trips.size();
  r.workers = workers;
  for (const auto& t : trips) r.waypoints += t.waypoints.size();
  for (const auto& m : res.trips) {
    if (m.matched) {
      ++r.matched;
    } else {
      ++r.unmatchable;
      r.unmatchable_ids.push_back(m.trip_id);
    }
  }
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  r.trips_per_s = r.wall_s > 0 ? static_cast<double>(r.trips) / r.wall_s : 0.0;
  return res;
}

void write_matched_csv(std::ostream& out, std::span<const MatchedTrip> trips) {
  out << "trip_id,seq,link_id,t_entry_ms\n";
  for (const auto& m : trips) {
    std::size_t seq = 0;
    for (const auto& e : m.route) {
      out << csv_field(m.trip_id) << ',' << seq++ << ',';
      if (e.link_id == kGapLink) {
        out << "GAP";
      } else {
        out << e.link_id;
      }
      out << ',' << e.t_entry << '\n';
    }
  }
}

std::size_t recovered_links(std::span<const network::LinkId> matched,
                            std::span<const network::LinkId> truth) {
  std::vector<std::size_t> prev(truth.size() + 1, 0), cur(truth.size() + 1, 0);
  for (std::size_t i = 1; i <= matched.size(); ++i) {
    for (std::size_t j = 1; j <= truth.size(); ++j) {
      cur[j] = matched[i - 1] == truth[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[truth.size()];
}

}  // namespace trajan::mapmatch

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "json.hpp"
#include "pipeline.hpp"
#include "throughput.hpp"
#include "trajan/cluster.hpp"
#include "trajan/demand.hpp"
#include "trajan/enforcement.hpp"
#include "trajan/isochrone.hpp"
#include "trajan/mapmatch.hpp"
#include "trajan/synth.hpp"
#include "trajan/world.hpp"

using namespace trajan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// A world with every planted phenomenon switched off; criteria enable what
// they need.
synth::WorldSpec quiet_world(std::uint64_t seed) {
  synth::WorldSpec s;
  s.seed = seed;
  s.atr_stations = 0;
  s.background_trips = 0;
  s.covered_commuters = 0;
  s.uncovered_commuters = 0;
  s.wim_relevant = {0, 0, 0};
  s.wim_bystanders = 0;
  s.corridor_days = 0;
  s.isochrone_trips = 0;
  return s;
}

// --- 1 ---------------------------------------------------------------------

Verdict expansion_arithmetic() {
  const auto f = demand::expansion_factor_from_pr(0.0186);
  demand::ODMatrix m;
  m.zone_ids = {"A", "B"};
  m.counts[{"A", "B"}] = 1;
  const auto e = demand::expand_matrix(m, static_cast<double>(f));
  const bool ok = f == 54 && std::llround(1.0 / 0.0186) == 54 && e.expanded("A", "B") == 54.0;
  return {ok, "round(1/0.0186) -> " + std::to_string(f) + ", one trip expands to " +
                  format_number(e.expanded("A", "B"))};
}

// --- 2 ---------------------------------------------------------------------

Verdict pr_recovery() {
  bool ok = true;
  std::string detail;
  for (double p : {0.01, 0.02, 0.05}) {
    auto s = quiet_world(1000 + static_cast<std::uint64_t>(p * 1000));
    s.grid.rows = 12;
    s.grid.cols = 14;
    s.p = p;
    s.atr_stations = 40;
    s.atr_hours = 25;
    s.route_links = 2;
    const auto w = synth::generate_world(s);
    const auto net = network::RoadNetwork::build(w.network);
    const auto matched = mapmatch::match_batch(w.trips, net, mapmatch::HmmParams{}, 1);
    const auto est = demand::estimate_penetration(matched.trips, w.atr, net);
    const double dmed = std::abs(est.hourly_median - p);
    const double dmean = std::abs(est.hourly_mean - p);
    const bool good = est.valid_station_hours == 1000 && dmed <= 0.003 && dmean <= 0.0015;
    ok &= good;
    detail += "p=" + format_number(p) + " median " + fmt("%.5f", est.hourly_median) + " mean " +
              fmt("%.5f", est.hourly_mean) + " (" + std::to_string(est.valid_station_hours) +
              " station-hours); ";
  }
  return {ok, detail};
}

// --- 3 ---------------------------------------------------------------------

Verdict wim_exactness() {
  auto s = quiet_world(12);
  s.wim_relevant = {3794, 12333, 4847};
  s.wim_percent = {1.45, 0.61, 0.00};
  s.wim_bystanders = 200;
  const auto w = synth::generate_world(s);
  const auto truth = json::parse(w.truth_json);
  const std::string site = truth["wim"]["site_id"];
  std::ostringstream expect;
  expect << "site_id,weight_class,relevant,circumventing,circumvent_pct\n";
  for (const auto& c : truth["wim"]["classes"]) {
    expect << site << ',' << c["weight_class"].get<std::string>() << ',' << c["relevant"].get<int>()
           << ',' << c["circumventing"].get<int>() << ',' << c["circumvent_pct"].get<std::string>()
           << '\n';
  }
  const std::string published =
      "site_id,weight_class,relevant,circumventing,circumvent_pct\n" + site + ",W0_14,3794,55,1.45\n" +
      site + ",W14_26,12333,75,0.61\n" + site + ",W26_plus,4847,0,0.00\n";
  const std::vector<enforcement::EvasionReport> reports = {
      enforcement::detect_wim_evasion(w.trips, w.wim_site)};
  std::ostringstream got;
  enforcement::write_evasion_csv(got, reports);
  std::string rows;
  for (const auto& r : reports[0].rows) {
    if (r.weight_class == WeightClass::Unknown) continue;
    rows += std::to_string(r.relevant) + "/" + enforcement::format_percent(r.percentage()) + " ";
  }
  return {got.str() == expect.str() && got.str() == published,
          "detected " + rows + "over " + std::to_string(w.trips.size()) + " trips"};
}

// --- 4 ---------------------------------------------------------------------

// Brute-force reference from the full distance matrix: clusters are the
// connected components of core points.
bool dbscan_matches_reference(const std::vector<LatLon>& pts, const cluster::ClusterParams& p,
                              std::string& why) {
  const std::size_t n = pts.size();
  std::vector<std::vector<char>> near(n, std::vector<char>(n));
  std::vector<char> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      near[i][j] = haversine(pts[i], pts[j]) <= p.eps;
      count += near[i][j] ? 1 : 0;
    }
    core[i] = count >= p.min_pts;
  }
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || comp[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    comp[i] = ncomp;
    while (!stack.empty()) {
      const auto a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (core[b] && near[a][b] && comp[b] < 0) {
          comp[b] = ncomp;
          stack.push_back(b);
        }
      }
    }
    ++ncomp;
  }
  const auto lab = cluster::dbscan(std::span<const LatLon>(pts), p);
  std::map<int, int> to_ref, from_ref;
  for (std::size_t i = 0; i < n; ++i) {
    if ((lab.role[i] == cluster::Role::Core) != static_cast<bool>(core[i])) {
      why = "core set differs";
      return false;
    }
    if (!core[i]) continue;
    const auto a = to_ref.emplace(lab.label[i], comp[i]).first->second;
    const auto b = from_ref.emplace(comp[i], lab.label[i]).first->second;
    if (a != comp[i] || b != lab.label[i]) {
      why = "core clusters differ beyond relabeling";
      return false;
    }
  }
  if (lab.n_clusters != ncomp) {
    why = "cluster count differs";
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::set<int> allowed;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && near[i][j]) allowed.insert(comp[j]);
    }
    if (allowed.empty()) {
      if (lab.label[i] != cluster::kNoise || lab.role[i] != cluster::Role::Noise) {
        why = "noise set differs";
        return false;
      }
    } else {
      const auto it = to_ref.find(lab.label[i]);
      if (lab.role[i] != cluster::Role::Border || it == to_ref.end() || !allowed.count(it->second)) {
        why = "border point attached to a cluster it does not reach";
        return false;
      }
    }
  }
  return true;
}

Verdict dbscan_oracle() {
  synth::Rng rng(404);
  const LatLon c0{38.9, -76.9};
  int agreed = 0;
  std::string why;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 200));
    const int blobs = static_cast<int>(rng.uniform_int(1, 4));
    std::vector<LatLon> pts;
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(rng.uniform_int(0, blobs));
      if (k == blobs) {
        const LocalFrame f(c0);
        pts.push_back(f.to_latlon({rng.uniform(-3000, 3000), rng.uniform(-3000, 3000)}));
      } else {
        const LocalFrame f(destination_point(c0, 72.0 * k, 1500.0 * k));
        const double spread = rng.uniform(80, 400);
        pts.push_back(f.to_latlon({rng.normal(0, spread), rng.normal(0, spread)}));
      }
    }
    // Some datasets carry exact duplicates.
    if (trial % 10 == 0 && !pts.empty()) pts.insert(pts.end(), 5, pts.front());
    const cluster::ClusterParams p{rng.uniform(30, 600), static_cast<std::size_t>(rng.uniform_int(1, 12))};
    if (dbscan_matches_reference(pts, p, why)) ++agreed;
  }
  return {agreed == 200, std::to_string(agreed) + "/200 datasets agree" + (why.empty() ? "" : "; " + why)};
}

// --- 5 ---------------------------------------------------------------------

Verdict map_matching_recovery() {
  const auto net = synth::grid_network({});
  synth::Rng rng(505);
  std::size_t recovered = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    const auto route = synth::random_walk_route(net, rng, static_cast<int>(rng.uniform_int(4, 12)));
    synth::TraceOptions opt;
    opt.trip_id = "r" + std::to_string(i);
    opt.noise_sigma_m = 4.0;
    opt.interval_ms = 1000;
    const auto tr = synth::sample_route(net, route, opt, rng);
    const auto m = mapmatch::match(tr.trip, net, mapmatch::HmmParams{});
    recovered += mapmatch::recovered_links(m.links(), tr.truth);
    total += tr.truth.size();
  }
  const double rate = static_cast<double>(recovered) / static_cast<double>(total);

  mapmatch::HmmParams p;
  p.max_candidates = 4;
  int instances = 0, optimal = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto route = synth::random_walk_route(net, rng, 3);
    synth::TraceOptions opt;
    opt.noise_sigma_m = rng.uniform(4, 20);
    const auto trip = synth::sample_route(net, route, opt, rng).trip;
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 6));
    if (trip.waypoints.size() < n) continue;
    const auto from = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(trip.waypoints.size() - n)));
    const std::vector<Waypoint> wps(trip.waypoints.begin() + static_cast<std::ptrdiff_t>(from),
                                    trip.waypoints.begin() + static_cast<std::ptrdiff_t>(from + n));
    for (const auto& lat : mapmatch::build_lattices(net, wps, p)) {
      std::vector<std::size_t> path(lat.candidates.size(), 0);
      double best = -std::numeric_limits<double>::infinity();
      while (true) {
        best = std::max(best, lat.path_score(p, path));
        std::size_t s = 0;
        while (s < path.size() && ++path[s] == lat.candidates[s].size()) path[s++] = 0;
        if (s == path.size()) break;
      }
      const auto vr = mapmatch::viterbi(lat, p);
      ++instances;
      if (std::abs(vr.score - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++optimal;
    }
  }
  return {rate >= 0.95 && instances > 0 && optimal == instances,
          "link recovery " + fmt("%.4f", rate) + " over 200 routes; Viterbi optimal on " +
              std::to_string(optimal) + "/" + std::to_string(instances) + " small lattices"};
}

// --- 6 ---------------------------------------------------------------------

Verdict isochrone_properties() {
  std::string detail;
  // (a) far outliers, fewer than MinPts of them, never move a hull vertex.
  synth::Rng rng(606);
  const LatLon c{39.25, -76.58};
  const LocalFrame f(c);
  bool a_ok = true;
  int a_trials = 0;
  for (const auto& p : isochrone::default_params()) {
    std::vector<LatLon> base;
    while (base.size() < 3000) {
      const double x = rng.uniform(-2500, 2500), y = rng.uniform(-2500, 2500);
      if (x * x + y * y <= 2500.0 * 2500.0) base.push_back(f.to_latlon({x, y}));
    }
    const auto ref = isochrone::filter_and_hull(base, p);
    for (int trial = 0; trial < 5; ++trial) {
      auto noisy = base;
      const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(p.min_pts) - 1));
      // Alternate between a tight far group and scattered far points.
      const LatLon group = destination_point(c, rng.uniform(0, 360), rng.uniform(12000, 30000));
      for (std::size_t i = 0; i < k; ++i) {
        noisy.push_back(trial % 2 == 0 ? destination_point(group, rng.uniform(0, 360), rng.uniform(0, 50))
                                       : destination_point(c, rng.uniform(0, 360), rng.uniform(12000, 30000)));
      }
      const auto iso = isochrone::filter_and_hull(noisy, p);
      a_ok &= ref.boundary && iso.boundary && iso.boundary->exterior() == ref.boundary->exterior();
      ++a_trials;
    }
  }
  detail += std::string("(a) hull unchanged in ") + (a_ok ? "all " : "not all ") +
            std::to_string(a_trials) + " trials; ";

  // (b) uniform-speed radial world.
  auto s = quiet_world(66);
  s.isochrone_trips = 500;
  const auto w = synth::generate_world(s);
  const auto truth = json::parse(w.truth_json);
  const LatLon centre{truth["isochrone"]["origin_centre"][0], truth["isochrone"]["origin_centre"][1]};
  const double v = truth["isochrone"]["speed_mps"];
  isochrone::IsochroneSpec spec;
  spec.origin = w.isochrone_origin;
  spec.thresholds_min = {10, 20};
  spec.params = {isochrone::default_params()[0], isochrone::default_params()[1]};
  const auto isos = isochrone::build_isochrones(w.trips, spec);
  bool b_ok = isos.size() == 2;
  for (const auto& iso : isos) {
    if (!iso.boundary) {
      b_ok = false;
      continue;
    }
    const double r = isochrone::hull_radius(*iso.boundary, centre);
    const double expect = v * iso.threshold_min * 60.0;
    b_ok &= std::abs(r - expect) / expect <= 0.15;
    detail += "(b) t=" + format_number(iso.threshold_min) + " radius " + fmt("%.0f", r) + " vs " +
              fmt("%.0f", expect) + "; ";
  }

  // (c) default parameters.
  isochrone::IsochroneSpec defaults;
  defaults.origin = w.isochrone_origin;
  bool c_ok = true;
  try {
    defaults.validate();
    const auto& dp = defaults.params;
    c_ok = defaults.thresholds_min == std::vector<double>{10, 20, 30, 40} && dp.size() == 4 &&
           dp[0].eps == 1100 && dp[0].min_pts == 60 && dp[1].eps == 1300 && dp[1].min_pts == 20 &&
           dp[2].eps == 1400 && dp[2].min_pts == 10 && dp[3].eps == 1600 && dp[3].min_pts == 5;
  } catch (const DomainError&) {
    c_ok = false;
  }
  detail += std::string("(c) defaults ") + (c_ok ? "validate" : "invalid");
  return {a_ok && b_ok && c_ok, detail};
}

// --- 7 ---------------------------------------------------------------------

Verdict od_conservation() {
  const LatLon sw{38.8, -77.1};
  const double width = 16000, height = 12000;
  const auto tiling = synth::tile_zones(sw, width, height);
  const demand::ZoneSystem taz(demand::ZoneLevel::TAZ, tiling.taz);
  const demand::ZoneSystem county(demand::ZoneLevel::County, tiling.county);
  const demand::ZoneSystem state(demand::ZoneLevel::State, tiling.state);
  synth::Rng rng(707);
  const LocalFrame f(sw);
  std::vector<Trip> trips;
  for (int i = 0; i < 10000; ++i) {
    // Endpoints range a little beyond the tiling so some trips are unassigned.
    const auto a = f.to_latlon({rng.uniform(-800, width + 800), rng.uniform(-800, height + 800)});
    const auto b = f.to_latlon({rng.uniform(-800, width + 800), rng.uniform(-800, height + 800)});
    Trip t;
    t.trip_id = "od" + std::to_string(i);
    t.waypoints = {{a.lat, a.lon, 1'000'000}, {b.lat, b.lon, 1'600'000}};
    trips.push_back(std::move(t));
  }
  const auto m_taz = demand::build_od_matrix(trips, taz);
  const auto m_county = demand::build_od_matrix(trips, county);
  const auto m_state = demand::build_od_matrix(trips, state);
  bool ok = true;
  std::string detail;
  for (const auto* m : {&m_taz, &m_county, &m_state}) {
    ok &= m->total() + m->unassigned == 10000;
    detail += std::to_string(m->total()) + "+" + std::to_string(m->unassigned) + " ";
  }
  std::vector<std::string> county_ids, state_ids;
  for (const auto& z : county.zones()) county_ids.push_back(z.id);
  for (const auto& z : state.zones()) state_ids.push_back(z.id);
  const auto agg = demand::aggregate_matrix(m_county, demand::parent_map(county), state_ids);
  const bool nests = agg.counts == m_state.counts && agg.unassigned == m_state.unassigned;
  const bool nests_taz =
      demand::aggregate_matrix(m_taz, demand::parent_map(taz), county_ids).counts == m_county.counts;
  return {ok && nests && nests_taz, "TAZ/county/state total+unassigned = " + detail +
                                        (nests ? "; county->state equals direct state" : "; county->state differs")};
}

// --- 8 ---------------------------------------------------------------------

Verdict corridor_peaks() {
  auto s = quiet_world(808);
  s.corridor_days = 14;
  s.corridor_trips_per_hour = 4;
  const auto w = synth::generate_world(s);
  const auto truth = json::parse(w.truth_json);
  std::set<int> planted;
  for (const auto& h : truth["corridor"]["peak_hours"]) planted.insert(h.get<int>());
  demand::CorridorOptions opt;
  opt.utc_offset_hours = truth["corridor"]["utc_offset_hours"];
  const auto rep = demand::corridor_analysis(w.trips, w.corridor_origin, w.corridor_destination,
                                             w.corridors, opt);
  const auto peak = rep.peak_hour(demand::DayType::Weekday);
  std::vector<double> weekend;
  for (const auto& h : rep.hourly) {
    if (h.day == demand::DayType::Weekend) weekend.push_back(h.median_s);
  }
  double mean = 0;
  for (double m : weekend) mean += m;
  mean /= std::max<std::size_t>(1, weekend.size());
  double spread = 0;
  for (double m : weekend) spread = std::max(spread, std::abs(m - mean) / mean);
  const bool ok = peak && planted.count(*peak) && weekend.size() == 24 && spread <= 0.10;
  return {ok, "weekday argmax hour " + (peak ? std::to_string(*peak) : std::string("none")) +
                  ", weekend medians within " + fmt("%.1f", spread * 100) + "% of their mean"};
}

// --- 9 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() != "manifest.json") out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

Verdict determinism() {
  const auto wl = bench::grid_workload(300, 8, 909);
  std::ostringstream one, eight;
  mapmatch::write_matched_csv(one, mapmatch::match_batch(wl.trips, wl.net, mapmatch::HmmParams{}, 1).trips);
  mapmatch::write_matched_csv(eight, mapmatch::match_batch(wl.trips, wl.net, mapmatch::HmmParams{}, 8).trips);
  const bool batch_ok = one.str() == eight.str();

  const auto root = fs::temp_directory_path() / ("trajan_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::string> world = {
      "--seed", "42", "--set", "synth.background_trips=60", "--set", "synth.wim_relevant=[600, 1500, 500]",
      "--set", "synth.corridor_days=2", "--set", "synth.isochrone_trips=120"};
  std::size_t compared = 0, identical = 0;
  auto run_twice = [&](const std::string& name, std::vector<std::string> args) {
    std::vector<std::map<std::string, std::string>> got;
    for (int k = 0; k < 2; ++k) {
      const auto dir = root / (name + "_" + std::to_string(k));
      auto a = args;
      a.insert(a.end(), {"--out", dir.string()});
      if (cli(a) != 0) return;
      got.push_back(artifacts(dir));
    }
    ++compared;
    if (got[0] == got[1] && !got[0].empty()) ++identical;
  };
  auto synth_args = std::vector<std::string>{"synth"};
  synth_args.insert(synth_args.end(), world.begin(), world.end());
  run_twice("synth", synth_args);
  const auto w = root / "synth_0";
  auto in = [&](const char* n) { return (w / n).string(); };
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"ingest-stats", {"--trips", in("trips.csv")}},
      {"match", {"--trips", in("trips.csv"), "--network", in("network.geojson")}},
      {"penetration", {"--trips", in("trips.csv"), "--network", in("network.geojson"), "--atr", in("atr.csv")}},
      {"od-matrix", {"--trips", in("trips.csv"), "--zones", in("zones_taz.geojson"), "--parent-zones",
                     in("zones_county.geojson"), "--set", "od.pr=0.02"}},
      {"corridor", {"--trips", in("trips.csv"), "--corridor", in("corridor.geojson")}},
      {"isochrone", {"--trips", in("trips.csv"), "--origin", in("isochrone_origin.geojson")}},
      {"transit-coverage", {"--trips", in("trips.csv"), "--network", in("network.geojson"), "--transit",
                            in("transit.geojson")}},
      {"speed-grid", {"--trips", in("trips.csv")}},
      {"wim-evasion", {"--trips", in("trips.csv"), "--wim-sites", in("wim_sites.geojson")}},
  };
  for (const auto& [name, args] : commands) {
    auto a = std::vector<std::string>{name, "--workers", "2"};
    a.insert(a.end(), args.begin(), args.end());
    run_twice(name, a);
  }
  fs::remove_all(root);
  const bool cli_ok = compared == 10 && identical == 10;
  return {batch_ok && cli_ok, std::string("match_batch 1 vs 8 workers ") + (batch_ok ? "identical" : "differ") +
                                  "; " + std::to_string(identical) + "/10 subcommands byte-identical across runs"};
}

// --- 10 --------------------------------------------------------------------

Verdict throughput() {
  const auto w = bench::grid_workload(2000, 8, 1010);
  const auto ingest = bench::measure_ingest(w);
  const auto match = bench::measure_matching(w, 1);
  return {ingest.waypoints_per_s >= 100000 && match.trips_per_s_per_worker >= 50,
          "ingest+stats " + fmt("%.0f", ingest.waypoints_per_s) + " waypoints/s; matching " +
              fmt("%.1f", match.trips_per_s_per_worker) + " trips/s/worker"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 when no runtime bound applies
  std::function<Verdict()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "expansion-factor arithmetic", 1, expansion_arithmetic},
      {2, "PR estimator recovery", 30, pr_recovery},
      {3, "WIM evasion exactness", 10, wim_exactness},
      {4, "DBSCAN oracle equivalence", 60, dbscan_oracle},
      {5, "map-matching recovery", 120, map_matching_recovery},
      {6, "isochrone properties", 60, isochrone_properties},
      {7, "O-D conservation and hierarchy", 10, od_conservation},
      {8, "corridor peaks", 0, corridor_peaks},
      {9, "determinism", 0, determinism},
      {10, "throughput floor", 0, throughput},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && s > c.budget_s) {
      v.pass = false;
      v.detail += " [over the " + format_number(c.budget_s) + " s budget]";
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %d %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

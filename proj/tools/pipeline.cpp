#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "trajan/demand.hpp"
#include "trajan/enforcement.hpp"
#include "trajan/geojson.hpp"
#include "trajan/ingest.hpp"
#include "trajan/isochrone.hpp"
#include "trajan/mapmatch.hpp"
#include "trajan/network.hpp"
#include "trajan/transit.hpp"
#include "trajan/world.hpp"

#ifndef TRAJAN_VERSION
#define TRAJAN_VERSION "0.0.0"
#endif

namespace trajan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Artifact {
  std::string name;
  std::string content;
};

struct InputRecord {
  std::string key;
  std::string path;
  std::string hash;
  std::size_t bytes = 0;
};

struct Context {
  std::string subcommand;
  Config cfg;
  std::size_t workers = 1;
  std::uint64_t seed = 42;
  std::string out_dir;
  std::vector<InputRecord> inputs;
  json metrics = json::object();

  std::string read_input(const std::string& key) {
    const auto path = cfg.str(key);
    if (!path || path->empty()) {
      throw ConfigError(subcommand + " needs " + key + " (flag --" + flag_name(key) + ")");
    }
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw IoError("cannot read " + key + " file " + *path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + *path);
    auto text = ss.str();
    inputs.push_back({key, *path, hash_hex(text), text.size()});
    return text;
  }

  static std::string flag_name(const std::string& key) {
    auto name = key.substr(key.find('.') + 1);
    std::replace(name.begin(), name.end(), '_', '-');
    return name;
  }
};

// Module preconditions on parameters are configuration problems here.
template <typename F>
auto as_config(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- inputs ----------------------------------------------------------------

struct LoadedTrips {
  std::vector<Trip> trips;
  ingest::IngestReport report;
};

LoadedTrips load_trips(Context& ctx, bool filter) {
  const auto fmt = ingest::parse_format(ctx.cfg.str("input.trips_format", "csv"));
  const double vmax = ctx.cfg.num("ingest.vmax", ingest::kDefaultVmax);
  if (!(vmax > 0)) throw ConfigError("ingest.vmax must be positive");
  std::istringstream in(ctx.read_input("input.trips"));
  auto parsed = ingest::parse_trips(in, fmt);
  LoadedTrips out;
  out.report = parsed.report;
  if (!filter) {
    out.trips = std::move(parsed.trips);
  } else {
    for (auto& t : parsed.trips) {
      auto f = ingest::filter_outlier_waypoints(t, vmax);
      out.report.waypoints_dropped_as_outliers += f.dropped;
      if (!f.trip) {
        --out.report.trips_kept;
        out.report.reject("too_few_waypoints_after_outliers");
        continue;
      }
      out.trips.push_back(std::move(*f.trip));
    }
  }
  ctx.metrics["trips_read"] = out.report.trips_read;
  ctx.metrics["trips_kept"] = out.trips.size();
  ctx.metrics["waypoints_read"] = out.report.waypoints_read;
  return out;
}

network::RoadNetwork load_network(Context& ctx) {
  return network::parse_network_geojson(ctx.read_input("input.network"));
}

mapmatch::HmmParams match_params(const Config& cfg) {
  mapmatch::HmmParams p;
  p.sigma_gps = cfg.num("match.sigma_gps", p.sigma_gps);
  p.beta = cfg.num("match.beta", p.beta);
  p.candidate_radius = cfg.num("match.candidate_radius", p.candidate_radius);
  const auto k = cfg.integer("match.max_candidates", static_cast<std::int64_t>(p.max_candidates));
  if (k < 1) throw ConfigError("match.max_candidates must be at least 1");
  p.max_candidates = static_cast<std::size_t>(k);
  p.route_slack_m = cfg.num("match.route_slack_m", p.route_slack_m);
  p.backtrack_tolerance_m = cfg.num("match.backtrack_tolerance_m", p.backtrack_tolerance_m);
  as_config([&] { p.validate(); });
  return p;
}

std::string batch_report_json(const mapmatch::BatchReport& r) {
  json j;
  j["trips"] = r.trips;
  j["matched"] = r.matched;
  j["unmatchable"] = r.unmatchable;
  j["waypoints"] = r.waypoints;
  j["unmatchable_ids"] = r.unmatchable_ids;
  return j.dump(2) + "\n";
}

mapmatch::BatchResult run_matching(Context& ctx, std::span<const Trip> trips,
                                   const network::RoadNetwork& net, const mapmatch::HmmParams& p) {
  auto res = mapmatch::match_batch(trips, net, p, ctx.workers);
  ctx.metrics["match_wall_s"] = res.report.wall_s;
  ctx.metrics["match_trips_per_s"] = res.report.trips_per_s;
  return res;
}

GeoPolygon first_polygon(const std::string& text, const std::string& what) {
  for (const auto& f : geojson::parse_features(text, what)) {
    if (f.type == geojson::GeometryType::Polygon) return f.polygon();
  }
  throw ParseError(what + " has no Polygon feature");
}

// --- subcommands -----------------------------------------------------------

std::vector<Artifact> cmd_ingest_stats(Context& ctx) {
  const double max_gap = ctx.cfg.num("ingest.max_gap_s", ingest::kDefaultMaxGapS);
  if (!(max_gap >= 0)) throw ConfigError("ingest.max_gap_s must be non-negative");
  const auto exact_limit = ctx.cfg.integer("ingest.exact_limit", 10'000'000);
  if (exact_limit < 1) throw ConfigError("ingest.exact_limit must be positive");
  auto loaded = load_trips(ctx, true);
  const auto& trips = loaded.trips;

  std::ostringstream stats;
  stats << "trip_id,device_id,n_waypoints,duration_s,length_m,median_lapse_s,median_spacing_m\n";
  std::vector<ingest::TripStats> all;
  all.reserve(trips.size());
  for (const auto& t : trips) {
    const auto s = ingest::trip_stats(t);
    all.push_back(s);
    stats << csv_field(t.trip_id) << ',' << csv_field(t.device_id) << ',' << s.n_waypoints << ','
          << fixed6(s.duration_s) << ',' << fixed6(s.length_m) << ',' << fixed6(s.median_lapse_s)
          << ',' << fixed6(s.median_spacing_m) << '\n';
  }

  std::ostringstream summary, hist;
  summary << "metric,n,min,q1,median,q3,max,mean,exact\n";
  hist << "metric,bin,lo,hi,count\n";
  if (!all.empty()) {
    const auto cs = ingest::summarize_corpus(all, static_cast<std::size_t>(exact_limit));
    const std::pair<const char*, const ingest::Distribution*> rows[] = {
        {"duration_s", &cs.duration_s},
        {"length_m", &cs.length_m},
        {"median_lapse_s", &cs.lapse_s},
        {"median_spacing_m", &cs.spacing_m}};
    for (const auto& [name, d] : rows) {
      summary << name << ',' << d->n << ',' << fixed6(d->min) << ',' << fixed6(d->q1) << ','
              << fixed6(d->median) << ',' << fixed6(d->q3) << ',' << fixed6(d->max) << ','
              << fixed6(d->mean) << ',' << (d->exact ? "true" : "false") << '\n';
      for (std::size_t b = 0; b < d->histogram.counts.size(); ++b) {
        const double lo = d->histogram.lo + d->histogram.width * static_cast<double>(b);
        hist << name << ',' << b << ',' << fixed6(lo) << ',' << fixed6(lo + d->histogram.width)
             << ',' << d->histogram.counts[b] << '\n';
      }
    }
  }

  std::ostringstream chains;
  chains << "device_id,chain,n_trips,first_trip_id,last_trip_id\n";
  std::map<std::string, std::size_t> per_device;
  for (const auto& c : ingest::chain_device_trips(trips, max_gap)) {
    chains << csv_field(c.device_id) << ',' << per_device[c.device_id]++ << ','
           << c.trip_indices.size() << ',' << csv_field(trips[c.trip_indices.front()].trip_id) << ','
           << csv_field(trips[c.trip_indices.back()].trip_id) << '\n';
  }
  return {{"ingest_report.json", loaded.report.to_json() + "\n"},
          {"trip_stats.csv", stats.str()},
          {"corpus_summary.csv", summary.str()},
          {"corpus_histograms.csv", hist.str()},
          {"trip_chains.csv", chains.str()}};
}

std::vector<Artifact> cmd_match(Context& ctx) {
  const auto p = match_params(ctx.cfg);
  const auto net = load_network(ctx);
  const auto loaded = load_trips(ctx, true);
  const auto res = run_matching(ctx, loaded.trips, net, p);
  std::ostringstream csv;
  mapmatch::write_matched_csv(csv, res.trips);
  return {{"matched.csv", csv.str()}, {"match_report.json", batch_report_json(res.report)}};
}

std::vector<Artifact> cmd_penetration(Context& ctx) {
  const auto p = match_params(ctx.cfg);
  const auto agg = demand::parse_pr_aggregate(ctx.cfg.str("penetration.aggregate", "median"));
  const auto net = load_network(ctx);
  std::istringstream atr_in(ctx.read_input("input.atr"));
  const auto atr = demand::parse_atr_csv(atr_in);
  for (const auto& r : atr) {
    if (!net.find_link(r.link_id)) {
      throw ConfigError("ATR station " + r.station_id + " refers to link " +
                        std::to_string(r.link_id) + ", which is not in the network");
    }
  }
  const auto loaded = load_trips(ctx, true);
  const auto res = run_matching(ctx, loaded.trips, net, p);
  const auto est = demand::estimate_penetration(res.trips, atr, net);
  std::ostringstream csv;
  demand::write_penetration_csv(csv, est);
  return {{"penetration.csv", csv.str()},
          {"penetration_summary.json", demand::penetration_summary_json(est, agg) + "\n"}};
}

std::vector<Artifact> cmd_od_matrix(Context& ctx) {
  const auto zones = demand::parse_zones(ctx.read_input("input.zones"));
  std::optional<demand::ZoneSystem> parents;
  if (ctx.cfg.has("input.parent_zones")) parents = demand::parse_zones(ctx.read_input("input.parent_zones"));
  const auto factor = ctx.cfg.num("od.expansion_factor");
  const auto pr = ctx.cfg.num("od.pr");
  if (factor && pr) throw ConfigError("set either od.expansion_factor or od.pr, not both");
  std::optional<double> f;
  if (factor) {
    if (!(*factor > 0)) throw ConfigError("od.expansion_factor must be positive");
    f = *factor;
  }
  if (pr) f = static_cast<double>(as_config([&] { return demand::expansion_factor_from_pr(*pr); }));
  const auto min_flow = ctx.cfg.integer("od.chord_min_flow", 0);
  if (min_flow < 0) throw ConfigError("od.chord_min_flow must be non-negative");

  const auto loaded = load_trips(ctx, true);
  auto m = demand::build_od_matrix(loaded.trips, zones, ctx.workers);
  if (f) m = demand::expand_matrix(m, *f);

  std::vector<Artifact> out;
  std::ostringstream csv, chord;
  demand::write_od_csv(csv, m);
  demand::write_chord_table(chord, m, min_flow);
  json summary;
  summary["level"] = std::string(demand::to_string(zones.level()));
  summary["zones"] = zones.zones().size();
  summary["total"] = m.total();
  summary["unassigned"] = m.unassigned;
  summary["expansion_factor"] = f ? json(*f) : json(nullptr);
  out.push_back({"od_matrix.csv", csv.str()});
  out.push_back({"chord_table.tsv", chord.str()});
  if (parents) {
    std::vector<std::string> ids;
    for (const auto& z : parents->zones()) ids.push_back(z.id);
    const auto agg = demand::aggregate_matrix(m, demand::parent_map(zones), ids);
    std::ostringstream pcsv;
    demand::write_od_csv(pcsv, agg);
    const auto name = "od_matrix_" + std::string(demand::to_string(parents->level())) + ".csv";
    out.push_back({name, pcsv.str()});
    summary["parent_level"] = std::string(demand::to_string(parents->level()));
    summary["parent_total"] = agg.total();
  }
  out.push_back({"od_summary.json", summary.dump(2) + "\n"});
  return out;
}

struct CorridorFile {
  GeoPolygon origin;
  GeoPolygon destination;
  std::vector<demand::Corridor> corridors;
};

CorridorFile parse_corridor_file(const std::string& text) {
  CorridorFile out;
  bool have_o = false, have_d = false;
  const auto features = geojson::parse_features(text, "corridor file");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const auto role = f.text("role").value_or("");
    const auto where = "corridor file feature " + std::to_string(i);
    if (role == "origin") {
      if (have_o) throw ParseError(where + ": second origin");
      out.origin = f.polygon();
      have_o = true;
    } else if (role == "destination") {
      if (have_d) throw ParseError(where + ": second destination");
      out.destination = f.polygon();
      have_d = true;
    } else if (role == "corridor") {
      const auto name = f.text("name");
      if (!name || name->empty()) throw ParseError(where + ": corridor without a name");
      out.corridors.push_back({*name, f.polygon()});
    } else {
      throw ParseError(where + ": role must be origin, destination or corridor");
    }
  }
  if (!have_o || !have_d) throw ParseError("corridor file needs one origin and one destination");
  return out;
}

std::vector<Artifact> cmd_corridor(Context& ctx) {
  demand::CorridorOptions opt;
  opt.utc_offset_hours = static_cast<int>(ctx.cfg.integer("corridor.utc_offset_hours", opt.utc_offset_hours));
  if (opt.utc_offset_hours < -14 || opt.utc_offset_hours > 14) {
    throw ConfigError("corridor.utc_offset_hours out of range");
  }
  const auto file = parse_corridor_file(ctx.read_input("input.corridor"));
  const auto loaded = load_trips(ctx, true);
  const auto rep = demand::corridor_analysis(loaded.trips, file.origin, file.destination,
                                             file.corridors, opt);
  std::ostringstream trips_csv, hourly, split;
  trips_csv << "trip_id,depart_ms,day_type,hour,travel_time_s,route\n";
  for (const auto& t : rep.trips) {
    trips_csv << csv_field(t.trip_id) << ',' << t.depart << ',' << demand::to_string(t.day) << ','
              << t.hour << ',' << format_number(t.travel_time_s) << ',' << csv_field(t.route) << '\n';
  }
  demand::write_corridor_hourly_csv(hourly, rep);
  demand::write_route_split_csv(split, rep);
  json s;
  s["trips"] = rep.trips.size();
  s["assigned"] = rep.assigned;
  s["unassigned"] = rep.unassigned;
  s["route_shares"] = rep.route_shares;
  const auto wd = rep.peak_hour(demand::DayType::Weekday);
  const auto we = rep.peak_hour(demand::DayType::Weekend);
  s["peak_hour_weekday"] = wd ? json(*wd) : json(nullptr);
  s["peak_hour_weekend"] = we ? json(*we) : json(nullptr);
  s["utc_offset_hours"] = opt.utc_offset_hours;
  return {{"corridor_trips.csv", trips_csv.str()},
          {"corridor_hourly.csv", hourly.str()},
          {"route_split.csv", split.str()},
          {"corridor_summary.json", s.dump(2) + "\n"}};
}

std::vector<Artifact> cmd_isochrone(Context& ctx) {
  isochrone::IsochroneSpec spec;
  if (auto t = ctx.cfg.nums("isochrone.thresholds_min")) spec.thresholds_min = *t;
  const auto eps = ctx.cfg.nums("isochrone.eps");
  const auto min_pts = ctx.cfg.integers("isochrone.min_pts");
  if (eps || min_pts) {
    if (!eps || !min_pts || eps->size() != min_pts->size()) {
      throw ConfigError("isochrone.eps and isochrone.min_pts must be given together with equal lengths");
    }
    spec.params.clear();
    for (std::size_t i = 0; i < eps->size(); ++i) {
      if ((*min_pts)[i] < 1) throw ConfigError("isochrone.min_pts entries must be positive");
      spec.params.push_back({(*eps)[i], static_cast<std::size_t>((*min_pts)[i])});
    }
  }
  spec.origin = first_polygon(ctx.read_input("input.isochrone_origin"), "isochrone origin");
  as_config([&] { spec.validate(); });
  const auto loaded = load_trips(ctx, true);
  const auto isos = isochrone::build_isochrones(loaded.trips, spec);
  std::ostringstream csv;
  csv << "threshold_min,n_points,n_outliers,n_discarded,discarded_fraction,area_m2,diagnostic\n";
  for (const auto& iso : isos) {
    const double area = iso.boundary ? ring_area_m2(iso.boundary->exterior()) : 0.0;
    csv << format_number(iso.threshold_min) << ',' << iso.n_points << ',' << iso.n_outliers << ','
        << iso.n_discarded << ',' << format_number(iso.discarded_fraction) << ','
        << fixed6(area) << ',' << csv_field(iso.diagnostic) << '\n';
  }
  return {{"isochrones.geojson", isochrone::to_geojson(isos)}, {"isochrone_summary.csv", csv.str()}};
}

std::vector<Artifact> cmd_transit_coverage(Context& ctx) {
  const auto p = match_params(ctx.cfg);
  transit::OdClusterParams cp;
  const auto min_pts = ctx.cfg.integer("transit.min_pts", static_cast<std::int64_t>(cp.min_pts));
  if (min_pts < 1) throw ConfigError("transit.min_pts must be positive");
  cp.min_pts = static_cast<std::size_t>(min_pts);
  cp.max_eps = ctx.cfg.num("transit.max_eps", cp.max_eps);
  cp.threshold = ctx.cfg.num("transit.threshold", cp.threshold);
  as_config([&] { cp.validate(); });
  const double buffer = ctx.cfg.num("transit.buffer_m", transit::kDefaultBufferM);
  const double uncovered = ctx.cfg.num("transit.uncovered_threshold", transit::kDefaultUncoveredThreshold);
  const double margin = ctx.cfg.num("transit.region_margin_m", 1000.0);
  if (!(buffer > 0)) throw ConfigError("transit.buffer_m must be positive");
  if (!(uncovered >= 0 && uncovered <= 1)) throw ConfigError("transit.uncovered_threshold must lie in [0, 1]");
  if (!(margin >= 0)) throw ConfigError("transit.region_margin_m must be non-negative");

  const auto net = load_network(ctx);
  const auto tn = transit::parse_transit(ctx.read_input("input.transit"));
  as_config([&] { tn.validate(); });
  if (tn.routes.empty()) throw ConfigError("transit network has no routes");
  const auto loaded = load_trips(ctx, true);

  // Study region: the routes' bounding box grown by the margin.
  double lo_lat = 90, hi_lat = -90, lo_lon = 180, hi_lon = -180;
  for (const auto& r : tn.routes) {
    for (const auto& q : r.line) {
      lo_lat = std::min(lo_lat, q.lat);
      hi_lat = std::max(hi_lat, q.lat);
      lo_lon = std::min(lo_lon, q.lon);
      hi_lon = std::max(hi_lon, q.lon);
    }
  }
  const LocalFrame f({lo_lat, lo_lon});
  const auto sw = f.to_latlon({-margin, -margin});
  const auto ne_xy = f.to_xy({hi_lat, hi_lon});
  const auto ne = f.to_latlon({ne_xy.x + margin, ne_xy.y + margin});
  const auto region = GeoPolygon::box(sw.lat, sw.lon, ne.lat, ne.lon);
  std::vector<Trip> selected;
  for (const auto& t : loaded.trips) {
    if (point_in_polygon(t.waypoints.front().latlon(), region) &&
        point_in_polygon(t.waypoints.back().latlon(), region)) {
      selected.push_back(t);
    }
  }
  ctx.metrics["trips_in_region"] = selected.size();
  const auto labeling = transit::cluster_od_pairs(selected, cp);
  const auto res = run_matching(ctx, selected, net, p);
  std::map<std::string, const mapmatch::MatchedTrip*> by_id;
  for (const auto& m : res.trips) by_id.emplace(m.trip_id, &m);
  std::vector<std::vector<std::vector<LatLon>>> traj;
  traj.reserve(selected.size());
  for (const auto& t : selected) traj.push_back(transit::matched_polylines(*by_id.at(t.trip_id), net));
  const auto rep = transit::demand_vs_transit(labeling, traj, tn, buffer, uncovered, ctx.workers);

  std::ostringstream cov, labels;
  transit::write_coverage_csv(cov, rep);
  labels << "trip_id,cluster_id,role\n";
  for (std::size_t i = 0; i < selected.size(); ++i) {
    labels << csv_field(selected[i].trip_id) << ',' << labeling.label[i] << ','
           << cluster::to_string(labeling.role[i]) << '\n';
  }
  std::vector<mapmatch::MatchedTrip> clustered;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (labeling.label[i] != cluster::kNoise) clustered.push_back(*by_id.at(selected[i].trip_id));
  }
  const auto heat = transit::link_heat(clustered);
  json s;
  s["trips_in_region"] = selected.size();
  s["clusters"] = rep.clusters.size();
  s["noise_trips"] = rep.noise_trips;
  std::size_t flagged = 0;
  for (const auto& c : rep.clusters) flagged += c.flagged ? 1 : 0;
  s["flagged_clusters"] = flagged;
  s["buffer_m"] = buffer;
  s["uncovered_threshold"] = uncovered;
  return {{"coverage.csv", cov.str()},
          {"od_clusters.csv", labels.str()},
          {"heat_layer.geojson", transit::heat_layer_geojson(heat, net)},
          {"transit_summary.json", s.dump(2) + "\n"}};
}

std::vector<Artifact> cmd_speed_grid(Context& ctx) {
  enforcement::SpeedThreshold th;
  th.mode = enforcement::parse_threshold_mode(ctx.cfg.str("speed_grid.mode", "absolute"));
  th.speed_mps = ctx.cfg.num("speed_grid.threshold_mps", th.speed_mps);
  as_config([&] { th.validate(); });
  GridSpec g;
  g.cell_m = ctx.cfg.num("speed_grid.cell_m", 500.0);
  const bool explicit_grid = ctx.cfg.has("speed_grid.origin_lat") || ctx.cfg.has("speed_grid.origin_lon") ||
                             ctx.cfg.has("speed_grid.rows") || ctx.cfg.has("speed_grid.cols");
  if (explicit_grid) {
    const auto lat = ctx.cfg.num("speed_grid.origin_lat");
    const auto lon = ctx.cfg.num("speed_grid.origin_lon");
    const auto rows = ctx.cfg.integer("speed_grid.rows");
    const auto cols = ctx.cfg.integer("speed_grid.cols");
    if (!lat || !lon || !rows || !cols) {
      throw ConfigError("speed_grid.origin_lat, origin_lon, rows and cols go together");
    }
    g.origin = {*lat, *lon};
    g.rows = static_cast<int>(*rows);
    g.cols = static_cast<int>(*cols);
  }
  if (!(g.cell_m > 0)) throw ConfigError("speed_grid.cell_m must be positive");
  if (explicit_grid) as_config([&] { g.validate(); });
  const auto loaded = load_trips(ctx, true);
  if (!explicit_grid) {
    // Grid over the waypoint bounding box.
    double lo_lat = 90, hi_lat = -90, lo_lon = 180, hi_lon = -180;
    for (const auto& t : loaded.trips) {
      for (const auto& w : t.waypoints) {
        lo_lat = std::min(lo_lat, w.lat);
        hi_lat = std::max(hi_lat, w.lat);
        lo_lon = std::min(lo_lon, w.lon);
        hi_lon = std::max(hi_lon, w.lon);
      }
    }
    if (loaded.trips.empty()) lo_lat = hi_lat = lo_lon = hi_lon = 0;
    g.origin = {lo_lat, lo_lon};
    const auto ne = LocalFrame(g.origin).to_xy({hi_lat, hi_lon});
    const double cols = std::floor(ne.x / g.cell_m) + 1;
    const double rows = std::floor(ne.y / g.cell_m) + 1;
    if (rows * cols > 4.0e6) throw ConfigError("speed grid would exceed four million cells; raise speed_grid.cell_m");
    g.rows = static_cast<int>(rows);
    g.cols = static_cast<int>(cols);
  }
  const auto grid = enforcement::speed_grid(loaded.trips, g, th, ctx.workers);
  std::ostringstream csv;
  enforcement::write_speed_grid_csv(csv, grid);
  json s;
  s["grid"] = {{"origin_lat", g.origin.lat}, {"origin_lon", g.origin.lon}, {"cell_m", g.cell_m},
               {"rows", g.rows}, {"cols", g.cols}};
  s["mode"] = std::string(enforcement::to_string(th.mode));
  s["threshold_mps"] = th.mode == enforcement::ThresholdMode::Absolute ? json(th.speed_mps) : json(nullptr);
  s["segments"] = grid.segments;
  s["in_grid"] = grid.total();
  s["out_of_grid"] = grid.out_of_grid;
  s["skipped"] = grid.skipped;
  return {{"speed_grid.csv", csv.str()},
          {"speed_grid.geojson", enforcement::speed_grid_geojson(grid)},
          {"speed_grid_summary.json", s.dump(2) + "\n"}};
}

std::vector<Artifact> cmd_wim_evasion(Context& ctx) {
  const auto sites = enforcement::parse_wim_sites(ctx.read_input("input.wim_sites"));
  for (const auto& s : sites) as_config([&] { s.validate(); });
  const auto loaded = load_trips(ctx, true);
  std::vector<enforcement::EvasionReport> reports;
  json costs = json::array();
  for (const auto& s : sites) {
    reports.push_back(enforcement::detect_wim_evasion(loaded.trips, s));
    const auto c = enforcement::detour_cost(reports.back());
    costs.push_back({{"site_id", s.site_id},
                     {"circumventing", c.circumventing},
                     {"slower", c.slower},
                     {"compliant_median_s", c.compliant_median_s ? json(*c.compliant_median_s) : json(nullptr)},
                     {"fraction", c.fraction ? json(*c.fraction) : json(nullptr)},
                     {"diagnostic", c.diagnostic}});
  }
  std::ostringstream csv;
  enforcement::write_evasion_csv(csv, reports);
  return {{"wim_evasion.csv", csv.str()}, {"detour_cost.json", costs.dump(2) + "\n"}};
}

synth::WorldSpec world_spec(const Context& ctx) {
  const auto& c = ctx.cfg;
  synth::WorldSpec s;
  s.seed = ctx.seed;
  auto int_of = [&](const char* key, auto& field) {
    using T = std::remove_reference_t<decltype(field)>;
    field = static_cast<T>(c.integer(key, static_cast<std::int64_t>(field)));
  };
  s.grid.origin.lat = c.num("synth.origin_lat", s.grid.origin.lat);
  s.grid.origin.lon = c.num("synth.origin_lon", s.grid.origin.lon);
  int_of("synth.rows", s.grid.rows);
  int_of("synth.cols", s.grid.cols);
  s.grid.spacing_m = c.num("synth.spacing_m", s.grid.spacing_m);
  int_of("synth.start_ms", s.start);
  s.p = c.num("synth.p", s.p);
  int_of("synth.atr_stations", s.atr_stations);
  int_of("synth.atr_hours", s.atr_hours);
  int_of("synth.atr_min_count", s.atr_min_count);
  int_of("synth.atr_max_count", s.atr_max_count);
  int_of("synth.background_trips", s.background_trips);
  int_of("synth.route_links", s.route_links);
  int_of("synth.covered_commuters", s.covered_commuters);
  int_of("synth.uncovered_commuters", s.uncovered_commuters);
  s.noise_sigma_m = c.num("synth.noise_sigma_m", s.noise_sigma_m);
  int_of("synth.interval_ms", s.interval_ms);
  s.fleet_speed_mps = c.num("synth.fleet_speed_mps", s.fleet_speed_mps);
  if (auto v = c.integers("synth.wim_relevant")) s.wim_relevant = *v;
  if (auto v = c.nums("synth.wim_percent")) s.wim_percent = *v;
  int_of("synth.wim_bystanders", s.wim_bystanders);
  int_of("synth.utc_offset_hours", s.utc_offset_hours);
  int_of("synth.corridor_days", s.corridor_days);
  int_of("synth.corridor_trips_per_hour", s.corridor_trips_per_hour);
  s.corridor_north_share = c.num("synth.corridor_north_share", s.corridor_north_share);
  if (auto v = c.integers("synth.peak_hours")) s.peak_hours.assign(v->begin(), v->end());
  s.peak_slowdown = c.num("synth.peak_slowdown", s.peak_slowdown);
  int_of("synth.isochrone_trips", s.isochrone_trips);
  s.isochrone_speed_mps = c.num("synth.isochrone_speed_mps", s.isochrone_speed_mps);
  s.isochrone_duration_min = c.num("synth.isochrone_duration_min", s.isochrone_duration_min);
  s.validate();
  return s;
}

std::vector<Artifact> cmd_synth(Context& ctx) {
  const auto spec = world_spec(ctx);
  const auto world = synth::generate_world(spec);
  std::vector<Artifact> out;
  for (auto& [name, content] : synth::world_files(world)) out.push_back({name, std::move(content)});
  ctx.metrics["trips"] = world.trips.size();
  return out;
}

struct Subcommand {
  const char* name;
  const char* help;
  std::function<std::vector<Artifact>(Context&)> fn;
};

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> all = {
      {"ingest-stats", "Parse, clean and describe a trip corpus", cmd_ingest_stats},
      {"match", "Map-match trips to the road network", cmd_match},
      {"penetration", "Estimate probe penetration against ATR counts", cmd_penetration},
      {"od-matrix", "Zone-to-zone trip matrix and chord table", cmd_od_matrix},
      {"corridor", "Corridor travel times by hour and route split", cmd_corridor},
      {"isochrone", "Reachability boundaries from an origin area", cmd_isochrone},
      {"transit-coverage", "Cluster demand and score transit coverage", cmd_transit_coverage},
      {"speed-grid", "High-speed heat grid", cmd_speed_grid},
      {"wim-evasion", "Weigh-station circumvention by weight class", cmd_wim_evasion},
      {"synth", "Generate the synthetic corpus with its truth sidecar", cmd_synth},
  };
  return all;
}

// --- output ----------------------------------------------------------------

void write_atomic(const fs::path& dir, const std::string& name, const std::string& content) {
  const auto target = dir / name;
  const auto tmp = dir / ("." + name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + name + " into place in " + dir.string());
  }
}

std::string manifest_json(const Context& ctx, const std::vector<Artifact>& artifacts,
                          const std::string& started, double wall_s) {
  json m;
  m["tool"] = "trajan";
  m["version"] = TRAJAN_VERSION;
  m["subcommand"] = ctx.subcommand;
  const auto canonical = ctx.cfg.canonical();
  m["config_hash"] = hash_hex(canonical);
  json cfg = json::object();
  for (const auto& [k, v] : ctx.cfg.values()) cfg[k] = v.canonical();
  m["config"] = cfg;
  json inputs = json::array();
  for (const auto& i : ctx.inputs) {
    inputs.push_back({{"key", i.key}, {"path", i.path}, {"hash", i.hash}, {"bytes", i.bytes}});
  }
  m["inputs"] = inputs;
  json outputs = json::array();
  for (const auto& a : artifacts) {
    outputs.push_back({{"name", a.name}, {"hash", hash_hex(a.content)}, {"bytes", a.content.size()}});
  }
  m["outputs"] = outputs;
  m["workers"] = ctx.workers;
  m["seed"] = ctx.seed;
  m["started_utc"] = started;
  m["wall_s"] = wall_s;
  m["metrics"] = ctx.metrics;
  return m.dump(2) + "\n";
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::int64_t workers = -1;
  std::int64_t seed = -1;
  std::map<std::string, std::string> inputs;
};

const std::vector<std::pair<std::string, std::string>>& input_flags() {
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"trips", "input.trips"},
      {"trips-format", "input.trips_format"},
      {"network", "input.network"},
      {"zones", "input.zones"},
      {"parent-zones", "input.parent_zones"},
      {"atr", "input.atr"},
      {"wim-sites", "input.wim_sites"},
      {"transit", "input.transit"},
      {"corridor", "input.corridor"},
      {"origin", "input.isochrone_origin"},
  };
  return flags;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& msg) {
  err << "trajan level=error exit=" << code << " kind=" << kind << " msg=" << std::quoted(msg) << '\n';
  return code;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::string_view data) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "input.trips", "input.trips_format", "input.network", "input.zones", "input.parent_zones",
      "input.atr", "input.wim_sites", "input.transit", "input.corridor", "input.isochrone_origin",
      "run.out_dir", "run.workers", "run.seed",
      "ingest.vmax", "ingest.max_gap_s", "ingest.exact_limit",
      "match.sigma_gps", "match.beta", "match.candidate_radius", "match.max_candidates",
      "match.route_slack_m", "match.backtrack_tolerance_m",
      "penetration.aggregate",
      "od.expansion_factor", "od.pr", "od.chord_min_flow",
      "corridor.utc_offset_hours",
      "isochrone.thresholds_min", "isochrone.eps", "isochrone.min_pts",
      "transit.buffer_m", "transit.uncovered_threshold", "transit.min_pts", "transit.max_eps",
      "transit.threshold", "transit.region_margin_m",
      "speed_grid.mode", "speed_grid.threshold_mps", "speed_grid.cell_m", "speed_grid.origin_lat",
      "speed_grid.origin_lon", "speed_grid.rows", "speed_grid.cols",
      "synth.origin_lat", "synth.origin_lon", "synth.rows", "synth.cols", "synth.spacing_m",
      "synth.start_ms", "synth.p", "synth.atr_stations", "synth.atr_hours", "synth.atr_min_count",
      "synth.atr_max_count", "synth.background_trips", "synth.route_links",
      "synth.covered_commuters", "synth.uncovered_commuters", "synth.noise_sigma_m",
      "synth.interval_ms", "synth.fleet_speed_mps", "synth.wim_relevant", "synth.wim_percent",
      "synth.wim_bystanders", "synth.utc_offset_hours", "synth.corridor_days",
      "synth.corridor_trips_per_hour", "synth.corridor_north_share", "synth.peak_hours",
      "synth.peak_slowdown", "synth.isochrone_trips", "synth.isochrone_speed_mps",
      "synth.isochrone_duration_min",
  };
  return keys;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probe-trajectory analytics pipelines", "trajan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(TRAJAN_VERSION));
  Options opt;
  for (const auto& sc : subcommands()) {
    auto* sub = app.add_subcommand(sc.name, sc.help);
    sub->add_option("-c,--config", opt.config, "Configuration file");
    sub->add_option("--set", opt.sets, "Override a config key: section.key=value (repeatable)");
    sub->add_option("-o,--out", opt.out, "Output directory");
    sub->add_option("-j,--workers", opt.workers, "Worker threads");
    sub->add_option("--seed", opt.seed, "Random seed (synth only)");
    for (const auto& [flag, key] : input_flags()) {
      sub->add_option("--" + flag, opt.inputs[key], "Sets " + key);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    return fail(err, kExitConfig, "usage", e.what());
  }

  Context ctx;
  for (const auto* sub : app.get_subcommands()) ctx.subcommand = sub->get_name();
  const auto* chosen = &*std::find_if(subcommands().begin(), subcommands().end(),
                                      [&](const Subcommand& s) { return ctx.subcommand == s.name; });
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    // Configuration: file, then --set, then dedicated flags.
    if (!opt.config.empty()) ctx.cfg = Config::load(opt.config);
    for (const auto& s : opt.sets) ctx.cfg.set_assignment(s);
    for (const auto& [key, value] : opt.inputs) {
      if (!value.empty()) ctx.cfg.set_string(key, value);
    }
    if (!opt.out.empty()) ctx.cfg.set_string("run.out_dir", opt.out);
    if (opt.workers >= 0) ctx.cfg.set("run.workers", *parse_value(std::to_string(opt.workers)));
    if (opt.seed >= 0) ctx.cfg.set("run.seed", *parse_value(std::to_string(opt.seed)));
    ctx.cfg.require_known(known_config_keys());

    const auto workers = ctx.cfg.integer("run.workers", 1);
    if (workers < 1 || workers > 1024) throw ConfigError("run.workers must lie in 1..1024");
    ctx.workers = static_cast<std::size_t>(workers);
    const auto seed = ctx.cfg.integer("run.seed", 42);
    if (seed < 0) throw ConfigError("run.seed must be non-negative");
    ctx.seed = static_cast<std::uint64_t>(seed);
    ctx.out_dir = ctx.cfg.str("run.out_dir", "");
    if (ctx.out_dir.empty()) throw ConfigError("no output directory (use --out or run.out_dir)");
    if (fs::exists(ctx.out_dir) && !fs::is_directory(ctx.out_dir)) {
      throw IoError("output path " + ctx.out_dir + " exists and is not a directory");
    }

    // Everything is computed before the first byte is written.
    auto artifacts = chosen->fn(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out_dir);
    for (const auto& a : artifacts) write_atomic(ctx.out_dir, a.name, a.content);
    write_atomic(ctx.out_dir, "manifest.json", manifest_json(ctx, artifacts, started, wall));
    err << "trajan level=info subcommand=" << ctx.subcommand << " outputs=" << artifacts.size() + 1
        << " dir=" << std::quoted(ctx.out_dir) << " wall_s=" << format_number(std::round(wall * 1000) / 1000)
        << '\n';
    return kExitOk;
  } catch (const DomainError& e) {
    return fail(err, kExitDomain, "domain", e.what());
  } catch (const ConfigError& e) {
    return fail(err, kExitConfig, "config", e.what());
  } catch (const IoError& e) {
    return fail(err, kExitConfig, "io", e.what());
  } catch (const ParseError& e) {
    return fail(err, kExitConfig, "parse", e.what());
  }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace trajan::cli

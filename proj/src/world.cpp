#include "trajan/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "trajan/geojson.hpp"
#include "trajan/ingest.hpp"

namespace trajan::synth {

namespace {

constexpr std::array<WeightClass, 3> kClasses = {WeightClass::W0_14, WeightClass::W14_26,
                                                 WeightClass::W26_plus};

std::string padded(const std::string& prefix, std::size_t i, std::size_t width = 5) {
  auto n = std::to_string(i);
  if (n.size() < width) n.insert(0, width - n.size(), '0');
  return prefix + n;
}

network::LinkId horizontal_id(const GridWorld& g, int r, int c) {
  return g.first_link_id + static_cast<network::LinkId>(r) * (g.cols - 1) + c;
}

network::LinkId vertical_id(const GridWorld& g, int r, int c) {
  return g.first_link_id + static_cast<network::LinkId>(g.rows) * (g.cols - 1) +
         static_cast<network::LinkId>(r) * g.cols + c;
}

// Random walk continuing from `first` that never enters a forbidden road.
PlantedRoute walk_from(const network::RoadNetwork& net, Rng& rng, network::LinkIndex first,
                       int n_links, const std::set<network::LinkId>& forbidden) {
  PlantedRoute route;
  route.links.push_back(first);
  auto cur = first;
  while (static_cast<int>(route.links.size()) < n_links) {
    const auto& l = net.link(cur);
    std::vector<network::LinkIndex> options;
    for (auto nx : net.outgoing(l.to)) {
      const auto& n = net.link(nx);
      if (n.to == l.from || forbidden.count(std::llabs(n.id))) continue;
      options.push_back(nx);
    }
    if (options.empty()) break;
    cur = options[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
    route.links.push_back(cur);
  }
  route.start_offset_m = net.link(route.links.front()).length_m * rng.uniform(0.1, 0.4);
  route.end_offset_m = net.link(route.links.back()).length_m * rng.uniform(0.6, 0.9);
  return route;
}

PlantedRoute row_route(const network::RoadNetwork& net, const GridWorld& g, Rng& rng, int row) {
  PlantedRoute route;
  for (int c = 1; c + 2 < g.cols; ++c) route.links.push_back(*net.find_link(horizontal_id(g, row, c)));
  route.start_offset_m = net.link(route.links.front()).length_m * rng.uniform(0.1, 0.4);
  route.end_offset_m = net.link(route.links.back()).length_m * rng.uniform(0.6, 0.9);
  return route;
}

GeoPolygon frame_box(const LocalFrame& f, double x0, double y0, double x1, double y1) {
  const auto lo = f.to_latlon({x0, y0});
  const auto hi = f.to_latlon({x1, y1});
  return GeoPolygon::box(lo.lat, lo.lon, hi.lat, hi.lon);
}

}  // namespace

void WorldSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth: " + m); };
  if (grid.rows < 6 || grid.cols < 6) fail("grid needs at least 6 rows and 6 columns");
  if (!(grid.spacing_m > 0)) fail("grid spacing must be positive");
  if (!(p > 0 && p <= 1)) fail("sampling probability p must lie in (0, 1]");
  if (atr_stations < 0 || atr_hours < 0 || background_trips < 0 || covered_commuters < 0 ||
      uncovered_commuters < 0 || wim_bystanders < 0 || corridor_days < 0 ||
      corridor_trips_per_hour < 0 || isochrone_trips < 0) {
    fail("counts must be non-negative");
  }
  const int candidates = (grid.rows - 3) * (grid.cols - 6);
  if (atr_stations > std::max(0, candidates)) fail("too many ATR stations for the grid");
  if (atr_min_count < 0 || atr_min_count > atr_max_count) fail("ATR count range is empty");
  if (route_links < 2) fail("route_links must be at least 2");
  if (!(noise_sigma_m >= 0) || interval_ms <= 0 || !(fleet_speed_mps > 0)) fail("bad fleet sampling");
  if (wim_relevant.size() != 3 || wim_percent.size() != 3) {
    fail("WIM plants need three weight classes");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (wim_relevant[i] < 0) fail("WIM relevant counts must be non-negative");
    if (!(wim_percent[i] >= 0 && wim_percent[i] <= 100)) {
      fail("WIM detour share must lie in [0, 100] percent");
    }
  }
  if (utc_offset_hours < -14 || utc_offset_hours > 14) fail("UTC offset out of range");
  if (!(corridor_north_share >= 0 && corridor_north_share <= 1)) fail("corridor share must lie in [0, 1]");
  for (int h : peak_hours) {
    if (h < 0 || h > 23) fail("peak hours must lie in 0..23");
  }
  if (!(peak_slowdown >= 1)) fail("peak slowdown must be at least 1");
  if (!(isochrone_speed_mps > 0) || !(isochrone_duration_min > 0)) fail("bad isochrone fleet");
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  Rng rng(spec.seed);
  const auto& g = spec.grid;
  const LocalFrame frame(g.origin);
  w.network = grid_features(g);
  const auto net = network::RoadNetwork::build(w.network);
  const double extent_x = (g.cols - 1) * g.spacing_m;
  const double extent_y = (g.rows - 1) * g.spacing_m;
  w.zones = tile_zones(frame.to_latlon({-500, -500}), extent_x + 1000, extent_y + 1000);
  nlohmann::json truth;
  truth["seed"] = spec.seed;
  truth["p"] = spec.p;

  // --- street-grid fleet and ATR stations -----------------------------------
  std::vector<network::LinkId> station_links;
  {
    std::vector<network::LinkId> pool;
    for (int r = 1; r + 2 < g.rows; ++r) {
      for (int c = 3; c + 3 < g.cols; ++c) pool.push_back(vertical_id(g, r, c));
    }
    for (int s = 0; s < spec.atr_stations; ++s) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(s, static_cast<std::int64_t>(pool.size()) - 1));
      std::swap(pool[static_cast<std::size_t>(s)], pool[k]);
      station_links.push_back(pool[static_cast<std::size_t>(s)]);
    }
  }
  const std::set<network::LinkId> forbidden(station_links.begin(), station_links.end());
  const std::int64_t hour0 = spec.start / 3'600'000;
  std::size_t fleet_no = 0;
  auto fleet_trip = [&](const PlantedRoute& route, TimestampMs t0) {
    TraceOptions opt;
    opt.trip_id = padded("g", fleet_no);
    opt.device_id = padded("dev-g", fleet_no);
    ++fleet_no;
    opt.weight_class = kClasses[static_cast<std::size_t>(rng.uniform_int(0, 2))];
    opt.speed_mps = spec.fleet_speed_mps * rng.uniform(0.9, 1.1);
    opt.interval_ms = spec.interval_ms;
    opt.noise_sigma_m = spec.noise_sigma_m;
    opt.t0 = t0;
    w.trips.push_back(sample_route(net, route, opt, rng).trip);
  };

  nlohmann::json stations = nlohmann::json::array();
  nlohmann::json station_hours = nlohmann::json::array();
  for (std::size_t s = 0; s < station_links.size(); ++s) {
    const std::string sid = padded("ATR", s + 1, 2);
    stations.push_back({{"station_id", sid}, {"link_id", station_links[s]}});
    for (int h = 0; h < spec.atr_hours; ++h) {
      const auto count = rng.uniform_int(spec.atr_min_count, spec.atr_max_count);
      const auto n = rng.binomial(count, spec.p);
      w.atr.push_back({sid, station_links[s], hour0 + h, count});
      station_hours.push_back({{"station_id", sid},
                               {"hour_utc", demand::format_hour_utc(hour0 + h)},
                               {"count", count},
                               {"planted_traversals", n}});
      for (std::int64_t k = 0; k < n; ++k) {
        const auto id = rng.bernoulli(0.5) ? station_links[s] : -station_links[s];
        const auto route = walk_from(net, rng, *net.find_link(id), spec.route_links, forbidden);
        fleet_trip(route, spec.start + h * 3'600'000LL + rng.uniform_int(0, 3'500'000));
      }
    }
  }
  const TimestampMs window = std::max<TimestampMs>(1, spec.atr_hours) * 3'600'000LL - 600'000;
  for (int k = 0; k < spec.background_trips; ++k) {
    network::LinkIndex first = 0;
    do {
      first = static_cast<network::LinkIndex>(
          rng.uniform_int(0, static_cast<std::int64_t>(net.links().size()) - 1));
    } while (forbidden.count(std::llabs(net.link(first).id)));
    fleet_trip(walk_from(net, rng, first, spec.route_links, forbidden),
               spec.start + rng.uniform_int(0, std::max<TimestampMs>(0, window)));
  }
  const int covered_row = 2;
  const int uncovered_row = g.rows - 2;
  for (int k = 0; k < spec.covered_commuters; ++k) {
    fleet_trip(row_route(net, g, rng, covered_row), spec.start + rng.uniform_int(0, window));
  }
  for (int k = 0; k < spec.uncovered_commuters; ++k) {
    fleet_trip(row_route(net, g, rng, uncovered_row), spec.start + rng.uniform_int(0, window));
  }
  truth["grid"] = {{"rows", g.rows},
                   {"cols", g.cols},
                   {"spacing_m", g.spacing_m},
                   {"origin", {g.origin.lat, g.origin.lon}},
                   {"fleet_trips", fleet_no}};
  truth["atr"] = {{"stations", stations}, {"station_hours", station_hours}};

  // --- transit --------------------------------------------------------------
  const int transit_col = g.cols - 3;
  w.transit.name = "synthetic";
  w.transit.routes.push_back(
      {"R1", "Route 1", {grid_node(g, covered_row, 0), grid_node(g, covered_row, g.cols - 1)}});
  w.transit.routes.push_back(
      {"R2", "Route 2", {grid_node(g, 0, transit_col), grid_node(g, g.rows - 1, transit_col)}});
  truth["transit"] = {{"covered_row", covered_row},
                      {"uncovered_row", uncovered_row},
                      {"covered_commuters", spec.covered_commuters},
                      {"uncovered_commuters", spec.uncovered_commuters}};

  // --- weigh station --------------------------------------------------------
  const auto replica = wim_replica("WIM-1", frame.to_latlon({0, -5000}));
  w.wim_site = replica.site;
  std::vector<WimPlant> plants;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto circ = planted_circumventing(spec.wim_relevant[i], spec.wim_percent[i]);
    plants.push_back({kClasses[i], spec.wim_relevant[i], circ});
    const double pct = spec.wim_relevant[i] > 0
                           ? 100.0 * static_cast<double>(circ) / static_cast<double>(spec.wim_relevant[i])
                           : 0.0;
    classes.push_back({{"weight_class", to_string(kClasses[i])},
                       {"relevant", spec.wim_relevant[i]},
                       {"circumventing", circ},
                       {"planted_percent", spec.wim_percent[i]},
                       {"circumvent_pct", enforcement::format_percent(pct)}});
  }
  auto trucks = wim_trips(replica, plants, spec.wim_bystanders, rng, "w", spec.start);
  for (auto& t : trucks) w.trips.push_back(std::move(t));
  truth["wim"] = {{"site_id", replica.site.site_id},
                  {"classes", classes},
                  {"bystanders", spec.wim_bystanders}};

  // --- corridor -------------------------------------------------------------
  const double cy = 8000;
  w.corridor_origin = frame_box(frame, 0, cy, 1000, cy + 1000);
  w.corridor_destination = frame_box(frame, 9000, cy, 10000, cy + 1000);
  w.corridors = {{"north", frame_box(frame, 1000, cy + 500, 9000, cy + 1000)},
                 {"south", frame_box(frame, 1000, cy, 9000, cy + 499)}};
  const std::vector<LatLon> north{frame.to_latlon({500, cy + 500}), frame.to_latlon({500, cy + 800}),
                                  frame.to_latlon({9500, cy + 800}), frame.to_latlon({9500, cy + 500})};
  const std::vector<LatLon> south{frame.to_latlon({500, cy + 500}), frame.to_latlon({500, cy + 200}),
                                  frame.to_latlon({9500, cy + 200}), frame.to_latlon({9500, cy + 500})};
  std::size_t corridor_no = 0;
  std::size_t north_count = 0;
  for (int d = 0; d < spec.corridor_days; ++d) {
    const bool weekday = d % 7 < 5;
    const TimestampMs midnight =
        spec.start - spec.utc_offset_hours * 3'600'000LL + d * 86'400'000LL;
    for (int h = 0; h < 24; ++h) {
      const bool peak = weekday && std::find(spec.peak_hours.begin(), spec.peak_hours.end(), h) !=
                                       spec.peak_hours.end();
      for (int k = 0; k < spec.corridor_trips_per_hour; ++k) {
        Trip t;
        t.trip_id = padded("c", corridor_no);
        t.device_id = padded("dev-c", corridor_no);
        ++corridor_no;
        t.mode = TravelMode::Vehicle;
        t.provider = Provider::Fleet;
        t.weight_class = WeightClass::W0_14;
        double speed = 20.0 * rng.uniform(0.98, 1.02);
        if (peak) speed /= spec.peak_slowdown;
        const bool go_north = rng.bernoulli(spec.corridor_north_share);
        north_count += go_north ? 1 : 0;
        t.waypoints = drive_polyline(go_north ? north : south, speed, 10'000,
                                     midnight + h * 3'600'000LL + rng.uniform_int(0, 1'800'000));
        w.trips.push_back(std::move(t));
      }
    }
  }
  truth["corridor"] = {{"utc_offset_hours", spec.utc_offset_hours},
                       {"first_local_day", "Monday"},
                       {"days", spec.corridor_days},
                       {"trips", corridor_no},
                       {"north_trips", north_count},
                       {"north_share", spec.corridor_north_share},
                       {"peak_hours", spec.peak_hours},
                       {"peak_slowdown", spec.peak_slowdown}};

  // --- isochrone ------------------------------------------------------------
  const LatLon centre = frame.to_latlon({20000, 0});
  const LocalFrame cf(centre);
  w.isochrone_origin = frame_box(cf, -200, -200, 200, 200);
  const double length = spec.isochrone_speed_mps * spec.isochrone_duration_min * 60.0;
  for (int k = 0; k < spec.isochrone_trips; ++k) {
    Trip t;
    t.trip_id = padded("i", static_cast<std::size_t>(k));
    t.device_id = padded("dev-i", static_cast<std::size_t>(k));
    t.mode = TravelMode::Vehicle;
    t.provider = Provider::Fleet;
    const LatLon start = cf.to_latlon({rng.uniform(-150, 150), rng.uniform(-150, 150)});
    const std::vector<LatLon> line{start, destination_point(start, rng.uniform(0, 360), length)};
    t.waypoints = drive_polyline(line, spec.isochrone_speed_mps, 30'000,
                                 spec.start + rng.uniform_int(0, 86'400'000));
    for (auto& wp : t.waypoints) {
      const LocalFrame local(wp.latlon());
      const auto q = local.to_latlon({rng.normal(0, 3), rng.normal(0, 3)});
      wp.lat = q.lat;
      wp.lon = q.lon;
    }
    w.trips.push_back(std::move(t));
  }
  nlohmann::json radii = nlohmann::json::object();
  for (int m : {10, 20, 30, 40}) {
    radii[std::to_string(m)] = std::min(length, spec.isochrone_speed_mps * m * 60.0);
  }
  truth["isochrone"] = {{"origin_centre", {centre.lat, centre.lon}},
                        {"speed_mps", spec.isochrone_speed_mps},
                        {"trips", spec.isochrone_trips},
                        {"expected_radius_m", radii}};

  std::size_t waypoints = 0;
  for (const auto& t : w.trips) waypoints += t.waypoints.size();
  truth["corpus"] = {{"trips", w.trips.size()}, {"waypoints", waypoints}};
  w.truth_json = truth.dump(2) + "\n";
  return w;
}

std::string corridor_geojson(const GeoPolygon& origin, const GeoPolygon& destination,
                             std::span<const demand::Corridor> corridors) {
  geojson::FeatureWriter out;
  out.add_polygon(origin, {{"role", std::string("origin")}, {"name", std::string("A")}});
  out.add_polygon(destination, {{"role", std::string("destination")}, {"name", std::string("B")}});
  for (const auto& c : corridors) {
    out.add_polygon(c.polygon, {{"role", std::string("corridor")}, {"name", c.name}});
  }
  return out.str();
}

std::string atr_csv(std::span<const demand::AtrRecord> atr) {
  std::ostringstream out;
  out << "station_id,link_id,hour_utc,count\n";
  for (const auto& r : atr) {
    out << csv_field(r.station_id) << ',' << r.link_id << ',' << demand::format_hour_utc(r.hour)
        << ',' << r.count << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::string, std::string>> world_files(const World& w) {
  std::vector<std::pair<std::string, std::string>> out;
  std::ostringstream trips;
  ingest::write_trips_csv(trips, w.trips);
  out.emplace_back("trips.csv", trips.str());
  out.emplace_back("network.geojson", network_geojson(w.network));
  out.emplace_back("zones_taz.geojson", zones_geojson(w.zones.taz, demand::ZoneLevel::TAZ));
  out.emplace_back("zones_county.geojson", zones_geojson(w.zones.county, demand::ZoneLevel::County));
  out.emplace_back("zones_state.geojson", zones_geojson(w.zones.state, demand::ZoneLevel::State));
  out.emplace_back("atr.csv", atr_csv(w.atr));
  out.emplace_back("wim_sites.geojson", enforcement::wim_sites_geojson(std::span(&w.wim_site, 1)));
  out.emplace_back("transit.geojson", transit::transit_geojson(w.transit));
  out.emplace_back("corridor.geojson",
                   corridor_geojson(w.corridor_origin, w.corridor_destination, w.corridors));
  geojson::FeatureWriter origin;
  origin.add_polygon(w.isochrone_origin, {{"name", std::string("origin")}});
  out.emplace_back("isochrone_origin.geojson", origin.str());
  out.emplace_back("truth.json", w.truth_json);
  return out;
}

}  // namespace trajan::synth

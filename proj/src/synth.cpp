#include "trajan/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajan/geojson.hpp"

namespace trajan::synth {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw DomainError("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % span);
}

double Rng::normal(double mean, double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + sigma * spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return mean + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::binomial(std::int64_t n, double p) {
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
  return k;
}

LatLon grid_node(const GridWorld& w, int row, int col) {
  const LocalFrame frame(w.origin);
  return frame.to_latlon({col * w.spacing_m, row * w.spacing_m});
}

network::NodeId grid_node_id(const GridWorld& w, int row, int col) {
  return w.first_node_id + static_cast<network::NodeId>(row) * w.cols + col;
}

std::vector<network::RoadNetwork::FeatureSpec> grid_features(const GridWorld& w) {
  if (w.rows < 1 || w.cols < 1 || !(w.spacing_m > 0)) throw DomainError("grid: bad dimensions");
  std::vector<network::RoadNetwork::FeatureSpec> out;
  network::LinkId next = w.first_link_id;
  auto add = [&](int r0, int c0, int r1, int c1) {
    network::RoadNetwork::FeatureSpec f;
    f.link_id = next++;
    f.from_node = grid_node_id(w, r0, c0);
    f.to_node = grid_node_id(w, r1, c1);
    f.oneway = !w.two_way;
    f.geometry = {grid_node(w, r0, c0), grid_node(w, r1, c1)};
    out.push_back(std::move(f));
  };
  for (int r = 0; r < w.rows; ++r) {
    for (int c = 0; c + 1 < w.cols; ++c) add(r, c, r, c + 1);
  }
  for (int r = 0; r + 1 < w.rows; ++r) {
    for (int c = 0; c < w.cols; ++c) add(r, c, r + 1, c);
  }
  return out;
}

network::RoadNetwork grid_network(const GridWorld& w) {
  return network::RoadNetwork::build(grid_features(w));
}

std::string network_geojson(std::span<const network::RoadNetwork::FeatureSpec> features) {
  geojson::FeatureWriter out;
  for (const auto& f : features) {
    out.add_line(f.geometry, {{"link_id", f.link_id},
                              {"from_node", f.from_node},
                              {"to_node", f.to_node},
                              {"oneway", f.oneway}});
  }
  return out.str();
}

PlantedRoute random_walk_route(const network::RoadNetwork& net, Rng& rng, int n_links) {
  if (n_links < 1) throw DomainError("random_walk_route: n_links must be positive");
  if (net.links().empty()) throw DomainError("random_walk_route: empty network");
  PlantedRoute route;
  auto cur = static_cast<network::LinkIndex>(
      rng.uniform_int(0, static_cast<std::int64_t>(net.links().size()) - 1));
  route.links.push_back(cur);
  while (static_cast<int>(route.links.size()) < n_links) {
    const auto& l = net.link(cur);
    std::vector<network::LinkIndex> options;
    for (auto nx : net.outgoing(l.to)) {
      if (net.link(nx).to != l.from) options.push_back(nx);
    }
    if (options.empty()) {
      for (auto nx : net.outgoing(l.to)) options.push_back(nx);
    }
    if (options.empty()) break;
    cur = options[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
    route.links.push_back(cur);
  }
  const double first_len = net.link(route.links.front()).length_m;
  const double last_len = net.link(route.links.back()).length_m;
  route.start_offset_m = first_len * rng.uniform(0.1, 0.4);
  route.end_offset_m = last_len * rng.uniform(0.6, 0.9);
  return route;
}

SampledTrace sample_route(const network::RoadNetwork& net, const PlantedRoute& route,
                          const TraceOptions& opt, Rng& rng) {
  if (route.links.empty()) throw DomainError("sample_route: empty route");
  if (!(opt.speed_mps > 0) || opt.interval_ms <= 0) {
    throw DomainError("sample_route: speed and interval must be positive");
  }
  struct Piece {
    network::LinkIndex link;
    double from;
    double to;
  };
  std::vector<Piece> pieces;
  double total = 0.0;
  for (std::size_t i = 0; i < route.links.size(); ++i) {
    const auto li = route.links[i];
    const double len = net.link(li).length_m;
    const double a = i == 0 ? route.start_offset_m : 0.0;
    const double b = i + 1 == route.links.size() ? route.end_offset_m : len;
    pieces.push_back({li, a, std::max(a, b)});
    total += std::max(0.0, b - a);
  }

  SampledTrace out;
  out.trip.trip_id = opt.trip_id;
  out.trip.device_id = opt.device_id;
  out.trip.mode = TravelMode::Vehicle;
  out.trip.weight_class = opt.weight_class;
  out.trip.provider = opt.provider;
  for (const auto& p : pieces) out.truth.push_back(net.link(p.link).id);

  const double step = opt.speed_mps * static_cast<double>(opt.interval_ms) / 1000.0;
  std::size_t piece = 0;
  double piece_start = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double d = std::min(total, step * static_cast<double>(k));
    while (piece + 1 < pieces.size() &&
           d > piece_start + (pieces[piece].to - pieces[piece].from)) {
      piece_start += pieces[piece].to - pieces[piece].from;
      ++piece;
    }
    const auto& pc = pieces[piece];
    const double off = std::min(pc.to, pc.from + (d - piece_start));
    LatLon pos = net.point_at(pc.link, off);
    if (opt.noise_sigma_m > 0) {
      const LocalFrame frame(pos);
      pos = frame.to_latlon({rng.normal(0.0, opt.noise_sigma_m), rng.normal(0.0, opt.noise_sigma_m)});
    }
    const TimestampMs t =
        opt.t0 + static_cast<TimestampMs>(std::llround(d / opt.speed_mps * 1000.0));
    if (!out.trip.waypoints.empty() && t <= out.trip.waypoints.back().t) break;
    out.trip.waypoints.push_back({pos.lat, pos.lon, t});
    if (d >= total) break;
  }
  return out;
}

std::vector<Waypoint> drive_polyline(std::span<const LatLon> line, double speed_mps,
                                     TimestampMs interval_ms, TimestampMs t0) {
  if (line.size() < 2) throw DomainError("drive_polyline: need at least two vertices");
  if (!(speed_mps > 0) || interval_ms <= 0) {
    throw DomainError("drive_polyline: speed and interval must be positive");
  }
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < line.size(); ++i) {
    cum.push_back(cum.back() + haversine(line[i - 1], line[i]));
  }
  const double total = cum.back();
  const double step = speed_mps * static_cast<double>(interval_ms) / 1000.0;
  std::vector<Waypoint> out;
  std::size_t seg = 0;
  for (std::int64_t k = 0;; ++k) {
    const double d = std::min(total, step * static_cast<double>(k));
    while (seg + 2 < line.size() && d > cum[seg + 1]) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0 ? std::clamp((d - cum[seg]) / len, 0.0, 1.0) : 0.0;
    const LatLon p{line[seg].lat + f * (line[seg + 1].lat - line[seg].lat),
                   line[seg].lon + f * (line[seg + 1].lon - line[seg].lon)};
    const TimestampMs t = t0 + static_cast<TimestampMs>(std::llround(d / speed_mps * 1000.0));
    if (!out.empty() && t <= out.back().t) break;
    out.push_back({p.lat, p.lon, t});
    if (d >= total) break;
  }
  return out;
}

ZoneTiling tile_zones(LatLon south_west, double width_m, double height_m) {
  if (!(width_m > 0) || !(height_m > 0)) throw DomainError("tile_zones: bad extent");
  const LocalFrame frame(south_west);
  std::array<double, 5> lat{}, lon{};
  for (int k = 0; k <= 4; ++k) {
    lat[k] = frame.to_latlon({0, height_m * k / 4}).lat;
    lon[k] = frame.to_latlon({width_m * k / 4, 0}).lon;
  }
  auto cell = [&](int r0, int c0, int r1, int c1) {
    return GeoPolygon::box(lat[r0], lon[c0], lat[r1], lon[c1]);
  };
  ZoneTiling t;
  t.state.push_back({"S1", "West", "", cell(0, 0, 4, 2)});
  t.state.push_back({"S2", "East", "", cell(0, 2, 4, 4)});
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const std::string id = "C" + std::to_string(r * 2 + c + 1);
      t.county.push_back({id, "County " + id, c == 0 ? "S1" : "S2", cell(2 * r, 2 * c, 2 * r + 2, 2 * c + 2)});
    }
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const int n = r * 4 + c + 1;
      const std::string id = std::string(n < 10 ? "T0" : "T") + std::to_string(n);
      const std::string parent = "C" + std::to_string((r / 2) * 2 + c / 2 + 1);
      t.taz.push_back({id, "Zone " + id, parent, cell(r, c, r + 1, c + 1)});
    }
  }
  return t;
}

std::string zones_geojson(std::span<const demand::Zone> zones, demand::ZoneLevel level) {
  geojson::FeatureWriter out;
  for (const auto& z : zones) {
    geojson::Properties props{{"zone_id", z.id},
                              {"name", z.name},
                              {"level", std::string(demand::to_string(level))}};
    if (!z.parent.empty()) props["parent"] = z.parent;
    out.add_polygon(z.polygon, std::move(props));
  }
  return out.str();
}

WimReplica wim_replica(const std::string& site_id, LatLon west_end) {
  const LocalFrame f(west_end);
  auto at = [&](double x, double y) { return f.to_latlon({x, y}); };
  auto box = [&](double x0, double y0, double x1, double y1) {
    const auto lo = at(x0, y0);
    const auto hi = at(x1, y1);
    return GeoPolygon::box(lo.lat, lo.lon, hi.lat, hi.lon);
  };
  WimReplica r;
  r.site.site_id = site_id;
  r.site.station = at(1500, 0);
  r.site.corridor = box(-100, -60, 3100, 60);
  r.site.gate_up = box(200, -50, 500, 50);
  r.site.buffer = box(1300, -50, 1700, 50);
  r.site.gate_down = box(2500, -50, 2800, 50);
  r.main_line = {at(0, 0), at(3000, 0)};
  r.detour_line = {at(0, 0), at(800, 0), at(800, 600), at(2200, 600), at(2200, 0), at(3000, 0)};
  r.partial_line = {at(0, 0), at(800, 0), at(800, -900)};
  return r;
}

std::int64_t planted_circumventing(std::int64_t relevant, double pct) {
  if (relevant < 0 || !(pct >= 0 && pct <= 100)) {
    throw ConfigError("planted detour share must lie in [0, 100] percent");
  }
  return std::llround(pct * static_cast<double>(relevant) / 100.0);
}

std::vector<Trip> wim_trips(const WimReplica& r, std::span<const WimPlant> plants,
                            std::int64_t bystanders, Rng& rng, const std::string& id_prefix,
                            TimestampMs t0) {
  struct Job {
    WeightClass wc;
    const std::vector<LatLon>* line;
  };
  std::vector<Job> jobs;
  for (const auto& p : plants) {
    if (p.circumventing < 0 || p.circumventing > p.relevant) {
      throw ConfigError("planted detours exceed relevant trips");
    }
    std::vector<bool> detour(static_cast<std::size_t>(p.relevant), false);
    std::fill_n(detour.begin(), p.circumventing, true);
    for (std::size_t i = detour.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      const bool tmp = detour[i - 1];
      detour[i - 1] = detour[j];
      detour[j] = tmp;
    }
    for (bool d : detour) jobs.push_back({p.weight_class, d ? &r.detour_line : &r.main_line});
  }
  for (std::int64_t i = 0; i < bystanders; ++i) {
    const auto wc = kAllWeightClasses[static_cast<std::size_t>(rng.uniform_int(0, 2))];
    jobs.push_back({wc, &r.partial_line});
  }
  const int width = std::max<int>(1, static_cast<int>(std::to_string(jobs.size()).size()));
  std::vector<Trip> out;
  out.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Trip t;
    auto num = std::to_string(i);
    t.trip_id = id_prefix + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    t.device_id = "wim-" + num;
    t.mode = TravelMode::Vehicle;
    t.provider = Provider::Fleet;
    t.weight_class = jobs[i].wc;
    const double speed = rng.uniform(18.0, 24.0);
    const auto start = t0 + static_cast<TimestampMs>(i) * 20'000 + rng.uniform_int(0, 4999);
    t.waypoints = drive_polyline(*jobs[i].line, speed, 5000, start);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace trajan::synth

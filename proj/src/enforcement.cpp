#include "trajan/enforcement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <thread>

#include "trajan/geojson.hpp"

namespace trajan::enforcement {

namespace {

struct Segment {
  LatLon mid;
  double speed = 0.0;
  int octant = 0;
};

std::optional<Segment> segment_of(const Waypoint& a, const Waypoint& b) {
  if (b.t <= a.t) return std::nullopt;
  Segment s;
  s.mid = {(a.lat + b.lat) / 2, (a.lon + b.lon) / 2};
  s.speed = segment_speed(a, b);
  s.octant = bearing_octant(initial_bearing(a.latlon(), b.latlon()));
  return s;
}

std::size_t cell_offset(GridCell c, const GridSpec& g) {
  return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(g.cols) +
         static_cast<std::size_t>(c.col);
}

// Runs fn(lo, hi, part) over contiguous chunks and returns the parts in
// chunk order.
template <typename Part, typename Fn>
std::vector<Part> chunked(std::size_t n, std::size_t workers, const Part& proto, Fn fn) {
  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(1, n / 500));
  std::vector<Part> parts(n_threads, proto);
  if (n_threads == 1) {
    fn(0, n, parts[0]);
    return parts;
  }
  const std::size_t chunk = (n + n_threads - 1) / n_threads;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_threads; ++w) {
    const std::size_t lo = std::min(n, w * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&, w, lo, hi] { fn(lo, hi, parts[w]); });
  }
  for (auto& t : pool) t.join();
  return parts;
}

const char* kRoles[] = {"station", "corridor", "gate_up", "gate_down", "buffer"};

}  // namespace

std::string_view to_string(ThresholdMode m) noexcept {
  return m == ThresholdMode::Absolute ? "absolute" : "cell-mean";
}

ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "absolute") return ThresholdMode::Absolute;
  if (s == "cell-mean") return ThresholdMode::AboveCellMean;
  throw ConfigError("unknown speed threshold mode '" + std::string(s) + "'");
}

void SpeedThreshold::validate() const {
  if (mode == ThresholdMode::Absolute && !(speed_mps >= 0 && std::isfinite(speed_mps))) {
    throw DomainError("speed threshold must be a non-negative finite speed");
  }
}

int bearing_octant(double bearing_deg) noexcept {
  const int o = static_cast<int>(std::floor((bearing_deg + 22.5) / 45.0)) % 8;
  return o < 0 ? o + 8 : o;
}

const SpeedCell& SpeedGrid::at(GridCell c) const { return cells.at(cell_offset(c, grid)); }

std::int64_t SpeedGrid::total() const {
  std::int64_t s = 0;
  for (const auto& c : cells) s += c.total;
  return s;
}

std::vector<GridCell> SpeedGrid::top_cells(std::size_t k, std::int64_t min_total) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].total >= std::max<std::int64_t>(1, min_total)) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    // Cross-multiplied so equal ratios compare equal.
    return cells[a].high * cells[b].total > cells[b].high * cells[a].total;
  });
  if (idx.size() > k) idx.resize(k);
  std::vector<GridCell> out;
  for (auto i : idx) {
    out.push_back({static_cast<int>(i / static_cast<std::size_t>(grid.cols)),
                   static_cast<int>(i % static_cast<std::size_t>(grid.cols))});
  }
  return out;
}

SpeedGrid speed_grid(std::span<const Trip> trips, const GridSpec& g, const SpeedThreshold& th,
                     std::size_t workers) {
  g.validate();
  th.validate();
  if (workers == 0) throw DomainError("worker count must be positive");
  SpeedGrid proto;
  proto.grid = g;
  proto.threshold = th;
  proto.cells.resize(static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols));

  auto parts = chunked(trips.size(), workers, proto,
                       [&](std::size_t lo, std::size_t hi, SpeedGrid& part) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& w = trips[i].waypoints;
      for (std::size_t k = 1; k < w.size(); ++k) {
        ++part.segments;
        const auto seg = segment_of(w[k - 1], w[k]);
        if (!seg) {
          ++part.skipped;
          continue;
        }
        const auto cell = grid_index(seg->mid, g);
        if (!cell) {
          ++part.out_of_grid;
          continue;
        }
        auto& c = part.cells[cell_offset(*cell, g)];
        ++c.total;
        ++c.octant[static_cast<std::size_t>(seg->octant)];
        c.speed_sum_um += std::llround(seg->speed * 1e6);
        if (th.mode == ThresholdMode::Absolute && seg->speed > th.speed_mps) ++c.high;
      }
    }
  });

  SpeedGrid out = std::move(parts[0]);
  for (std::size_t p = 1; p < parts.size(); ++p) {
    out.segments += parts[p].segments;
    out.skipped += parts[p].skipped;
    out.out_of_grid += parts[p].out_of_grid;
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
      auto& a = out.cells[i];
      const auto& b = parts[p].cells[i];
      a.total += b.total;
      a.high += b.high;
      a.speed_sum_um += b.speed_sum_um;
      for (std::size_t o = 0; o < 8; ++o) a.octant[o] += b.octant[o];
    }
  }
  if (th.mode == ThresholdMode::Absolute) return out;

  // Second pass against each cell's own mean.
  std::vector<double> means(out.cells.size());
  for (std::size_t i = 0; i < out.cells.size(); ++i) means[i] = out.cells[i].mean_speed();
  auto highs = chunked(trips.size(), workers, std::vector<std::int64_t>(out.cells.size(), 0),
                       [&](std::size_t lo, std::size_t hi, std::vector<std::int64_t>& part) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& w = trips[i].waypoints;
      for (std::size_t k = 1; k < w.size(); ++k) {
        const auto seg = segment_of(w[k - 1], w[k]);
        if (!seg) continue;
        const auto cell = grid_index(seg->mid, g);
        if (!cell) continue;
        const auto off = cell_offset(*cell, g);
        if (seg->speed > means[off]) ++part[off];
      }
    }
  });
  for (const auto& h : highs) {
    for (std::size_t i = 0; i < h.size(); ++i) out.cells[i].high += h[i];
  }
  return out;
}

void write_speed_grid_csv(std::ostream& out, const SpeedGrid& grid) {
  out << "row,col,total,high,mean_speed_mps";
  for (int o = 0; o < 8; ++o) out << ",octant_" << o;
  out << '\n';
  for (int r = 0; r < grid.grid.rows; ++r) {
    for (int c = 0; c < grid.grid.cols; ++c) {
      const auto& cell = grid.at({r, c});
      out << r << ',' << c << ',' << cell.total << ',' << cell.high << ','
          << format_number(cell.mean_speed());
      for (auto n : cell.octant) out << ',' << n;
      out << '\n';
    }
  }
}

std::string speed_grid_geojson(const SpeedGrid& grid) {
  geojson::FeatureWriter w;
  for (int r = 0; r < grid.grid.rows; ++r) {
    for (int c = 0; c < grid.grid.cols; ++c) {
      const auto& cell = grid.at({r, c});
      if (cell.total == 0) continue;
      w.add_polygon(GeoPolygon(grid_cell_ring({r, c}, grid.grid)),
                    {{"row", std::int64_t{r}},
                     {"col", std::int64_t{c}},
                     {"total", cell.total},
                     {"high", cell.high},
                     {"high_ratio", cell.high_ratio()},
                     {"mean_speed_mps", cell.mean_speed()}});
    }
  }
  return w.str();
}

// --- WIM -------------------------------------------------------------------

void WimSite::validate() const {
  if (corridor.empty() || gate_up.empty() || gate_down.empty() || buffer.empty()) {
    throw DomainError("WIM site " + site_id + " is missing geometry");
  }
  if (polygons_intersect(gate_up, buffer) || polygons_intersect(gate_down, buffer)) {
    throw DomainError("WIM site " + site_id + ": gates must be disjoint from the station buffer");
  }
  if (!polygons_intersect(gate_up, corridor) || !polygons_intersect(gate_down, corridor)) {
    throw DomainError("WIM site " + site_id + ": both gates must intersect the main-route corridor");
  }
}

std::vector<WimSite> parse_wim_sites(const std::string& text) {
  const auto features = geojson::parse_features(text, "WIM sites");
  std::map<std::string, WimSite> sites;
  std::map<std::string, std::array<bool, 5>> seen;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const auto where = "WIM sites feature " + std::to_string(i);
    const auto id = f.text("site_id");
    const auto role = f.text("role");
    if (!id || id->empty()) throw ParseError(where + ": missing site_id");
    if (!role) throw ParseError(where + ": missing role");
    const auto r = std::find(std::begin(kRoles), std::end(kRoles), *role) - std::begin(kRoles);
    if (r == 5) throw ParseError(where + ": unknown role '" + *role + "'");
    auto& site = sites[*id];
    site.site_id = *id;
    if (seen[*id][static_cast<std::size_t>(r)]) {
      throw ParseError(where + ": duplicate " + *role + " for site " + *id);
    }
    seen[*id][static_cast<std::size_t>(r)] = true;
    if (r == 0) {
      if (f.type != geojson::GeometryType::Point) throw ParseError(where + ": station must be a Point");
      site.station = f.coords.front();
      continue;
    }
    const auto poly = f.polygon();
    switch (r) {
      case 1: site.corridor = poly; break;
      case 2: site.gate_up = poly; break;
      case 3: site.gate_down = poly; break;
      default: site.buffer = poly; break;
    }
  }
  std::vector<WimSite> out;
  for (auto& [id, site] : sites) {
    for (std::size_t r = 0; r < 5; ++r) {
      if (!seen[id][r]) throw ParseError("WIM site " + id + " has no " + kRoles[r]);
    }
    out.push_back(std::move(site));
  }
  return out;
}

std::vector<WimSite> load_wim_sites(const std::string& path) {
  return parse_wim_sites(geojson::read_text_file(path));
}

std::string wim_sites_geojson(std::span<const WimSite> sites) {
  geojson::FeatureWriter w;
  for (const auto& s : sites) {
    auto props = [&](const char* role) {
      return geojson::Properties{{"site_id", s.site_id}, {"role", std::string(role)}};
    };
    w.add_point(s.station, props("station"));
    w.add_polygon(s.corridor, props("corridor"));
    w.add_polygon(s.gate_up, props("gate_up"));
    w.add_polygon(s.gate_down, props("gate_down"));
    w.add_polygon(s.buffer, props("buffer"));
  }
  return w.str();
}

std::optional<WimPassage> classify_passage(const Trip& trip, const WimSite& site) {
  const auto& w = trip.waypoints;
  std::optional<std::size_t> last_up;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto p = w[i].latlon();
    if (point_in_polygon(p, site.gate_up)) {
      last_up = i;
      continue;
    }
    if (!last_up || !point_in_polygon(p, site.gate_down)) continue;
    WimPassage out;
    out.trip_id = trip.trip_id;
    out.weight_class = trip.weight_class;
    out.gate_to_gate_s = static_cast<double>(w[i].t - w[*last_up].t) / 1000.0;
    out.passage = Passage::Circumventing;
    for (std::size_t k = *last_up + 1; k < i; ++k) {
      if (point_in_polygon(w[k].latlon(), site.buffer)) {
        out.passage = Passage::Compliant;
        break;
      }
    }
    return out;
  }
  return std::nullopt;
}

double EvasionRow::percentage() const {
  return relevant > 0 ? 100.0 * static_cast<double>(circumventing) / static_cast<double>(relevant)
                      : 0.0;
}

const EvasionRow& EvasionReport::row(WeightClass w) const {
  for (const auto& r : rows) {
    if (r.weight_class == w) return r;
  }
  throw DomainError("no row for weight class " + std::string(to_string(w)));
}

EvasionReport detect_wim_evasion(std::span<const Trip> trips, const WimSite& site) {
  site.validate();
  EvasionReport rep;
  rep.site_id = site.site_id;
  for (auto wc : kAllWeightClasses) rep.rows.push_back({wc, 0, 0});
  for (const auto& t : trips) {
    auto p = classify_passage(t, site);
    if (!p) continue;
    for (auto& r : rep.rows) {
      if (r.weight_class != p->weight_class) continue;
      ++r.relevant;
      if (p->passage == Passage::Circumventing) ++r.circumventing;
    }
    rep.passages.push_back(std::move(*p));
  }
  std::sort(rep.passages.begin(), rep.passages.end(), [](const WimPassage& a, const WimPassage& b) {
    if (a.trip_id != b.trip_id) return a.trip_id < b.trip_id;
    return a.gate_to_gate_s < b.gate_to_gate_s;
  });
  return rep;
}

std::string format_percent(double pct) {
  const double r = std::round(pct * 100.0) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

void write_evasion_csv(std::ostream& out, std::span<const EvasionReport> reports) {
  out << "site_id,weight_class,relevant,circumventing,circumvent_pct\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      if (r.weight_class == WeightClass::Unknown && r.relevant == 0) continue;
      out << csv_field(rep.site_id) << ',' << to_string(r.weight_class) << ',' << r.relevant << ','
          << r.circumventing << ',' << format_percent(r.percentage()) << '\n';
    }
  }
}

DetourCost detour_cost(const EvasionReport& report) {
  DetourCost out;
  std::vector<double> compliant;
  std::vector<double> detours;
  for (const auto& p : report.passages) {
    (p.passage == Passage::Compliant ? compliant : detours).push_back(p.gate_to_gate_s);
  }
  out.circumventing = detours.size();
  if (compliant.empty()) {
    out.diagnostic = "no compliant passages; main-route median undefined";
    return out;
  }
  out.compliant_median_s = lower_median(compliant);
  if (detours.empty()) {
    out.diagnostic = "no circumventing passages";
    return out;
  }
  for (double d : detours) {
    if (d > *out.compliant_median_s) ++out.slower;
  }
  out.fraction = static_cast<double>(out.slower) / static_cast<double>(detours.size());
  return out;
}

}  // namespace trajan::enforcement

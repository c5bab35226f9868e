#include "trajan/demand.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "trajan/geojson.hpp"

namespace trajan::demand {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(ZoneLevel l) noexcept {
  switch (l) {
    case ZoneLevel::TAZ: return "taz";
    case ZoneLevel::Zip: return "zip";
    case ZoneLevel::County: return "county";
    case ZoneLevel::State: return "state";
  }
  return "taz";
}

ZoneLevel parse_zone_level(std::string_view s) {
  const auto l = lower(s);
  if (l == "taz") return ZoneLevel::TAZ;
  if (l == "zip") return ZoneLevel::Zip;
  if (l == "county") return ZoneLevel::County;
  if (l == "state") return ZoneLevel::State;
  throw ParseError("unknown zone level '" + std::string(s) + "'");
}

ZoneSystem::ZoneSystem(ZoneLevel level, std::vector<Zone> zones)
    : level_(level), zones_(std::move(zones)) {
  std::sort(zones_.begin(), zones_.end(), [](const Zone& a, const Zone& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < zones_.size(); ++i) {
    if (zones_[i].id.empty()) throw DomainError("zone with empty id");
    if (i > 0 && zones_[i].id == zones_[i - 1].id) {
      throw DomainError("duplicate zone id '" + zones_[i].id + "'");
    }
    if (zones_[i].polygon.empty()) throw DomainError("zone '" + zones_[i].id + "' has no polygon");
  }
}

std::optional<std::size_t> ZoneSystem::locate(LatLon p) const {
  for (std::size_t i = 0; i < zones_.size(); ++i) {
    if (point_in_polygon(p, zones_[i].polygon)) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ZoneSystem::index_of(const std::string& id) const {
  auto it = std::lower_bound(zones_.begin(), zones_.end(), id,
                             [](const Zone& z, const std::string& v) { return z.id < v; });
  if (it == zones_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - zones_.begin());
}

ZoneSystem parse_zones(const std::string& text) {
  const auto features = geojson::parse_features(text, "zones");
  std::vector<Zone> zones;
  std::optional<ZoneLevel> level;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const std::string where = "zones feature " + std::to_string(i) + ": ";
    const auto id = f.text("zone_id");
    if (!id || id->empty()) throw ParseError(where + "missing zone_id");
    const auto lv_text = f.text("level");
    if (!lv_text) throw ParseError(where + "missing level");
    ZoneLevel lv;
    try {
      lv = parse_zone_level(*lv_text);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (level && *level != lv) throw ParseError(where + "mixed zone levels in one file");
    level = lv;
    Zone z;
    z.id = *id;
    z.name = f.text("name").value_or(*id);
    z.parent = f.text("parent").value_or("");
    try {
      z.polygon = f.polygon();
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    zones.push_back(std::move(z));
  }
  if (!level) throw ParseError("zones: no features");
  try {
    return ZoneSystem(*level, std::move(zones));
  } catch (const DomainError& e) {
    throw ParseError(std::string("zones: ") + e.what());
  }
}

ZoneSystem load_zones(const std::string& path) {
  return parse_zones(geojson::read_text_file(path));
}

std::int64_t ODMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& [k, v] : counts) t += v;
  return t;
}

std::int64_t ODMatrix::count(const std::string& o, const std::string& d) const {
  auto it = counts.find({o, d});
  return it == counts.end() ? 0 : it->second;
}

double ODMatrix::expanded(const std::string& o, const std::string& d) const {
  return static_cast<double>(count(o, d)) * factor.value_or(1.0);
}

std::map<std::string, std::int64_t> ODMatrix::row_sums() const {
  std::map<std::string, std::int64_t> out;
  for (const auto& [k, v] : counts) out[k.first] += v;
  return out;
}

void ODMatrix::merge(const ODMatrix& other) {
  for (const auto& [k, v] : other.counts) counts[k] += v;
  unassigned += other.unassigned;
}

ODMatrix build_od_matrix(std::span<const Trip> trips, const ZoneSystem& zones,
                         std::size_t workers) {
  if (workers == 0) throw DomainError("worker count must be positive");
  ODMatrix base;
  for (const auto& z : zones.zones()) base.zone_ids.push_back(z.id);
  auto fill = [&](std::size_t lo, std::size_t hi, ODMatrix& m) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& t = trips[i];
      if (t.waypoints.empty()) {
        ++m.unassigned;
        continue;
      }
      const auto o = zones.locate(t.waypoints.front().latlon());
      const auto d = o ? zones.locate(t.waypoints.back().latlon()) : std::nullopt;
      if (!o || !d) {
        ++m.unassigned;
        continue;
      }
      ++m.counts[{zones.zones()[*o].id, zones.zones()[*d].id}];
    }
  };
  const std::size_t n_threads = std::min(workers, std::max<std::size_t>(1, trips.size() / 1000));
  if (n_threads <= 1) {
    fill(0, trips.size(), base);
    return base;
  }
  std::vector<ODMatrix> parts(n_threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (trips.size() + n_threads - 1) / n_threads;
  for (std::size_t w = 0; w < n_threads; ++w) {
    const std::size_t lo = std::min(trips.size(), w * chunk);
    const std::size_t hi = std::min(trips.size(), lo + chunk);
    pool.emplace_back([&, w, lo, hi] { fill(lo, hi, parts[w]); });
  }
  for (auto& t : pool) t.join();
  for (const auto& p : parts) base.merge(p);
  return base;
}

std::map<std::string, std::string> parent_map(const ZoneSystem& zones) {
  std::map<std::string, std::string> out;
  for (const auto& z : zones.zones()) {
    if (!z.parent.empty()) out[z.id] = z.parent;
  }
  return out;
}

ODMatrix aggregate_matrix(const ODMatrix& m, const std::map<std::string, std::string>& parent_of,
                          const std::vector<std::string>& parent_ids) {
  ODMatrix out;
  out.zone_ids = parent_ids;
  out.unassigned = m.unassigned;
  out.factor = m.factor;
  const std::set<std::string> known(parent_ids.begin(), parent_ids.end());
  auto up = [&](const std::string& z) {
    auto it = parent_of.find(z);
    if (it == parent_of.end()) throw DomainError("zone '" + z + "' has no parent");
    if (!known.count(it->second)) {
      throw DomainError("parent '" + it->second + "' of zone '" + z + "' is not a known zone");
    }
    return it->second;
  };
  for (const auto& [k, v] : m.counts) out.counts[{up(k.first), up(k.second)}] += v;
  return out;
}

ODMatrix expand_matrix(const ODMatrix& m, double factor) {
  if (!(factor > 0) || !std::isfinite(factor)) throw DomainError("expansion factor must be positive");
  ODMatrix out = m;
  out.factor = factor;
  return out;
}

std::int64_t expansion_factor_from_pr(double pr) {
  if (!(pr > 0) || !std::isfinite(pr)) throw DomainError("penetration rate must be positive");
  return std::llround(1.0 / pr);
}

void write_od_csv(std::ostream& out, const ODMatrix& m) {
  out << "origin_zone,dest_zone,count,expanded_count\n";
  for (const auto& [k, v] : m.counts) {
    if (v == 0) continue;
    out << csv_field(k.first) << ',' << csv_field(k.second) << ',' << v << ','
        << format_number(m.expanded(k.first, k.second)) << '\n';
  }
}

void write_chord_table(std::ostream& out, const ODMatrix& m, std::int64_t min_flow) {
  out << "rank\torigin_zone\tdest_zone\tcount\texpanded_count\n";
  std::set<std::string> active;
  for (const auto& [k, v] : m.counts) {
    if (v == 0) continue;
    active.insert(k.first);
    active.insert(k.second);
  }
  struct Row {
    std::string o, d;
    std::int64_t n;
  };
  std::vector<Row> rows;
  for (const auto& o : active) {
    for (const auto& d : active) rows.push_back({o, d, m.count(o, d)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.n > b.n; });
  const double f = m.factor.value_or(1.0);
  std::int64_t other = 0;
  bool any_other = false;
  std::size_t rank = 0;
  for (const auto& r : rows) {
    if (r.n < min_flow) {
      other += r.n;
      any_other = true;
      continue;
    }
    out << ++rank << '\t' << r.o << '\t' << r.d << '\t' << r.n << '\t'
        << format_number(static_cast<double>(r.n) * f) << '\n';
  }
  if (any_other) {
    out << ++rank << "\tOTHER\tOTHER\t" << other << '\t' << format_number(static_cast<double>(other) * f) << '\n';
  }
}

// --- penetration -----------------------------------------------------------

std::int64_t parse_hour_utc(std::string_view s) {
  auto bad = [&] { return ParseError("bad hour_utc '" + std::string(s) + "'"); };
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() == 19 && s.substr(13) == ":00:00") s = s.substr(0, 13);
  if (s.size() == 16 && s.substr(13) == ":00") s = s.substr(0, 13);
  if (s.size() != 13 || s[4] != '-' || s[7] != '-' || s[10] != 'T') throw bad();
  int y = 0;
  unsigned mo = 0, d = 0, h = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), h) || h > 23) {
    throw bad();
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 24 + h;
}

std::string format_hour_utc(std::int64_t hour) {
  const std::int64_t days = floor_div(hour, 24);
  const auto h = hour - days * 24;
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(h));
  return buf;
}

std::vector<AtrRecord> parse_atr_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&] {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw ParseError("atr: empty file");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "station_id,link_id,hour_utc,count") {
    throw ParseError("atr: expected header station_id,link_id,hour_utc,count");
  }
  std::vector<AtrRecord> out;
  std::set<std::pair<std::string, std::int64_t>> seen;
  while (next_line()) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = "atr line " + std::to_string(line_no) + ": ";
    if (f.size() != 4) throw ParseError(where + "expected 4 fields");
    AtrRecord r;
    r.station_id = f[0];
    if (r.station_id.empty()) throw ParseError(where + "empty station_id");
    if (!parse_int(f[1], r.link_id) || r.link_id == 0) throw ParseError(where + "bad link_id");
    try {
      r.hour = parse_hour_utc(f[2]);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (!parse_int(f[3], r.count) || r.count < 0) throw ParseError(where + "bad count");
    if (!seen.insert({r.station_id, r.hour}).second) {
      throw ParseError(where + "duplicate record for station " + r.station_id + " hour " + f[2]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AtrRecord> load_atr(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_atr_csv(in);
}

PrAggregate parse_pr_aggregate(std::string_view s) {
  if (s == "median") return PrAggregate::Median;
  if (s == "mean") return PrAggregate::Mean;
  throw ConfigError("unknown PR aggregate '" + std::string(s) + "' (expected median or mean)");
}

PenetrationEstimate estimate_penetration(std::span<const mapmatch::MatchedTrip> matched,
                                         std::span<const AtrRecord> atr,
                                         const network::RoadNetwork& net) {
  // Station metadata and record slots.
  std::map<std::string, StationEstimate> stations;
  std::map<std::pair<std::string, std::int64_t>, StationHour*> slot;
  std::unordered_map<network::LinkId, std::vector<std::string>> by_road;
  for (const auto& r : atr) {
    if (!net.find_link(r.link_id) && !net.find_link(-r.link_id)) {
      throw ConfigError("ATR station " + r.station_id + " link " + std::to_string(r.link_id) +
                        " is not in the network");
    }
    auto& st = stations[r.station_id];
    if (st.station_id.empty()) {
      st.station_id = r.station_id;
      st.link_id = r.link_id;
      by_road[std::abs(r.link_id)].push_back(r.station_id);
    } else if (st.link_id != r.link_id) {
      throw ConfigError("ATR station " + r.station_id + " is listed on more than one link");
    }
    st.hours.push_back({r.hour, 0, r.count, std::nullopt, false});
  }
  for (auto& [id, st] : stations) {
    std::sort(st.hours.begin(), st.hours.end(),
              [](const StationHour& a, const StationHour& b) { return a.hour < b.hour; });
    for (auto& h : st.hours) slot[{id, h.hour}] = &h;
  }

  for (const auto& m : matched) {
    std::set<std::pair<network::LinkId, std::int64_t>> visits;
    for (const auto& e : m.route) {
      if (e.link_id == mapmatch::kGapLink) continue;
      visits.insert({std::abs(e.link_id), floor_div(e.t_entry, 3'600'000)});
    }
    for (const auto& [road, hour] : visits) {
      auto it = by_road.find(road);
      if (it == by_road.end()) continue;
      for (const auto& sid : it->second) {
        auto s = slot.find({sid, hour});
        if (s != slot.end()) ++s->second->traversals;
      }
    }
  }

  PenetrationEstimate est;
  std::vector<double> all, station_means;
  for (auto& [id, st] : stations) {
    std::vector<double> prs;
    for (auto& h : st.hours) {
      if (h.count <= 0) continue;
      h.pr = static_cast<double>(h.traversals) / static_cast<double>(h.count);
      h.anomaly = *h.pr > 1.0;
      st.anomalies += h.anomaly ? 1 : 0;
      prs.push_back(*h.pr);
    }
    st.valid_hours = prs.size();
    if (!prs.empty()) {
      st.mean_pr = mean_of(prs);
      st.median_pr = lower_median(prs);
      station_means.push_back(st.mean_pr);
    }
    all.insert(all.end(), prs.begin(), prs.end());
    est.stations.push_back(std::move(st));
  }
  est.valid_station_hours = all.size();
  if (!all.empty()) {
    est.hourly_mean = mean_of(all);
    est.hourly_median = lower_median(all);
  }
  if (!station_means.empty()) {
    est.station_mean = mean_of(station_means);
    est.station_median = lower_median(station_means);
  }
  return est;
}

void write_penetration_csv(std::ostream& out, const PenetrationEstimate& est) {
  out << "station_id,link_id,hour_utc,traversals,count,pr,anomaly\n";
  for (const auto& st : est.stations) {
    for (const auto& h : st.hours) {
      out << csv_field(st.station_id) << ',' << st.link_id << ',' << format_hour_utc(h.hour) << ','
          << h.traversals << ',' << h.count << ',';
      if (h.pr) out << format_number(*h.pr);
      out << ',' << (h.anomaly ? "true" : "false") << '\n';
    }
  }
}

std::string penetration_summary_json(const PenetrationEstimate& est, PrAggregate a) {
  nlohmann::json j;
  j["valid_station_hours"] = est.valid_station_hours;
  j["hourly_mean_pr"] = est.hourly_mean;
  j["hourly_median_pr"] = est.hourly_median;
  j["station_mean_pr"] = est.station_mean;
  j["station_median_pr"] = est.station_median;
  j["aggregate"] = a == PrAggregate::Median ? "median" : "mean";
  const double pr = est.aggregate(a);
  if (pr > 0) {
    j["expansion_factor"] = expansion_factor_from_pr(pr);
  } else {
    j["expansion_factor"] = nullptr;
  }
  nlohmann::json stations = nlohmann::json::array();
  for (const auto& st : est.stations) {
    stations.push_back({{"station_id", st.station_id},
                        {"link_id", st.link_id},
                        {"valid_hours", st.valid_hours},
                        {"mean_pr", st.mean_pr},
                        {"median_pr", st.median_pr},
                        {"anomalies", st.anomalies}});
  }
  j["stations"] = std::move(stations);
  return j.dump(2);
}

// --- corridor --------------------------------------------------------------

std::string_view to_string(DayType d) noexcept {
  return d == DayType::Weekday ? "weekday" : "weekend";
}

DayType day_type(TimestampMs t, int utc_offset_hours) {
  const TimestampMs local = t + static_cast<TimestampMs>(utc_offset_hours) * 3'600'000;
  const std::int64_t days = floor_div(local, 86'400'000);
  // 1970-01-01 was a Thursday; 0 = Sunday.
  const std::int64_t dow = ((days + 4) % 7 + 7) % 7;
  return dow == 0 || dow == 6 ? DayType::Weekend : DayType::Weekday;
}

int local_hour(TimestampMs t, int utc_offset_hours) {
  const TimestampMs local = t + static_cast<TimestampMs>(utc_offset_hours) * 3'600'000;
  return static_cast<int>(floor_div(local, 3'600'000) - floor_div(local, 86'400'000) * 24);
}

std::optional<int> CorridorReport::peak_hour(DayType d) const {
  std::optional<int> best;
  double best_v = -1;
  for (const auto& h : hourly) {
    if (h.day != d) continue;
    if (h.median_s > best_v) {
      best_v = h.median_s;
      best = h.hour;
    }
  }
  return best;
}

CorridorReport corridor_analysis(std::span<const Trip> trips, const GeoPolygon& a,
                                 const GeoPolygon& b, std::span<const Corridor> corridors,
                                 const CorridorOptions& opt) {
  if (opt.utc_offset_hours < -14 || opt.utc_offset_hours > 14) {
    throw DomainError("UTC offset out of range");
  }
  CorridorReport rep;
  std::map<std::pair<int, int>, std::vector<double>> buckets;
  for (const auto& trip : trips) {
    const auto& w = trip.waypoints;
    std::optional<std::size_t> last_a, first_b;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (point_in_polygon(w[k].latlon(), b) && last_a) {
        first_b = k;
        break;
      }
      if (point_in_polygon(w[k].latlon(), a)) last_a = k;
    }
    if (!first_b) continue;
    CorridorTrip ct;
    ct.trip_id = trip.trip_id;
    ct.depart = trip.start_time();
    ct.travel_time_s = static_cast<double>(w[*first_b].t - w[*last_a].t) / 1000.0;
    ct.hour = local_hour(ct.depart, opt.utc_offset_hours);
    ct.day = day_type(ct.depart, opt.utc_offset_hours);
    ct.route = kUnassignedRoute;
    const std::size_t n_mid = *first_b - *last_a - 1;
    if (n_mid > 0) {
      for (const auto& c : corridors) {
        std::size_t inside = 0;
        for (std::size_t k = *last_a + 1; k < *first_b; ++k) {
          inside += point_in_polygon(w[k].latlon(), c.polygon) ? 1 : 0;
        }
        if (2 * inside > n_mid) {
          ct.route = c.name;
          break;
        }
      }
    }
    if (ct.route == kUnassignedRoute) {
      ++rep.unassigned;
    } else {
      ++rep.assigned;
      ++rep.route_counts[ct.route];
    }
    buckets[{static_cast<int>(ct.day), ct.hour}].push_back(ct.travel_time_s);
    rep.trips.push_back(std::move(ct));
  }
  for (auto& [key, v] : buckets) {
    HourlyTravelTime h;
    h.day = static_cast<DayType>(key.first);
    h.hour = key.second;
    h.n = v.size();
    h.mean_s = mean_of(v);
    h.median_s = lower_median(v);
    rep.hourly.push_back(h);
  }
  for (const auto& [name, n] : rep.route_counts) {
    rep.route_shares[name] = static_cast<double>(n) / static_cast<double>(rep.assigned);
  }
  return rep;
}

void write_corridor_hourly_csv(std::ostream& out, const CorridorReport& r) {
  out << "day_type,hour,n,median_s,mean_s\n";
  for (const auto& h : r.hourly) {
    out << to_string(h.day) << ',' << h.hour << ',' << h.n << ',' << format_number(h.median_s) << ','
        << format_number(h.mean_s) << '\n';
  }
}

void write_route_split_csv(std::ostream& out, const CorridorReport& r) {
  out << "route,trips,share\n";
  for (const auto& [name, n] : r.route_counts) {
    out << csv_field(name) << ',' << n << ',' << format_number(r.route_shares.at(name)) << '\n';
  }
  out << kUnassignedRoute << ',' << r.unassigned << ",\n";
}

// --- origin heat map -------------------------------------------------------

std::int64_t OriginHeatmap::at(GridCell c) const {
  return counts.at(static_cast<std::size_t>(c.row) * static_cast<std::size_t>(grid.cols) +
                   static_cast<std::size_t>(c.col));
}

std::int64_t OriginHeatmap::total() const {
  std::int64_t t = out_of_grid;
  for (auto c : counts) t += c;
  return t;
}

GridCell OriginHeatmap::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return {static_cast<int>(best / static_cast<std::size_t>(grid.cols)),
          static_cast<int>(best % static_cast<std::size_t>(grid.cols))};
}

OriginHeatmap origin_heatmap(std::span<const Trip> trips, const GridSpec& g) {
  g.validate();
  OriginHeatmap h;
  h.grid = g;
  h.counts.assign(static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols), 0);
  for (const auto& t : trips) {
    if (t.waypoints.empty()) continue;
    const auto c = grid_index(t.waypoints.front().latlon(), g);
    if (!c) {
      ++h.out_of_grid;
      continue;
    }
    ++h.counts[static_cast<std::size_t>(c->row) * static_cast<std::size_t>(g.cols) +
               static_cast<std::size_t>(c->col)];
  }
  return h;
}

}  // namespace trajan::demand

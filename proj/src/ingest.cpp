#include "trajan/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace trajan::ingest {

namespace {

using nlohmann::json;

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// Parses the eight CSV fields of one waypoint row into `trip`. Returns the
// defect reason on failure.
std::optional<std::string> apply_row(const std::vector<std::string>& f, Trip& trip,
                                     bool first_row) {
  if (f.size() != 8) return std::string("malformed_row");
  const auto mode = parse_travel_mode(f[2]);
  const auto weight = parse_weight_class(f[3]);
  const auto provider = parse_provider(f[4]);
  if (!mode || !weight || !provider) return std::string("bad_attribute");
  if (first_row) {
    trip.trip_id = f[0];
    trip.device_id = f[1];
    trip.mode = *mode;
    trip.weight_class = *weight;
    trip.provider = *provider;
  } else if (trip.device_id != f[1] || trip.mode != *mode ||
             trip.weight_class != *weight || trip.provider != *provider) {
    return std::string("inconsistent_attributes");
  }
  Waypoint w;
  if (!parse_number(f[5], w.lat) || !parse_number(f[6], w.lon) ||
      !parse_number(f[7], w.t)) {
    return std::string("bad_number");
  }
  trip.waypoints.push_back(w);
  return std::nullopt;
}

}  // namespace

Format parse_format(std::string_view tag) {
  std::string lower(tag);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "csv") return Format::CSV;
  if (lower == "jsonl") return Format::JSONL;
  throw ConfigError("unknown trip format '" + std::string(tag) + "'");
}

void IngestReport::reject(const std::string& reason) {
  ++trips_rejected;
  ++rejection_reasons[reason];
}

void IngestReport::merge(const IngestReport& other) {
  trips_read += other.trips_read;
  trips_kept += other.trips_kept;
  trips_rejected += other.trips_rejected;
  waypoints_read += other.waypoints_read;
  waypoints_dropped_as_outliers += other.waypoints_dropped_as_outliers;
  for (const auto& [k, v] : other.rejection_reasons) rejection_reasons[k] += v;
}

std::string IngestReport::to_json() const {
  json j;
  j["trips_read"] = trips_read;
  j["trips_kept"] = trips_kept;
  j["trips_rejected"] = trips_rejected;
  j["waypoints_read"] = waypoints_read;
  j["waypoints_dropped_as_outliers"] = waypoints_dropped_as_outliers;
  j["rejection_reasons"] = json::object();
  for (const auto& [k, v] : rejection_reasons) j["rejection_reasons"][k] = v;
  return j.dump(2);
}

TripReader::TripReader(std::istream& in, Format format) : in_(in), format_(format) {
  if (!in_) throw IoError("trip source is not readable");
}

std::optional<Trip> TripReader::next() {
  return format_ == Format::CSV ? next_csv() : next_jsonl();
}

void TripReader::read_header() {
  header_done_ = true;
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    std::string_view v = trim_cr(line);
    if (v.substr(0, 3) == "\xEF\xBB\xBF") v.remove_prefix(3);
    if (v.empty()) continue;
    if (v != kCsvHeader) {
      throw ParseError("line " + std::to_string(line_no_) + ": expected CSV header '" +
                       std::string(kCsvHeader) + "'");
    }
    return;
  }
}

std::optional<Trip> TripReader::finish(Pending pending) {
  ++report_.trips_read;
  report_.waypoints_read +=
      format_ == Format::CSV ? pending.rows : pending.trip.waypoints.size();
  if (!pending.defect) pending.defect = trip_defect(pending.trip);
  if (!pending.defect && !seen_ids_.insert(pending.trip.trip_id).second) {
    pending.defect = format_ == Format::CSV ? "non_contiguous_trip_id" : "duplicate_trip_id";
  }
  if (pending.defect) {
    report_.reject(*pending.defect);
    return std::nullopt;
  }
  ++report_.trips_kept;
  return std::move(pending.trip);
}

std::optional<Trip> TripReader::next_csv() {
  if (!header_done_) read_header();
  std::string line;
  while (true) {
    if (!std::getline(in_, line)) {
      if (in_.bad()) throw IoError("read failure on trip source");
      if (!carry_) return std::nullopt;
      auto pending = std::move(*carry_);
      carry_.reset();
      if (auto trip = finish(std::move(pending))) return trip;
      continue;
    }
    ++line_no_;
    const std::string_view v = trim_cr(line);
    if (v.empty()) continue;
    auto fields = split_csv(v);
    const std::string& id = fields[0];
    std::optional<Trip> done;
    if (carry_ && carry_->trip.trip_id != id) {
      auto pending = std::move(*carry_);
      carry_.reset();
      done = finish(std::move(pending));
    }
    if (!carry_) {
      carry_.emplace();
      carry_->trip.trip_id = id;
      if (auto defect = apply_row(fields, carry_->trip, true)) carry_->defect = defect;
    } else if (!carry_->defect) {
      if (auto defect = apply_row(fields, carry_->trip, false)) {
        carry_->defect = defect;
      }
    }
    ++carry_->rows;
    if (done) return done;
  }
}

std::optional<Trip> TripReader::next_jsonl() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    const std::string_view v = trim_cr(line);
    if (v.find_first_not_of(" \t") == std::string_view::npos) continue;
    Pending pending;
    try {
      const json j = json::parse(v);
      auto& trip = pending.trip;
      trip.trip_id = j.at("trip_id").get<std::string>();
      trip.device_id = j.at("device_id").get<std::string>();
      const auto mode = parse_travel_mode(j.value("mode", std::string()));
      const auto weight = parse_weight_class(j.value("weight_class", std::string()));
      const auto provider = parse_provider(j.value("provider", std::string()));
      for (const auto& w : j.at("waypoints")) {
        if (!w.is_array() || w.size() != 3) throw std::invalid_argument("waypoint");
        trip.waypoints.push_back(
            {w[0].get<double>(), w[1].get<double>(), w[2].get<TimestampMs>()});
      }
      if (!mode || !weight || !provider) {
        pending.defect = "bad_attribute";
      } else {
        trip.mode = *mode;
        trip.weight_class = *weight;
        trip.provider = *provider;
      }
    } catch (const std::exception&) {
      pending.defect = "malformed_row";
    }
    if (auto trip = finish(std::move(pending))) return trip;
  }
  if (in_.bad()) throw IoError("read failure on trip source");
  return std::nullopt;
}

ParseResult parse_trips(std::istream& in, Format format) {
  TripReader reader(in, format);
  ParseResult result;
  while (auto trip = reader.next()) result.trips.push_back(std::move(*trip));
  result.report = reader.report();
  return result;
}

ParseResult read_trip_file(const std::string& path, Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trip file '" + path + "'");
  return parse_trips(in, format);
}

std::string format_coordinate(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  std::string s(buf, ptr);
  const auto dot = s.find('.');
  const std::size_t decimals = dot == std::string::npos ? 0 : s.size() - dot - 1;
  if (decimals < 6) {
    auto [p2, ec2] =
        std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    s.assign(buf, p2);
  }
  return s;
}

void write_trips_csv(std::ostream& out, std::span<const Trip> trips) {
  out << kCsvHeader << '\n';
  for (const auto& trip : trips) {
    const std::string prefix = csv_field(trip.trip_id) + ',' + csv_field(trip.device_id) +
                               ',' + std::string(to_string(trip.mode)) + ',' +
                               std::string(to_string(trip.weight_class)) + ',' +
                               std::string(to_string(trip.provider)) + ',';
    for (const auto& w : trip.waypoints) {
      out << prefix << format_coordinate(w.lat) << ',' << format_coordinate(w.lon) << ','
          << w.t << '\n';
    }
  }
}

void write_trips_jsonl(std::ostream& out, std::span<const Trip> trips) {
  for (const auto& trip : trips) {
    out << "{\"trip_id\":" << json(trip.trip_id).dump()
        << ",\"device_id\":" << json(trip.device_id).dump() << ",\"mode\":\""
        << to_string(trip.mode) << "\",\"weight_class\":\"" << to_string(trip.weight_class)
        << "\",\"provider\":\"" << to_string(trip.provider) << "\",\"waypoints\":[";
    for (std::size_t i = 0; i < trip.waypoints.size(); ++i) {
      const auto& w = trip.waypoints[i];
      if (i) out << ',';
      out << '[' << format_coordinate(w.lat) << ',' << format_coordinate(w.lon) << ','
          << w.t << ']';
    }
    out << "]}\n";
  }
}

OutlierFilterResult filter_outlier_waypoints(const Trip& trip, double vmax) {
  if (!(vmax > 0.0)) throw DomainError("vmax must be positive");
  OutlierFilterResult result;
  Trip kept = trip;
  kept.waypoints.clear();
  for (const auto& w : trip.waypoints) {
    if (kept.waypoints.empty()) {
      kept.waypoints.push_back(w);
      continue;
    }
    const auto& last = kept.waypoints.back();
    bool keep;
    if (w.t > last.t) {
      keep = segment_speed(last, w) <= vmax;
    } else {
      keep = w.t == last.t && haversine(last, w) == 0.0;
    }
    if (keep) {
      kept.waypoints.push_back(w);
    } else {
      ++result.dropped;
    }
  }
  if (kept.waypoints.size() >= 2) result.trip = std::move(kept);
  return result;
}

TripStats trip_stats(const Trip& trip) {
  TripStats s;
  s.n_waypoints = trip.waypoints.size();
  if (s.n_waypoints == 0) return s;
  s.duration_s = static_cast<double>(trip.duration_ms()) / 1000.0;
  if (s.n_waypoints < 2) return s;
  std::vector<double> lapses, spacings;
  lapses.reserve(s.n_waypoints - 1);
  spacings.reserve(s.n_waypoints - 1);
  for (std::size_t i = 1; i < trip.waypoints.size(); ++i) {
    const double d = haversine(trip.waypoints[i - 1], trip.waypoints[i]);
    s.length_m += d;
    spacings.push_back(d);
    lapses.push_back(static_cast<double>(trip.waypoints[i].t - trip.waypoints[i - 1].t) /
                     1000.0);
  }
  s.median_lapse_s = lower_median(std::move(lapses));
  s.median_spacing_m = lower_median(std::move(spacings));
  return s;
}

QuantileSketch::QuantileSketch(double alpha)
    : alpha_(alpha),
      gamma_((1.0 + alpha) / (1.0 - alpha)),
      log_gamma_(std::log((1.0 + alpha) / (1.0 - alpha))) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("sketch alpha must be in (0,1)");
}

void QuantileSketch::add(double v) {
  if (!(v >= 0.0)) throw DomainError("sketch accepts non-negative values only");
  ++count_;
  // Values below this floor collapse into the zero bucket.
  if (v < 1e-9) {
    ++zeros_;
    return;
  }
  ++buckets_[static_cast<int>(std::ceil(std::log(v) / log_gamma_))];
}

double QuantileSketch::quantile(double q) const {
  if (count_ == 0) throw DomainError("quantile of empty sketch");
  const auto n = static_cast<double>(count_);
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, count_);
  if (rank <= zeros_) return 0.0;
  std::size_t seen = zeros_;
  for (const auto& [key, c] : buckets_) {
    seen += c;
    if (seen >= rank) return 2.0 * std::pow(gamma_, key) / (gamma_ + 1.0);
  }
  return 2.0 * std::pow(gamma_, buckets_.rbegin()->first) / (gamma_ + 1.0);
}

MetricSummary::MetricSummary(std::size_t exact_limit, double alpha, std::size_t bins)
    : exact_limit_(exact_limit), bins_(bins), alpha_(alpha) {}

void MetricSummary::add(double v) {
  if (n_ == 0) {
    min_ = max_ = v;
  } else {
    min_ = std::min(min_, v);
    max_ = std::max(max_, v);
  }
  ++n_;
  sum_ += v;
  if (sketch_) {
    sketch_->add(v);
    return;
  }
  values_.push_back(v);
  if (values_.size() > exact_limit_) {
    sketch_.emplace(alpha_);
    for (double x : values_) sketch_->add(x);
    values_.clear();
    values_.shrink_to_fit();
  }
}

Distribution MetricSummary::finish() const {
  if (n_ == 0) throw DomainError("summary of empty stream");
  Distribution d;
  d.n = n_;
  d.min = min_;
  d.max = max_;
  d.mean = sum_ / static_cast<double>(n_);
  d.histogram.lo = min_;
  d.histogram.width = (max_ - min_) / static_cast<double>(bins_);
  d.histogram.counts.assign(bins_, 0);
  auto bin_of = [&](double v) {
    if (d.histogram.width <= 0.0) return std::size_t{0};
    auto b = static_cast<std::size_t>((v - min_) / d.histogram.width);
    return std::min(b, bins_ - 1);
  };
  if (sketch_) {
    d.exact = false;
    d.q1 = sketch_->quantile(0.25);
    d.median = sketch_->quantile(0.5);
    d.q3 = sketch_->quantile(0.75);
    // Histogram from sketch quantiles: each step carries n/kSteps values.
    constexpr int kSteps = 1000;
    std::vector<double> mass(bins_, 0.0);
    for (int i = 1; i <= kSteps; ++i) {
      const double v = sketch_->quantile(static_cast<double>(i) / kSteps);
      mass[bin_of(std::clamp(v, min_, max_))] += static_cast<double>(n_) / kSteps;
    }
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < bins_; ++b) {
      d.histogram.counts[b] = static_cast<std::size_t>(std::llround(mass[b]));
      assigned += d.histogram.counts[b];
    }
    // Keep the histogram total equal to n.
    auto& last = d.histogram.counts[bin_of(max_)];
    if (assigned > n_) {
      last -= std::min(last, assigned - n_);
    } else {
      last += n_ - assigned;
    }
    return d;
  }
  std::vector<double> sorted = values_;
  std::sort(sorted.begin(), sorted.end());
  d.q1 = lower_quantile_sorted(sorted, 0.25);
  d.median = lower_quantile_sorted(sorted, 0.5);
  d.q3 = lower_quantile_sorted(sorted, 0.75);
  for (double v : sorted) ++d.histogram.counts[bin_of(v)];
  return d;
}

CorpusSummary summarize_corpus(std::span<const TripStats> stats, std::size_t exact_limit) {
  if (stats.empty()) throw DomainError("cannot summarize an empty corpus");
  MetricSummary duration(exact_limit), length(exact_limit), lapse(exact_limit),
      spacing(exact_limit);
  for (const auto& s : stats) {
    duration.add(s.duration_s);
    length.add(s.length_m);
    lapse.add(s.median_lapse_s);
    spacing.add(s.median_spacing_m);
  }
  return {duration.finish(), length.finish(), lapse.finish(), spacing.finish()};
}

std::vector<TripChain> chain_device_trips(std::span<const Trip> trips, double max_gap_s) {
  std::vector<std::size_t> order(trips.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = trips[a];
    const auto& tb = trips[b];
    if (ta.device_id != tb.device_id) return ta.device_id < tb.device_id;
    if (ta.start_time() != tb.start_time()) return ta.start_time() < tb.start_time();
    if (ta.trip_id != tb.trip_id) return ta.trip_id < tb.trip_id;
    return a < b;
  });
  const auto max_gap_ms = static_cast<double>(max_gap_s) * 1000.0;
  std::vector<TripChain> chains;
  for (std::size_t idx : order) {
    const auto& trip = trips[idx];
    bool joined = false;
    if (!chains.empty() && chains.back().device_id == trip.device_id) {
      const auto& prev = trips[chains.back().trip_indices.back()];
      const auto gap = static_cast<double>(trip.start_time() - prev.end_time());
      if (gap <= max_gap_ms) {
        chains.back().trip_indices.push_back(idx);
        joined = true;
      }
    }
    if (!joined) chains.push_back({trip.device_id, {idx}});
  }
  return chains;
}

std::string_view to_string(RegionClass c) noexcept {
  switch (c) {
    case RegionClass::Internal: return "Internal";
    case RegionClass::Outbound: return "Outbound";
    case RegionClass::Inbound: return "Inbound";
    case RegionClass::Through: return "Through";
    case RegionClass::External: break;
  }
  return "External";
}

RegionClass classify_trip_region(const Trip& trip, const GeoPolygon& region) {
  const auto& wps = trip.waypoints;
  std::size_t inside = 0;
  for (const auto& w : wps) inside += point_in_polygon(w.latlon(), region) ? 1 : 0;
  if (wps.empty() || inside == 0) return RegionClass::External;
  if (inside == wps.size()) return RegionClass::Internal;
  const bool origin_in = point_in_polygon(wps.front().latlon(), region);
  const bool dest_in = point_in_polygon(wps.back().latlon(), region);
  if (origin_in && !dest_in) return RegionClass::Outbound;
  if (!origin_in && dest_in) return RegionClass::Inbound;
  if (!origin_in && !dest_in) return RegionClass::Through;
  // Both endpoints inside but the trip left the region in between.
  return RegionClass::Internal;
}

}  // namespace trajan::ingest

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajan/core.hpp"

namespace trajan::ingest {

enum class Format { CSV, JSONL };

/// "csv" or "jsonl" (case-insensitive); anything else throws ConfigError.
Format parse_format(std::string_view tag);

struct IngestReport {
  std::size_t trips_read = 0;
  std::size_t trips_kept = 0;
  std::size_t trips_rejected = 0;
  std::size_t waypoints_read = 0;
  std::size_t waypoints_dropped_as_outliers = 0;
  std::map<std::string, std::size_t> rejection_reasons;

  void reject(const std::string& reason);
  /// Associative merge of partial reports.
  void merge(const IngestReport& other);
  std::string to_json() const;
};

/// Streaming trip reader. CSV rows of one trip must be contiguous; a
/// malformed row poisons its trip, which is then rejected as a whole.
/// Memory use is bounded by the largest single trip.
class TripReader {
 public:
  TripReader(std::istream& in, Format format);

  /// Next valid trip, or nullopt at end of input.
  std::optional<Trip> next();
  const IngestReport& report() const noexcept { return report_; }

 private:
  struct Pending {
    Trip trip;
    std::optional<std::string> defect;
    std::size_t rows = 0;
  };

  std::optional<Trip> next_csv();
  std::optional<Trip> next_jsonl();
  std::optional<Trip> finish(Pending pending);
  void read_header();

  std::istream& in_;
  Format format_;
  IngestReport report_;
  bool header_done_ = false;
  std::optional<Pending> carry_;
  std::set<std::string> seen_ids_;
  std::size_t line_no_ = 0;
};

struct ParseResult {
  std::vector<Trip> trips;
  IngestReport report;
};

/// Reads a whole source; throws IoError if the stream is unreadable.
ParseResult parse_trips(std::istream& in, Format format);
ParseResult read_trip_file(const std::string& path, Format format);

inline constexpr std::string_view kCsvHeader =
    "trip_id,device_id,mode,weight_class,provider,lat,lon,t_ms";

/// Coordinate text that parses back to the identical double and carries at
/// least six decimals.
std::string format_coordinate(double v);

void write_trips_csv(std::ostream& out, std::span<const Trip> trips);
void write_trips_jsonl(std::ostream& out, std::span<const Trip> trips);

/// Default speed ceiling for outlier removal (about 150 mph).
inline constexpr double kDefaultVmax = 67.0;

struct OutlierFilterResult {
  std::optional<Trip> trip;  // nullopt when fewer than 2 waypoints survive
  std::size_t dropped = 0;
};

/// Greedy forward scan: a fix implying a speed above vmax from the last
/// kept fix is dropped. The first fix is always kept. Zero-duration steps
/// are kept only when they do not move.
OutlierFilterResult filter_outlier_waypoints(const Trip& trip, double vmax = kDefaultVmax);

struct TripStats {
  double duration_s = 0.0;
  double length_m = 0.0;
  std::size_t n_waypoints = 0;
  double median_lapse_s = 0.0;
  double median_spacing_m = 0.0;
};

TripStats trip_stats(const Trip& trip);

/// Quantile sketch with relative accuracy `alpha` over non-negative values
/// (logarithmic buckets). Used once a corpus outgrows exact summaries.
class QuantileSketch {
 public:
  explicit QuantileSketch(double alpha = 0.01);
  void add(double v);
  double quantile(double q) const;
  std::size_t count() const noexcept { return count_; }
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  double gamma_;
  double log_gamma_;
  std::size_t count_ = 0;
  std::size_t zeros_ = 0;
  std::map<int, std::size_t> buckets_;
};

struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<std::size_t> counts;
};

struct Distribution {
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  bool exact = true;
  Histogram histogram;
};

/// Accumulates one metric; exact (full sort) up to `exact_limit` values,
/// sketch-backed beyond it. Histograms are built over [min, max] with a
/// fixed bin count.
class MetricSummary {
 public:
  explicit MetricSummary(std::size_t exact_limit = 10'000'000, double alpha = 0.01,
                         std::size_t bins = 20);
  void add(double v);
  Distribution finish() const;

 private:
  std::size_t exact_limit_;
  std::size_t bins_;
  std::vector<double> values_;
  std::optional<QuantileSketch> sketch_;
  std::size_t n_ = 0;
  double sum_ = 0.0, min_ = 0.0, max_ = 0.0;
  double alpha_;
};

struct CorpusSummary {
  Distribution duration_s;
  Distribution length_m;
  Distribution lapse_s;
  Distribution spacing_m;
};

/// Lower-quantile convention throughout. Throws DomainError on empty input.
CorpusSummary summarize_corpus(std::span<const TripStats> stats,
                               std::size_t exact_limit = 10'000'000);

struct TripChain {
  std::string device_id;
  std::vector<std::size_t> trip_indices;  // into the input span, by start time
};

inline constexpr double kDefaultMaxGapS = 600.0;

/// Chains per device ordered by (device_id, first start time). Consecutive
/// trips join when next.start - prev.end <= max_gap.
std::vector<TripChain> chain_device_trips(std::span<const Trip> trips,
                                          double max_gap_s = kDefaultMaxGapS);

enum class RegionClass { Internal, Outbound, Inbound, Through, External };

std::string_view to_string(RegionClass c) noexcept;

RegionClass classify_trip_region(const Trip& trip, const GeoPolygon& region);

}  // namespace trajan::ingest

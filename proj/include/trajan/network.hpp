#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajan/core.hpp"

namespace trajan::network {

/// External link identity. Features carry positive ids; the reverse
/// direction of a two-way feature is exposed as the negated id.
using LinkId = std::int64_t;
using NodeId = std::int64_t;

/// Dense internal indices.
using LinkIndex = std::uint32_t;
using NodeIndex = std::uint32_t;

struct Node {
  NodeId id = 0;
  LatLon pos;
};

struct Link {
  LinkId id = 0;
  NodeIndex from = 0;
  NodeIndex to = 0;
  std::vector<LatLon> geometry;  // from -> to
  std::vector<double> cumulative_m;  // great-circle distance at each vertex
  double length_m = 0.0;
  bool oneway = true;  // false for both directions of a two-way feature
};

struct LinkProjection {
  LinkIndex link = 0;
  LinkId link_id = 0;
  LatLon point;
  double offset_m = 0.0;
  double distance_m = 0.0;
};

struct Route {
  bool reachable = false;
  std::vector<LinkIndex> links;
  double distance_m = std::numeric_limits<double>::infinity();
};

/// Directed road graph. Immutable after construction; safe to share
/// across threads.
class RoadNetwork {
 public:
  struct FeatureSpec {
    LinkId link_id = 0;
    NodeId from_node = 0;
    NodeId to_node = 0;
    bool oneway = true;
    std::vector<LatLon> geometry;
  };

  /// Builds the graph; two-way features expand to two directed links.
  /// Throws ParseError on dangling or inconsistent references.
  static RoadNetwork build(std::vector<FeatureSpec> features,
                           std::map<NodeId, LatLon> declared_nodes = {});

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const Link> links() const noexcept { return links_; }
  const Link& link(LinkIndex i) const { return links_.at(i); }
  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  std::optional<LinkIndex> find_link(LinkId id) const;
  std::optional<NodeIndex> find_node(NodeId id) const;

  /// Outgoing links of a node, ascending link index.
  std::span<const LinkIndex> outgoing(NodeIndex n) const;

  /// Projection of p onto one link (planar, in a local frame about p).
  LinkProjection project(LatLon p, LinkIndex link) const;

  /// Links within `radius_m` of p, nearest first, at most k; ties by link
  /// order (ascending |id|, forward before reverse).
  std::vector<LinkProjection> nearest_links(LatLon p, double radius_m, std::size_t k) const;

  /// Same contract as nearest_links, scanning every link.
  std::vector<LinkProjection> nearest_links_brute(LatLon p, double radius_m,
                                                  std::size_t k) const;

  /// Point at a given offset along a link.
  LatLon point_at(LinkIndex link, double offset_m) const;

 private:
  void build_index();
  std::vector<LinkIndex> index_candidates(LatLon p, double radius_m) const;

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::unordered_map<LinkId, LinkIndex> link_lookup_;
  std::unordered_map<NodeId, NodeIndex> node_lookup_;
  std::vector<std::uint32_t> adjacency_offsets_;
  std::vector<LinkIndex> adjacency_;

  // Uniform lat/lon bucket grid over link segment bounding boxes.
  double min_lat_ = 0, min_lon_ = 0;
  double cell_lat_deg_ = 1, cell_lon_deg_ = 1;
  int index_rows_ = 0, index_cols_ = 0;
  double max_abs_lat_ = 0;
  std::vector<std::vector<LinkIndex>> buckets_;
};

/// Reads a GeoJSON FeatureCollection of LineStrings with properties
/// {link_id, from_node, to_node, oneway}. Optional Point features with a
/// node_id property declare nodes explicitly; when any are present every
/// link endpoint must be declared.
RoadNetwork load_network(const std::string& path);
RoadNetwork parse_network_geojson(const std::string& text);

/// Dijkstra over link lengths with partial first/last link offsets.
/// Settles nodes in (distance, node id) order so ties are reproducible.
Route shortest_path(const RoadNetwork& net, const LinkProjection& a, const LinkProjection& b);

/// One-to-many variant used by the matcher: network distances from `a` to
/// every target, giving up beyond `limit_m`. Entries are nullopt when
/// unreachable within the limit.
std::vector<std::optional<double>> route_distances(const RoadNetwork& net,
                                                   const LinkProjection& a,
                                                   std::span<const LinkProjection> targets,
                                                   double limit_m);

struct TraversalRecord {
  LinkId link_id = 0;
  TimestampMs t = 0;
  friend bool operator==(const TraversalRecord&, const TraversalRecord&) = default;
};

/// Collapses runs of the same link id to one record with the earliest time.
std::vector<TraversalRecord> dedupe_route_nodes(std::span<const TraversalRecord> seq);

/// Great-circle length of a polyline.
double polyline_length(std::span<const LatLon> line);

}  // namespace trajan::network

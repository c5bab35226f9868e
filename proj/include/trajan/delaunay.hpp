#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace trajan::delaunay {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// Sweep-hull Delaunay triangulation (planar).
///
/// `triangles` holds three point indices per triangle; `halfedges[e]` is the
/// opposite half-edge of e in the neighbouring triangle or kNone on the
/// hull. Exact duplicate points are left out of the triangulation.
/// Throws DomainError for fewer than three points or collinear input.
class Triangulation {
 public:
  explicit Triangulation(std::span<const Point> points);

  std::vector<std::size_t> triangles;
  std::vector<std::size_t> halfedges;
  std::vector<std::size_t> hull;

  std::size_t triangle_count() const noexcept { return triangles.size() / 3; }

 private:
  std::size_t legalize(std::size_t a);
  void link(std::size_t a, std::size_t b);
  std::size_t add_triangle(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t a,
                           std::size_t b, std::size_t c);
  std::size_t hash_key(double x, double y) const;

  std::span<const Point> pts_;
  double cx_ = 0, cy_ = 0;
  std::size_t hash_size_ = 0;
  std::size_t hull_start_ = 0;
  std::vector<std::size_t> hull_prev_, hull_next_, hull_tri_, hull_hash_;
  std::vector<std::size_t> edge_stack_;
};

inline std::size_t next_halfedge(std::size_t e) { return e % 3 == 2 ? e - 2 : e + 1; }
inline std::size_t prev_halfedge(std::size_t e) { return e % 3 == 0 ? e + 2 : e - 1; }

double circumradius(Point a, Point b, Point c);
/// Twice the signed area; positive for counter-clockwise a, b, c.
double cross(Point a, Point b, Point c);

}  // namespace trajan::delaunay

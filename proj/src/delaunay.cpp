#include "trajan/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajan/core.hpp"

namespace trajan::delaunay {

namespace {

double dist2(double ax, double ay, double bx, double by) {
  const double dx = ax - bx, dy = ay - by;
  return dx * dx + dy * dy;
}

// True when r lies to the right of p -> q, i.e. p, q, r turn clockwise.
bool orient(Point p, Point q, Point r) {
  return (q.y - p.y) * (r.x - q.x) - (q.x - p.x) * (r.y - q.y) < 0;
}

bool in_circle(Point a, Point b, Point c, Point p) {
  const double dx = a.x - p.x, dy = a.y - p.y;
  const double ex = b.x - p.x, ey = b.y - p.y;
  const double fx = c.x - p.x, fy = c.y - p.y;
  const double ap = dx * dx + dy * dy;
  const double bp = ex * ex + ey * ey;
  const double cp = fx * fx + fy * fy;
  return dx * (ey * cp - bp * fy) - dy * (ex * cp - bp * fx) + ap * (ex * fy - ey * fx) < 0;
}

double circumradius2(Point a, Point b, Point c) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double ex = c.x - a.x, ey = c.y - a.y;
  const double bl = dx * dx + dy * dy;
  const double cl = ex * ex + ey * ey;
  const double den = dx * ey - dy * ex;
  if (den == 0) return std::numeric_limits<double>::infinity();
  const double d = 0.5 / den;
  const double x = (ey * bl - dy * cl) * d;
  const double y = (dx * cl - ex * bl) * d;
  return x * x + y * y;
}

Point circumcenter(Point a, Point b, Point c) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double ex = c.x - a.x, ey = c.y - a.y;
  const double bl = dx * dx + dy * dy;
  const double cl = ex * ex + ey * ey;
  const double d = 0.5 / (dx * ey - dy * ex);
  return {a.x + (ey * bl - dy * cl) * d, a.y + (dx * cl - ex * bl) * d};
}

double pseudo_angle(double dx, double dy) {
  const double p = dx / (std::abs(dx) + std::abs(dy));
  return (dy > 0 ? 3 - p : 1 + p) / 4;
}

}  // namespace

double circumradius(Point a, Point b, Point c) { return std::sqrt(circumradius2(a, b, c)); }

double cross(Point a, Point b, Point c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

std::size_t Triangulation::hash_key(double x, double y) const {
  const auto k = static_cast<std::size_t>(std::floor(pseudo_angle(x - cx_, y - cy_) *
                                                     static_cast<double>(hash_size_)));
  return k % hash_size_;
}

void Triangulation::link(std::size_t a, std::size_t b) {
  halfedges[a] = b;
  if (b != kNone) halfedges[b] = a;
}

std::size_t Triangulation::add_triangle(std::size_t i0, std::size_t i1, std::size_t i2,
                                        std::size_t a, std::size_t b, std::size_t c) {
  const std::size_t t = triangles.size();
  triangles.push_back(i0);
  triangles.push_back(i1);
  triangles.push_back(i2);
  halfedges.resize(t + 3, kNone);
  link(t, a);
  link(t + 1, b);
  link(t + 2, c);
  return t;
}

std::size_t Triangulation::legalize(std::size_t a) {
  edge_stack_.clear();
  std::size_t ar = 0;
  while (true) {
    const std::size_t b = halfedges[a];
    const std::size_t a0 = a - a % 3;
    ar = a0 + (a + 2) % 3;
    if (b == kNone) {
      if (edge_stack_.empty()) break;
      a = edge_stack_.back();
      edge_stack_.pop_back();
      continue;
    }
    const std::size_t b0 = b - b % 3;
    const std::size_t al = a0 + (a + 1) % 3;
    const std::size_t bl = b0 + (b + 2) % 3;
    const std::size_t p0 = triangles[ar];
    const std::size_t pr = triangles[a];
    const std::size_t pl = triangles[al];
    const std::size_t p1 = triangles[bl];
    if (in_circle(pts_[p0], pts_[pr], pts_[pl], pts_[p1])) {
      triangles[a] = p1;
      triangles[b] = p0;
      const std::size_t hbl = halfedges[bl];
      if (hbl == kNone) {
        std::size_t e = hull_start_;
        do {
          if (hull_tri_[e] == bl) {
            hull_tri_[e] = a;
            break;
          }
          e = hull_prev_[e];
        } while (e != hull_start_);
      }
      link(a, hbl);
      link(b, halfedges[ar]);
      link(ar, bl);
      edge_stack_.push_back(b0 + (b + 1) % 3);
    } else {
      if (edge_stack_.empty()) break;
      a = edge_stack_.back();
      edge_stack_.pop_back();
    }
  }
  return ar;
}

Triangulation::Triangulation(std::span<const Point> points) : pts_(points) {
  const std::size_t n = points.size();
  if (n < 3) throw DomainError("triangulation needs at least three points");
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("non-finite point");
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  const double cx = (min_x + max_x) / 2, cy = (min_y + max_y) / 2;

  std::size_t i0 = 0, i1 = kNone, i2 = kNone;
  double best = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = dist2(cx, cy, points[i].x, points[i].y);
    if (d < best) {
      i0 = i;
      best = d;
    }
  }
  best = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == i0) continue;
    const double d = dist2(points[i0].x, points[i0].y, points[i].x, points[i].y);
    if (d < best && d > 0) {
      i1 = i;
      best = d;
    }
  }
  if (i1 == kNone) throw DomainError("triangulation input is degenerate (all points equal)");
  double min_radius = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == i0 || i == i1) continue;
    const double r = circumradius2(points[i0], points[i1], points[i]);
    if (r < min_radius) {
      i2 = i;
      min_radius = r;
    }
  }
  if (i2 == kNone || !std::isfinite(min_radius)) {
    throw DomainError("triangulation input is degenerate (collinear points)");
  }
  if (orient(points[i0], points[i1], points[i2])) std::swap(i1, i2);

  const Point c = circumcenter(points[i0], points[i1], points[i2]);
  cx_ = c.x;
  cy_ = c.y;
  std::vector<double> dists(n);
  for (std::size_t i = 0; i < n; ++i) dists[i] = dist2(points[i].x, points[i].y, c.x, c.y);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (dists[a] != dists[b]) return dists[a] < dists[b];
    if (points[a].x != points[b].x) return points[a].x < points[b].x;
    if (points[a].y != points[b].y) return points[a].y < points[b].y;
    return a < b;
  });

  hash_size_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  hull_prev_.assign(n, 0);
  hull_next_.assign(n, 0);
  hull_tri_.assign(n, 0);
  hull_hash_.assign(hash_size_, kNone);
  const std::size_t max_triangles = n > 2 ? 2 * n - 5 : 0;
  triangles.reserve(max_triangles * 3);
  halfedges.reserve(max_triangles * 3);

  hull_start_ = i0;
  std::size_t hull_size = 3;
  hull_next_[i0] = hull_prev_[i2] = i1;
  hull_next_[i1] = hull_prev_[i0] = i2;
  hull_next_[i2] = hull_prev_[i1] = i0;
  hull_tri_[i0] = 0;
  hull_tri_[i1] = 1;
  hull_tri_[i2] = 2;
  hull_hash_[hash_key(points[i0].x, points[i0].y)] = i0;
  hull_hash_[hash_key(points[i1].x, points[i1].y)] = i1;
  hull_hash_[hash_key(points[i2].x, points[i2].y)] = i2;
  add_triangle(i0, i1, i2, kNone, kNone, kNone);

  double xp = 0, yp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = ids[k];
    const Point p = points[i];
    if (k > 0 && p.x == xp && p.y == yp) continue;
    xp = p.x;
    yp = p.y;
    if (i == i0 || i == i1 || i == i2) continue;

    std::size_t start = 0;
    const std::size_t key = hash_key(p.x, p.y);
    for (std::size_t j = 0; j < hash_size_; ++j) {
      start = hull_hash_[(key + j) % hash_size_];
      if (start != kNone && start != hull_next_[start]) break;
    }
    start = hull_prev_[start];
    std::size_t e = start, q = 0;
    bool found = true;
    while (q = hull_next_[e], !orient(p, points[e], points[q])) {
      e = q;
      if (e == start) {
        found = false;
        break;
      }
    }
    if (!found) continue;  // near-duplicate

    std::size_t t = add_triangle(e, i, hull_next_[e], kNone, kNone, hull_tri_[e]);
    hull_tri_[i] = legalize(t + 2);
    hull_tri_[e] = t;
    ++hull_size;

    std::size_t nn = hull_next_[e];
    while (q = hull_next_[nn], orient(p, points[nn], points[q])) {
      t = add_triangle(nn, i, q, hull_tri_[i], kNone, hull_tri_[nn]);
      hull_tri_[i] = legalize(t + 2);
      hull_next_[nn] = nn;
      --hull_size;
      nn = q;
    }
    if (e == start) {
      while (q = hull_prev_[e], orient(p, points[q], points[e])) {
        t = add_triangle(q, i, e, kNone, hull_tri_[e], hull_tri_[q]);
        legalize(t + 2);
        hull_tri_[q] = t;
        hull_next_[e] = e;
        --hull_size;
        e = q;
      }
    }
    hull_start_ = hull_prev_[i] = e;
    hull_next_[e] = hull_prev_[nn] = i;
    hull_next_[i] = nn;
    hull_hash_[hash_key(p.x, p.y)] = i;
    hull_hash_[hash_key(points[e].x, points[e].y)] = e;
  }

  hull.resize(hull_size);
  for (std::size_t k = 0, e = hull_start_; k < hull_size; ++k) {
    hull[k] = e;
    e = hull_next_[e];
  }
}

}  // namespace trajan::delaunay

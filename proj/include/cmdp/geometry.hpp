#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

namespace cmdp {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Wraps an angle in degrees into [0, 360).
inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}

// Signed smallest difference a - b in degrees, result in (-180, 180].
inline double angle_difference(double a_deg, double b_deg) {
  double d = std::fmod(a_deg - b_deg, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{};
  }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Unit vector for a heading in degrees; 0 points along +x, 90 along +y.
inline Vec2 heading_vector(double heading_deg) {
  double r = deg_to_rad(heading_deg);
  return {std::cos(r), std::sin(r)};
}

struct Rect {
  Vec2 min;
  Vec2 max;

  bool operator==(const Rect& o) const { return min == o.min && max == o.max; }

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  Vec2 center() const { return {(min.x + max.x) * 0.5, (min.y + max.y) * 0.5}; }
  double half_diagonal() const { return 0.5 * std::hypot(width(), height()); }

  bool contains(const Vec2& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  bool intersects(const Rect& o) const {
    return min.x <= o.max.x && o.min.x <= max.x && min.y <= o.max.y && o.min.y <= max.y;
  }

  static Rect centered(const Vec2& c, double w, double h) {
    return {{c.x - w * 0.5, c.y - h * 0.5}, {c.x + w * 0.5, c.y + h * 0.5}};
  }
};

inline bool circles_overlap(const Vec2& c1, double r1, const Vec2& c2, double r2) {
  double rr = r1 + r2;
  return (c1 - c2).dot(c1 - c2) < rr * rr;
}

struct Ray {
  Vec2 origin;
  Vec2 dir;  // unit length
};

// Smallest positive distance at which the ray crosses the circle boundary,
// counting both entry and exit crossings (an origin inside the circle sees
// the exit).
inline std::optional<double> ray_circle(const Ray& ray, const Vec2& center, double radius) {
  Vec2 oc = ray.origin - center;
  double b = oc.dot(ray.dir);
  double c = oc.dot(oc) - radius * radius;
  double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  double s = std::sqrt(disc);
  double t1 = -b - s;
  double t2 = -b + s;
  constexpr double kEps = 1e-9;
  if (t1 > kEps) return t1;
  if (t2 > kEps) return t2;
  return std::nullopt;
}

// Entry distance into an axis-aligned rectangle; an origin already inside
// yields no hit (rectangles are only visible from outside).
inline std::optional<double> ray_rect(const Ray& ray, const Rect& rect) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double o[2] = {ray.origin.x, ray.origin.y};
  const double d[2] = {ray.dir.x, ray.dir.y};
  const double lo[2] = {rect.min.x, rect.min.y};
  const double hi[2] = {rect.max.x, rect.max.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double inv = 1.0 / d[axis];
    double t1 = (lo[axis] - o[axis]) * inv;
    double t2 = (hi[axis] - o[axis]) * inv;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (tmax < tmin) return std::nullopt;
  constexpr double kEps = 1e-9;
  if (tmin > kEps) return tmin;
  return std::nullopt;
}

// Distance at which a ray starting inside the bounds rectangle exits it.
inline std::optional<double> ray_bounds_exit(const Ray& ray, const Rect& bounds) {
  double tmax = std::numeric_limits<double>::infinity();
  const double o[2] = {ray.origin.x, ray.origin.y};
  const double d[2] = {ray.dir.x, ray.dir.y};
  const double lo[2] = {bounds.min.x, bounds.min.y};
  const double hi[2] = {bounds.max.x, bounds.max.y};
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-15) continue;
    double inv = 1.0 / d[axis];
    double t1 = (lo[axis] - o[axis]) * inv;
    double t2 = (hi[axis] - o[axis]) * inv;
    double texit = std::max(t1, t2);
    tmax = std::min(tmax, texit);
  }
  if (!std::isfinite(tmax) || tmax < 0.0) return std::nullopt;
  return tmax;
}

}  // namespace cmdp

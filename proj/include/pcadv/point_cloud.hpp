#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pcadv/vec3.hpp"

namespace pcadv {

// Ordered list of 3D points. Attacks rely on the ordering (index-wise
// correspondence for perturbations, original-then-added layout for unions),
// so this is a sequence, not a set.
struct PointCloud {
  std::vector<Vec3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Vec3& operator[](std::size_t i) { return points[i]; }
  const Vec3& operator[](std::size_t i) const { return points[i]; }

  Vec3 centroid() const {
    Vec3 c;
    for (const Vec3& p : points) c += p;
    return c / static_cast<double>(points.size());
  }

  double max_norm() const {
    double m = 0.0;
    for (const Vec3& p : points) m = std::max(m, p.norm());
    return m;
  }

  bool all_finite() const {
    for (const Vec3& p : points) {
      if (!is_finite(p)) return false;
    }
    return true;
  }

  // cloud = this followed by other; originals keep their positions and indices
  PointCloud concat(const PointCloud& other) const {
    PointCloud out;
    out.points.reserve(points.size() + other.points.size());
    out.points.insert(out.points.end(), points.begin(), points.end());
    out.points.insert(out.points.end(), other.points.begin(), other.points.end());
    return out;
  }
};

// Centers at the centroid and scales so the farthest point has norm 1.
inline PointCloud normalize_unit_ball(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("normalize_unit_ball: empty cloud");
  if (!cloud.all_finite()) throw std::invalid_argument("normalize_unit_ball: non-finite coordinate");
  const Vec3 c = cloud.centroid();
  double radius = 0.0;
  for (const Vec3& p : cloud.points) radius = std::max(radius, (p - c).norm());
  if (radius <= 0.0)
    throw std::invalid_argument("normalize_unit_ball: degenerate cloud (all points coincident)");
  PointCloud out;
  out.points.reserve(cloud.size());
  const double inv = 1.0 / radius;
  for (const Vec3& p : cloud.points) out.points.push_back((p - c) * inv);
  return out;
}

struct Mat3 {
  // row-major
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3 identity() { return {}; }
  static Mat3 zero() {
    Mat3 r;
    for (auto& row : r.m) row[0] = row[1] = row[2] = 0.0;
    return r;
  }

  Vec3 apply(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  Vec3 apply_transposed(const Vec3& v) const {
    return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
};

// Rotation stored as an unconstrained axis-angle vector (angle = |rotation|),
// differentiable almost everywhere, nothing to re-normalize during descent.
struct RigidTransform {
  Vec3 rotation;
  Vec3 translation;
};

namespace detail {

// sin(t)/t and (1-cos(t))/t^2 with series fallbacks near zero
inline double sinc(double t, double t2) { return t2 < 1e-10 ? 1.0 - t2 / 6.0 : std::sin(t) / t; }
inline double cosc(double t, double t2) {
  return t2 < 1e-10 ? 0.5 - t2 / 24.0 : (1.0 - std::cos(t)) / t2;
}

}  // namespace detail

// Rodrigues: R = I + sinc(t) [w]x + cosc(t) [w]x^2
inline Mat3 rotation_matrix(const Vec3& w) {
  const double t2 = w.squared_norm();
  const double t = std::sqrt(t2);
  const double b = detail::sinc(t, t2);
  const double c = detail::cosc(t, t2);
  Mat3 r;
  r.m[0][0] = 1.0 + c * (-w.z * w.z - w.y * w.y);
  r.m[0][1] = -b * w.z + c * w.x * w.y;
  r.m[0][2] = b * w.y + c * w.x * w.z;
  r.m[1][0] = b * w.z + c * w.x * w.y;
  r.m[1][1] = 1.0 + c * (-w.z * w.z - w.x * w.x);
  r.m[1][2] = -b * w.x + c * w.y * w.z;
  r.m[2][0] = -b * w.y + c * w.x * w.z;
  r.m[2][1] = b * w.x + c * w.y * w.z;
  r.m[2][2] = 1.0 + c * (-w.y * w.y - w.x * w.x);
  return r;
}

// R(w) p together with the 3x3 Jacobian d(R(w)p)/dw.
//
// With t = |w|, a = cos t, b = sin(t)/t, c = (1-cos t)/t^2:
//   R p = a p + b (w x p) + c w (w.p)
//   dR p/dw = A p w^T + B (w x p) w^T + C (w.p) w w^T - b [p]x + c ((w.p) I + w p^T)
// where A = -sin(t)/t, B = (t cos t - sin t)/t^3, C = (t sin t - 2(1-cos t))/t^4,
// all with removable singularities at t = 0 (series below).
inline Vec3 rotate_with_jacobian(const Vec3& w, const Vec3& p, Mat3* jac) {
  const double t2 = w.squared_norm();
  const double t = std::sqrt(t2);
  const double b = detail::sinc(t, t2);
  const double c = detail::cosc(t, t2);
  const double a = 1.0 - c * t2;  // cos t
  const Vec3 wxp = w.cross(p);
  const double wp = w.dot(p);
  const Vec3 value = p * a + wxp * b + w * (c * wp);
  if (jac) {
    double A, B, C;
    if (t2 < 1e-10) {
      A = -(1.0 - t2 / 6.0);
      B = -1.0 / 3.0 + t2 / 30.0;
      C = -1.0 / 12.0 + t2 / 180.0;
    } else {
      const double st = std::sin(t), ct = std::cos(t);
      A = -st / t;
      B = (t * ct - st) / (t2 * t);
      C = (t * st - 2.0 * (1.0 - ct)) / (t2 * t2);
    }
    // u w^T accumulation with u = A p + B (w x p) + C (w.p) w
    const Vec3 u = p * A + wxp * B + w * (C * wp);
    Mat3 j = Mat3::zero();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) j.m[i][k] = u[i] * w[k] + c * w[i] * p[k];
    j.m[0][0] += c * wp;
    j.m[1][1] += c * wp;
    j.m[2][2] += c * wp;
    // -b [p]x
    j.m[0][1] += b * p.z;
    j.m[0][2] -= b * p.y;
    j.m[1][0] -= b * p.z;
    j.m[1][2] += b * p.x;
    j.m[2][0] += b * p.y;
    j.m[2][1] -= b * p.x;
    *jac = j;
  }
  return value;
}

inline PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  const Mat3 r = rotation_matrix(t.rotation);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(r.apply(p) + t.translation);
  return out;
}

}  // namespace pcadv

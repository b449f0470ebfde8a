#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/point_cloud.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

// Parametric stand-ins for scanned CAD classes. Ten families, sampled
// approximately uniformly by surface area, always emitted unit-ball
// normalized.
enum class ShapeKind : int {
  Sphere = 0,
  Cube,
  Cylinder,
  Cone,
  Torus,
  Pyramid,
  Ellipsoid,
  Disk,
  Capsule,
  Cross,
};

inline constexpr int kNumShapeClasses = 10;

inline const std::array<std::string, kNumShapeClasses>& shape_class_names() {
  static const std::array<std::string, kNumShapeClasses> names = {
      "sphere", "cube",      "cylinder", "cone",    "torus",
      "pyramid", "ellipsoid", "disk",     "capsule", "cross"};
  return names;
}

// Meaning of (a, b, c) depends on the kind:
//   sphere r=a; cube sides a,b,c; cylinder r=a h=b; cone r=a h=b;
//   torus R=a r=b; pyramid base=a h=b; ellipsoid semi-axes a,b,c;
//   disk r=a; capsule r=a h=b; cross arm length=a, width=b.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  double a = 1.0, b = 1.0, c = 1.0;
};

inline ShapeSpec default_spec(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return {kind, 1.0, 0, 0};
    case ShapeKind::Cube: return {kind, 1.0, 1.0, 1.0};
    case ShapeKind::Cylinder: return {kind, 0.5, 1.6, 0};
    case ShapeKind::Cone: return {kind, 0.7, 1.4, 0};
    case ShapeKind::Torus: return {kind, 0.7, 0.25, 0};
    case ShapeKind::Pyramid: return {kind, 1.1, 1.2, 0};
    case ShapeKind::Ellipsoid: return {kind, 1.0, 0.62, 0.38};
    case ShapeKind::Disk: return {kind, 1.0, 0, 0};
    case ShapeKind::Capsule: return {kind, 0.35, 1.3, 0};
    case ShapeKind::Cross: return {kind, 1.4, 0.35, 0};
  }
  throw std::invalid_argument("default_spec: unknown shape kind");
}

namespace detail {

inline Vec3 sample_unit_sphere(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 6.283185307179586);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Vec3 sample_triangle(const Vec3& a, const Vec3& b, const Vec3& c, Rng& rng) {
  const double su = std::sqrt(rng.uniform());
  const double v = rng.uniform();
  return a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v);
}

// uniform over the surface of an axis-aligned box centered at the origin
inline Vec3 sample_box_surface(double hx, double hy, double hz, Rng& rng) {
  const double ax = hy * hz, ay = hx * hz, az = hx * hy;  // quarter face areas, ratios only
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform() * total;
  const double s = rng.uniform() < 0.5 ? 1.0 : -1.0;
  const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
  if (pick < 2.0 * ax) return {s * hx, u * hy, v * hz};
  pick -= 2.0 * ax;
  if (pick < 2.0 * ay) return {u * hx, s * hy, v * hz};
  return {u * hx, v * hy, s * hz};
}

inline bool strictly_inside_box(const Vec3& p, double hx, double hy, double hz) {
  return std::abs(p.x) < hx && std::abs(p.y) < hy && std::abs(p.z) < hz;
}

inline Vec3 sample_raw(const ShapeSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case ShapeKind::Sphere:
      return sample_unit_sphere(rng) * spec.a;
    case ShapeKind::Cube:
      return sample_box_surface(spec.a / 2, spec.b / 2, spec.c / 2, rng);
    case ShapeKind::Cylinder: {
      const double r = spec.a, h = spec.b;
      const double side = 2.0 * M_PI * r * h, caps = 2.0 * M_PI * r * r;
      if (rng.uniform() * (side + caps) < side) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        return {r * std::cos(phi), r * std::sin(phi), rng.uniform(-h / 2, h / 2)};
      }
      const double rr = r * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double z = rng.uniform() < 0.5 ? h / 2 : -h / 2;
      return {rr * std::cos(phi), rr * std::sin(phi), z};
    }
    case ShapeKind::Cone: {
      const double r = spec.a, h = spec.b;
      const double base = M_PI * r * r;
      const double lateral = M_PI * r * std::sqrt(r * r + h * h);
      if (rng.uniform() * (base + lateral) < base) {
        const double rr = r * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        return {rr * std::cos(phi), rr * std::sin(phi), 0.0};
      }
      // lateral surface: area grows quadratically with distance from apex
      const double t = std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      return {r * t * std::cos(phi), r * t * std::sin(phi), h * (1.0 - t)};
    }
    case ShapeKind::Torus: {
      const double R = spec.a, r = spec.b;
      // area element is proportional to R + r cos(theta); rejection on theta
      double theta;
      for (;;) {
        theta = rng.uniform(0.0, 2.0 * M_PI);
        if (rng.uniform() * (R + r) <= R + r * std::cos(theta)) break;
      }
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double d = R + r * std::cos(theta);
      return {d * std::cos(phi), d * std::sin(phi), r * std::sin(theta)};
    }
    case ShapeKind::Pyramid: {
      const double a = spec.a, h = spec.b, ha = a / 2;
      const Vec3 apex{0, 0, h};
      const Vec3 c0{-ha, -ha, 0}, c1{ha, -ha, 0}, c2{ha, ha, 0}, c3{-ha, ha, 0};
      const double base = a * a;
      const double slant = 0.5 * a * std::sqrt(h * h + ha * ha);  // one triangular face
      double pick = rng.uniform() * (base + 4.0 * slant);
      if (pick < base) return {rng.uniform(-ha, ha), rng.uniform(-ha, ha), 0.0};
      pick -= base;
      const int face = std::min(3, static_cast<int>(pick / slant));
      const Vec3* corners[5] = {&c0, &c1, &c2, &c3, &c0};
      return sample_triangle(*corners[face], *corners[face + 1], apex, rng);
    }
    case ShapeKind::Ellipsoid: {
      const double a = spec.a, b = spec.b, c = spec.c;
      const double wmax = std::max(b * c, std::max(a * c, a * b));
      for (;;) {
        const Vec3 u = sample_unit_sphere(rng);
        const double w = std::sqrt(u.x * u.x * b * b * c * c + u.y * u.y * a * a * c * c +
                                   u.z * u.z * a * a * b * b);
        if (rng.uniform() * wmax <= w) return {a * u.x, b * u.y, c * u.z};
      }
    }
    case ShapeKind::Disk: {
      const double rr = spec.a * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      return {rr * std::cos(phi), rr * std::sin(phi), 0.0};
    }
    case ShapeKind::Capsule: {
      const double r = spec.a, h = spec.b;
      const double side = 2.0 * M_PI * r * h, caps = 4.0 * M_PI * r * r;
      if (rng.uniform() * (side + caps) < side) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        return {r * std::cos(phi), r * std::sin(phi), rng.uniform(-h / 2, h / 2)};
      }
      const Vec3 u = sample_unit_sphere(rng);
      return {r * u.x, r * u.y, r * u.z + (u.z >= 0.0 ? h / 2 : -h / 2)};
    }
    case ShapeKind::Cross: {
      const double hl = spec.a / 2, hw = spec.b / 2;
      for (;;) {
        const int arm = static_cast<int>(rng.uniform_index(3));
        Vec3 p = sample_box_surface(arm == 0 ? hl : hw, arm == 1 ? hl : hw,
                                    arm == 2 ? hl : hw, rng);
        const bool inside_x = arm != 0 && strictly_inside_box(p, hl, hw, hw);
        const bool inside_y = arm != 1 && strictly_inside_box(p, hw, hl, hw);
        const bool inside_z = arm != 2 && strictly_inside_box(p, hw, hw, hl);
        if (!inside_x && !inside_y && !inside_z) return p;
      }
    }
  }
  throw std::invalid_argument("sample_shape: unknown shape kind");
}

inline void validate_spec(const ShapeSpec& spec) {
  if (!(spec.a > 0.0)) throw std::invalid_argument("sample_shape: nonpositive primary dimension");
  switch (spec.kind) {
    case ShapeKind::Cube:
    case ShapeKind::Ellipsoid:
      if (!(spec.b > 0.0) || !(spec.c > 0.0))
        throw std::invalid_argument("sample_shape: nonpositive dimension");
      break;
    case ShapeKind::Cylinder:
    case ShapeKind::Cone:
    case ShapeKind::Pyramid:
    case ShapeKind::Capsule:
      if (!(spec.b > 0.0)) throw std::invalid_argument("sample_shape: nonpositive dimension");
      break;
    case ShapeKind::Torus:
      if (!(spec.b > 0.0) || !(spec.b < spec.a))
        throw std::invalid_argument("sample_shape: torus needs 0 < minor < major radius");
      break;
    case ShapeKind::Cross:
      if (!(spec.b > 0.0) || !(spec.b <= spec.a))
        throw std::invalid_argument("sample_shape: cross needs 0 < width <= length");
      break;
    default:
      break;
  }
}

}  // namespace detail

// analytic centroid of the ideal surface; cone and pyramid are the only
// asymmetric families (centered at z = 0 base, apex at z = h)
inline Vec3 shape_center(const ShapeSpec& spec) {
  switch (spec.kind) {
    case ShapeKind::Cone: {
      const double r = spec.a, h = spec.b;
      const double lat = M_PI * r * std::sqrt(r * r + h * h);
      const double base = M_PI * r * r;
      return {0.0, 0.0, lat * (h / 3.0) / (lat + base)};
    }
    case ShapeKind::Pyramid: {
      const double a = spec.a, h = spec.b;
      const double slant4 = 4.0 * 0.5 * a * std::sqrt(h * h + 0.25 * a * a);
      return {0.0, 0.0, slant4 * (h / 3.0) / (a * a + slant4)};
    }
    default:
      return {};
  }
}

// n approximately area-uniform surface points, deterministic in
// (spec, n, seed). The output is unit-ball normalized against the shape's
// analytic center, so e.g. sphere samples keep exactly unit norms.
inline PointCloud sample_shape(const ShapeSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_shape: n must be >= 1");
  detail::validate_spec(spec);
  Rng rng(mix_seed({static_cast<std::uint64_t>(spec.kind), n, seed}));
  const Vec3 center = shape_center(spec);
  PointCloud cloud;
  cloud.points.reserve(n);
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.push_back(detail::sample_raw(spec, rng) - center);
    radius = std::max(radius, cloud.points.back().norm());
  }
  if (radius <= 0.0) throw std::invalid_argument("sample_shape: degenerate sample");
  const double inv = 1.0 / radius;
  for (Vec3& p : cloud.points) p *= inv;
  return cloud;
}

inline ShapeKind shape_kind_from_class(int label) {
  if (label < 0 || label >= kNumShapeClasses)
    throw std::invalid_argument("shape_kind_from_class: label out of range");
  return static_cast<ShapeKind>(label);
}

}  // namespace pcadv

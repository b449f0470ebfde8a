#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcadv/point_cloud.hpp"
#include "pcadv/vec3.hpp"

namespace pcadv {

enum class MetricKind { L2Norm, Hausdorff, Chamfer, CountAdded, FarthestDistance, ClusterCount };

inline const char* metric_name(MetricKind k) {
  switch (k) {
    case MetricKind::L2Norm: return "l2_norm";
    case MetricKind::Hausdorff: return "hausdorff";
    case MetricKind::Chamfer: return "chamfer";
    case MetricKind::CountAdded: return "count_added";
    case MetricKind::FarthestDistance: return "farthest_distance";
    case MetricKind::ClusterCount: return "cluster_count";
  }
  return "unknown";
}

struct MetricValue {
  MetricKind kind;
  double value;
};

namespace detail {

// nearest point of `set` to q; strict < keeps the lowest index on ties
inline std::pair<double, std::size_t> nearest_squared(const PointCloud& set, const Vec3& q) {
  double best = squared_distance(set.points[0], q);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < set.size(); ++i) {
    const double d = squared_distance(set.points[i], q);
    if (d < best) {
      best = d;
      arg = i;
    }
  }
  return {best, arg};
}

}  // namespace detail

// Euclidean norm of the flattened 3n-vector of coordinate differences.
// Requires index-wise correspondence (only meaningful for perturbations).
inline MetricValue lp_perturbation(const PointCloud& original, const PointCloud& perturbed) {
  if (original.size() != perturbed.size())
    throw std::invalid_argument("lp_perturbation: cardinality mismatch (" +
                                std::to_string(original.size()) + " vs " +
                                std::to_string(perturbed.size()) + ")");
  if (original.empty()) throw std::invalid_argument("lp_perturbation: empty cloud");
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i)
    sum += squared_distance(original.points[i], perturbed.points[i]);
  return {MetricKind::L2Norm, std::sqrt(sum)};
}

// One-sided: max over adversarial points of the squared distance to the
// nearest original point. The reverse term is deliberately absent — the
// original set is never modified by the attacks that use this.
inline MetricValue hausdorff(const PointCloud& original, const PointCloud& adversarial) {
  if (original.empty() || adversarial.empty())
    throw std::invalid_argument("hausdorff: empty point set");
  double worst = 0.0;
  bool first = true;
  for (const Vec3& y : adversarial.points) {
    const double d = detail::nearest_squared(original, y).first;
    if (first || d > worst) worst = d;
    first = false;
  }
  return {MetricKind::Hausdorff, worst};
}

// Mean (instead of max) of the squared nearest distances.
inline MetricValue chamfer(const PointCloud& original, const PointCloud& adversarial) {
  if (original.empty() || adversarial.empty())
    throw std::invalid_argument("chamfer: empty point set");
  double sum = 0.0;
  for (const Vec3& y : adversarial.points) sum += detail::nearest_squared(original, y).first;
  return {MetricKind::Chamfer, sum / static_cast<double>(adversarial.size())};
}

// Number of added points whose (unsquared) nearest distance to the original
// set exceeds t_thre. Report-only: not differentiable, never an objective.
inline MetricValue count_added(const PointCloud& original, const PointCloud& added,
                               double t_thre) {
  if (original.empty()) throw std::invalid_argument("count_added: empty original set");
  if (t_thre < 0.0) throw std::invalid_argument("count_added: negative threshold");
  double count = 0.0;
  for (const Vec3& y : added.points) {
    if (std::sqrt(detail::nearest_squared(original, y).first) > t_thre) count += 1.0;
  }
  return {MetricKind::CountAdded, count};
}

// Diameter of a point set: max pairwise Euclidean distance (unsquared).
inline MetricValue farthest_distance(const PointCloud& cluster) {
  if (cluster.empty()) throw std::invalid_argument("farthest_distance: empty point set");
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < cluster.size(); ++i)
    for (std::size_t j = i + 1; j < cluster.size(); ++j)
      worst = std::max(worst, squared_distance(cluster.points[i], cluster.points[j]));
  return {MetricKind::FarthestDistance, std::sqrt(worst)};
}

// Gradient of the metric value w.r.t. each adversarial point. At the
// nondifferentiable ties of min/max the lowest-index argument wins, matching
// the value computations above, so value and gradient always agree.
inline std::vector<Vec3> metric_gradient(MetricKind kind, const PointCloud& original,
                                         const PointCloud& adversarial) {
  std::vector<Vec3> grad(adversarial.size());
  switch (kind) {
    case MetricKind::L2Norm: {
      const double d = lp_perturbation(original, adversarial).value;
      if (d > 0.0) {
        for (std::size_t i = 0; i < adversarial.size(); ++i)
          grad[i] = (adversarial.points[i] - original.points[i]) / d;
      }
      return grad;
    }
    case MetricKind::Hausdorff: {
      if (original.empty() || adversarial.empty())
        throw std::invalid_argument("metric_gradient: empty point set");
      double worst = -1.0;
      std::size_t arg_y = 0, arg_x = 0;
      for (std::size_t j = 0; j < adversarial.size(); ++j) {
        const auto [d, i] = detail::nearest_squared(original, adversarial.points[j]);
        if (d > worst) {  // strict > keeps the lowest adversarial index on ties
          worst = d;
          arg_y = j;
          arg_x = i;
        }
      }
      grad[arg_y] = (adversarial.points[arg_y] - original.points[arg_x]) * 2.0;
      return grad;
    }
    case MetricKind::Chamfer: {
      if (original.empty() || adversarial.empty())
        throw std::invalid_argument("metric_gradient: empty point set");
      const double scale = 2.0 / static_cast<double>(adversarial.size());
      for (std::size_t j = 0; j < adversarial.size(); ++j) {
        const std::size_t i = detail::nearest_squared(original, adversarial.points[j]).second;
        grad[j] = (adversarial.points[j] - original.points[i]) * scale;
      }
      return grad;
    }
    case MetricKind::FarthestDistance: {
      if (adversarial.empty()) throw std::invalid_argument("metric_gradient: empty point set");
      double worst = 0.0;
      std::size_t a = 0, b = 0;
      for (std::size_t i = 0; i + 1 < adversarial.size(); ++i) {
        for (std::size_t j = i + 1; j < adversarial.size(); ++j) {
          const double d = squared_distance(adversarial.points[i], adversarial.points[j]);
          if (d > worst) {  // lexicographically lowest pair on ties
            worst = d;
            a = i;
            b = j;
          }
        }
      }
      if (worst > 0.0) {
        const Vec3 u = (adversarial.points[a] - adversarial.points[b]) / std::sqrt(worst);
        grad[a] = u;
        grad[b] = -u;
      }
      return grad;
    }
    case MetricKind::CountAdded:
    case MetricKind::ClusterCount:
      throw std::invalid_argument(std::string("metric_gradient: ") + metric_name(kind) +
                                  " is not differentiable");
  }
  throw std::invalid_argument("metric_gradient: unknown metric kind");
}

}  // namespace pcadv

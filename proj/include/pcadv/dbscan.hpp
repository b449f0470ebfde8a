#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pcadv/point_cloud.hpp"

namespace pcadv {

enum class DbscanRole { Core, Border, Noise };

struct DbscanResult {
  std::vector<int> cluster;      // cluster id per point, -1 for outliers
  std::vector<DbscanRole> role;  // core / border (density-reachable) / noise
  int num_clusters = 0;

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> out(num_clusters);
    for (std::size_t i = 0; i < cluster.size(); ++i)
      if (cluster[i] >= 0) out[cluster[i]].push_back(static_cast<int>(i));
    return out;
  }
};

// Classic density-based clustering. Seed points are visited in index order and
// neighborhoods are enumerated in index order, so the labeling is a pure
// function of the point sequence. Neighborhoods use distance <= eps and
// include the point itself. Brute-force O(n^2), which is the whole point at
// this scale: no index structure to keep consistent with the reference oracle.
inline DbscanResult dbscan(const PointCloud& points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  const double eps2 = eps * eps;
  auto neighbors = [&](std::size_t i) {
    std::vector<int> out;
    for (std::size_t j = 0; j < n; ++j)
      if (squared_distance(points.points[i], points.points[j]) <= eps2)
        out.push_back(static_cast<int>(j));
    return out;
  };

  DbscanResult res;
  res.cluster.assign(n, -1);
  res.role.assign(n, DbscanRole::Noise);
  std::vector<char> visited(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    std::vector<int> seed = neighbors(i);
    if (static_cast<int>(seed.size()) < min_pts) continue;  // noise unless claimed later
    const int cid = res.num_clusters++;
    res.cluster[i] = cid;
    res.role[i] = DbscanRole::Core;
    // expand: frontier is processed in discovery order
    for (std::size_t at = 0; at < seed.size(); ++at) {
      const int j = seed[at];
      if (res.cluster[j] < 0) {
        res.cluster[j] = cid;
        res.role[j] = DbscanRole::Border;
      }
      if (visited[j]) continue;
      visited[j] = 1;
      std::vector<int> nb = neighbors(static_cast<std::size_t>(j));
      if (static_cast<int>(nb.size()) >= min_pts) {
        res.role[j] = DbscanRole::Core;
        seed.insert(seed.end(), nb.begin(), nb.end());
      }
    }
  }
  return res;
}

}  // namespace pcadv

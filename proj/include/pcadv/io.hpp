#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pcadv/point_cloud.hpp"

namespace pcadv {

static_assert(std::endian::native == std::endian::little,
              "binary PLY writer assumes a little-endian host");

// Plain-text interchange: first line point count, then one "x y z" line per
// point with 9 significant digits.
inline void save_cloud_text(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_cloud_text: cannot open " + path.string());
  out << cloud.size() << "\n";
  char line[128];
  for (const Vec3& p : cloud.points) {
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << line;
  }
  if (!out) throw std::runtime_error("save_cloud_text: write failed for " + path.string());
}

inline PointCloud load_cloud_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cloud_text: cannot open " + path.string());
  std::size_t n = 0;
  if (!(in >> n) || n == 0)
    throw std::runtime_error("load_cloud_text: bad point count in " + path.string());
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    if (!(in >> p.x >> p.y >> p.z))
      throw std::runtime_error("load_cloud_text: truncated file " + path.string());
    cloud.points.push_back(p);
  }
  return cloud;
}

// Binary little-endian PLY, x/y/z as 32-bit floats.
inline void save_cloud_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_cloud_ply: cannot open " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Vec3& p : cloud.points) {
    const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z)};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  if (!out) throw std::runtime_error("save_cloud_ply: write failed for " + path.string());
}

inline PointCloud load_cloud_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_cloud_ply: cannot open " + path.string());
  std::string line;
  std::size_t n = 0;
  bool header_done = false, little_endian = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      little_endian = (fmt == "binary_little_endian");
    } else if (tok == "element") {
      std::string what;
      ls >> what >> n;
      if (what != "vertex")
        throw std::runtime_error("load_cloud_ply: unsupported element '" + what + "'");
    }
  }
  if (!header_done || !little_endian || n == 0)
    throw std::runtime_error("load_cloud_ply: unsupported or malformed header in " +
                             path.string());
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float xyz[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    if (!in) throw std::runtime_error("load_cloud_ply: truncated payload in " + path.string());
    cloud.points.push_back({xyz[0], xyz[1], xyz[2]});
  }
  return cloud;
}

}  // namespace pcadv

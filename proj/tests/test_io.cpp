#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pcadv/io.hpp"
#include "pcadv/rng.hpp"

#include "oracles.hpp"

using namespace pcadv;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pcadv_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("text cloud round trip") {
  TempDir tmp;
  Rng rng(3);
  const PointCloud c = oracle::random_cloud(rng, 50);
  save_cloud_text(c, tmp.path / "c.txt");
  const PointCloud back = load_cloud_text(tmp.path / "c.txt");
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(distance(back.points[i], c.points[i]) < 1e-8);  // 9 significant digits
  SECTION("header line carries the count") {
    std::ifstream in(tmp.path / "c.txt");
    std::string first;
    std::getline(in, first);
    CHECK(first == "50");
  }
}

TEST_CASE("binary ply round trip is float32-exact") {
  TempDir tmp;
  Rng rng(5);
  const PointCloud c = oracle::random_cloud(rng, 33);
  save_cloud_ply(c, tmp.path / "a.ply");
  // file -> memory -> file must reproduce the bytes: float32 is the storage
  // precision and loading promotes losslessly
  const PointCloud once = load_cloud_ply(tmp.path / "a.ply");
  save_cloud_ply(once, tmp.path / "b.ply");
  const PointCloud twice = load_cloud_ply(tmp.path / "b.ply");
  std::ifstream fa(tmp.path / "a.ply", std::ios::binary), fb(tmp.path / "b.ply", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  REQUIRE(twice.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice.points[i] == once.points[i]);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(distance(once.points[i], c.points[i]) < 1e-6);  // float32 quantization only
}

TEST_CASE("ply writes are byte deterministic") {
  TempDir tmp;
  Rng rng(9);
  const PointCloud c = oracle::random_cloud(rng, 20);
  save_cloud_ply(c, tmp.path / "a.ply");
  save_cloud_ply(c, tmp.path / "b.ply");
  std::ifstream a(tmp.path / "a.ply", std::ios::binary), b(tmp.path / "b.ply", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("io failures raise") {
  CHECK_THROWS_AS(load_cloud_text("/nonexistent/nowhere.txt"), std::runtime_error);
  CHECK_THROWS_AS(load_cloud_ply("/nonexistent/nowhere.ply"), std::runtime_error);
  TempDir tmp;
  {
    std::ofstream bad(tmp.path / "bad.txt");
    bad << "3\n0 0 0\n";  // truncated
  }
  CHECK_THROWS_AS(load_cloud_text(tmp.path / "bad.txt"), std::runtime_error);
  {
    std::ofstream bad(tmp.path / "bad.ply", std::ios::binary);
    bad << "ply\nformat ascii 1.0\nelement vertex 1\nend_header\n0 0 0\n";
  }
  CHECK_THROWS_AS(load_cloud_ply(tmp.path / "bad.ply"), std::runtime_error);
}

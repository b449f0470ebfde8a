#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcadv/io.hpp"
#include "pcadv/point_cloud.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/shapes.hpp"

namespace pcadv {

enum class Split { Train, Test };

struct Example {
  PointCloud cloud;
  int label = 0;
  Split split = Split::Train;
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<std::string> class_names;
  int points_per_cloud = 0;
  std::uint64_t seed = 0;

  int classes() const { return static_cast<int>(class_names.size()); }

  std::vector<int> indices(Split s) const {
    std::vector<int> ix;
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (examples[i].split == s) ix.push_back(static_cast<int>(i));
    return ix;
  }

  std::vector<int> indices(Split s, int label) const {
    std::vector<int> ix;
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (examples[i].split == s && examples[i].label == label)
        ix.push_back(static_cast<int>(i));
    return ix;
  }
};

// Synthetic 10-class dataset: per-example shape parameters jittered +-20%
// so classes are non-degenerate, 80/20 train/test split per class,
// every draw keyed by (seed, class, index) so generation order never matters.
inline Dataset generate_dataset(int n_per_class, int points_per_cloud, std::uint64_t seed,
                                int num_classes = kNumShapeClasses) {
  if (n_per_class < 1 || points_per_cloud < 1)
    throw std::invalid_argument("generate_dataset: counts must be >= 1");
  if (num_classes < 2 || num_classes > kNumShapeClasses)
    throw std::invalid_argument("generate_dataset: class count must be in [2, 10]");
  Dataset ds;
  ds.points_per_cloud = points_per_cloud;
  ds.seed = seed;
  for (int c = 0; c < num_classes; ++c) ds.class_names.push_back(shape_class_names()[c]);
  const int n_train = (n_per_class * 4 + 4) / 5;  // ceil(0.8 n)
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng jitter(mix_seed({seed, 0x4a49u, static_cast<std::uint64_t>(c),
                           static_cast<std::uint64_t>(i)}));
      ShapeSpec spec = default_spec(static_cast<ShapeKind>(c));
      spec.a *= jitter.uniform(0.8, 1.2);
      spec.b *= jitter.uniform(0.8, 1.2);
      spec.c *= jitter.uniform(0.8, 1.2);
      const std::uint64_t sample_seed = mix_seed(
          {seed, 0x5350u, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      Example ex;
      ex.cloud = sample_shape(spec, static_cast<std::size_t>(points_per_cloud), sample_seed);
      ex.label = c;
      ex.split = i < n_train ? Split::Train : Split::Test;
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

inline std::string example_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cloud_%05d.txt", index);
  return buf;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["class_names"] = ds.class_names;
  manifest["points_per_cloud"] = ds.points_per_cloud;
  manifest["seed"] = ds.seed;
  nlohmann::json exs = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const Example& ex = ds.examples[i];
    exs.push_back({{"file", example_filename(static_cast<int>(i))},
                   {"label", ex.label},
                   {"split", ex.split == Split::Train ? "train" : "test"}});
    save_cloud_text(ex.cloud, dir / example_filename(static_cast<int>(i)));
  }
  manifest["examples"] = std::move(exs);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("save_dataset: cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("load_dataset: missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_dataset: corrupt manifest in " + dir.string() + ": " +
                             e.what());
  }
  Dataset ds;
  try {
    ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    ds.points_per_cloud = manifest.at("points_per_cloud").get<int>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& j : manifest.at("examples")) {
      Example ex;
      ex.label = j.at("label").get<int>();
      const std::string split = j.at("split").get<std::string>();
      if (split != "train" && split != "test")
        throw std::runtime_error("load_dataset: bad split tag '" + split + "'");
      ex.split = split == "train" ? Split::Train : Split::Test;
      ex.cloud = load_cloud_text(dir / j.at("file").get<std::string>());
      if (ex.label < 0 || ex.label >= ds.classes())
        throw std::runtime_error("load_dataset: label out of range in manifest");
      ds.examples.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_dataset: corrupt manifest in " + dir.string() + ": " +
                             e.what());
  }
  return ds;
}

}  // namespace pcadv

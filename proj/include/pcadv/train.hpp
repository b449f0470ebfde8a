#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/adam.hpp"
#include "pcadv/dataset.hpp"
#include "pcadv/model.hpp"
#include "pcadv/rng.hpp"

namespace pcadv {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  AdamConfig adam;  // lr 1e-3, decays 0.9/0.999, eps 1e-8
  std::uint64_t seed = 0;
  ModelConfig model;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

inline ModelParams train_model(const Dataset& ds, const TrainConfig& cfg,
                               TrainStats* stats = nullptr) {
  if (cfg.epochs < 0 || cfg.batch_size < 1)
    throw std::invalid_argument("train_model: bad epochs/batch size");
  const std::vector<int> train_ix = ds.indices(Split::Train);
  if (train_ix.empty()) throw std::invalid_argument("train_model: empty train split");
  ModelConfig mc = cfg.model;
  mc.classes = ds.classes();
  mc.points_hint = ds.points_per_cloud;
  ModelParams params = init_model(mc, cfg.seed);
  if (cfg.epochs == 0) return params;

  ModelParams grad = zero_like(params);
  std::vector<double> flat, gflat;
  params_to_vector(params, flat);
  AdamOptimizer adam(flat.size(), cfg.adam);
  Rng shuffler(mix_seed({cfg.seed, 0x7261u}));
  std::vector<int> order = train_ix;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::vector<LabeledCloud> batch;
      for (std::size_t j = at; j < std::min(order.size(), at + cfg.batch_size); ++j)
        batch.push_back({&ds.examples[order[j]].cloud, ds.examples[order[j]].label});
      const double loss = param_gradient(params, batch, grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_model: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch));
      loss_sum += loss;
      ++batches;
      params_to_vector(grad, gflat);
      adam.step(flat, gflat);
      vector_to_params(flat, params);
    }
    if (stats) stats->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  if (!params.all_finite())
    throw std::runtime_error("train_model: parameters diverged (non-finite) at epoch " +
                             std::to_string(cfg.epochs - 1));
  return params;
}

// Fraction of split examples whose lowest-index argmax logit equals the label.
inline double evaluate_accuracy(const ModelParams& params, const Dataset& ds, Split split) {
  const std::vector<int> ix = ds.indices(split);
  if (ix.empty()) throw std::invalid_argument("evaluate_accuracy: empty split");
  ForwardWorkspace ws;
  int hits = 0;
  for (int i : ix) {
    if (predicted_class(forward_ws(params, ds.examples[i].cloud, ws)) == ds.examples[i].label)
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ix.size());
}

}  // namespace pcadv

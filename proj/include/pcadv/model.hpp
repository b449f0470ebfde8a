#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/point_cloud.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/vec3.hpp"

namespace pcadv {

using Logits = Eigen::VectorXd;

struct ModelConfig {
  std::vector<int> point_widths{32, 64, 128};  // shared per-point MLP, input is 3
  std::vector<int> head_widths{64};            // post-pooling classifier, hidden widths
  int classes = 10;
  int points_hint = 256;  // cardinality the model is trained with (metadata only)
};

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Shared-MLP + max-pool + head classifier. ReLU after every layer except the
// final logit layer. Immutable after construction as far as inference is
// concerned; all operations below are pure functions over const params.
struct ModelParams {
  std::vector<DenseLayer> point_layers;
  std::vector<DenseLayer> head_layers;
  int points_hint = 0;

  int classes() const {
    return head_layers.empty() ? 0 : static_cast<int>(head_layers.back().W.rows());
  }
  int feature_width() const {
    return point_layers.empty() ? 0 : static_cast<int>(point_layers.back().W.rows());
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : point_layers) n += l.W.size() + l.b.size();
    for (const auto& l : head_layers) n += l.W.size() + l.b.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& ls : {&point_layers, &head_layers})
      for (const auto& l : *ls)
        if (!l.W.allFinite() || !l.b.allFinite()) return false;
    return true;
  }
};

inline void validate_shapes(const ModelParams& p) {
  if (p.point_layers.empty() || p.head_layers.empty())
    throw std::invalid_argument("model: empty layer stack");
  int in = 3;
  for (const auto& l : p.point_layers) {
    if (l.W.cols() != in || l.b.size() != l.W.rows())
      throw std::invalid_argument("model: per-point layer shape mismatch");
    in = static_cast<int>(l.W.rows());
  }
  for (const auto& l : p.head_layers) {
    if (l.W.cols() != in || l.b.size() != l.W.rows())
      throw std::invalid_argument("model: head layer shape mismatch");
    in = static_cast<int>(l.W.rows());
  }
}

inline ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.point_widths.empty() || cfg.classes < 2)
    throw std::invalid_argument("init_model: bad config");
  Rng rng(mix_seed({0x1217ULL, seed}));
  ModelParams p;
  p.points_hint = cfg.points_hint;
  auto make_layer = [&rng](int rows, int cols) {
    DenseLayer l;
    l.W.resize(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(cols));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) l.W(i, j) = rng.uniform(-limit, limit);
    l.b = Eigen::VectorXd::Zero(rows);
    return l;
  };
  int in = 3;
  for (int w : cfg.point_widths) {
    p.point_layers.push_back(make_layer(w, in));
    in = w;
  }
  for (int w : cfg.head_widths) {
    p.head_layers.push_back(make_layer(w, in));
    in = w;
  }
  p.head_layers.push_back(make_layer(cfg.classes, in));
  validate_shapes(p);
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass

struct ForwardWorkspace {
  Eigen::MatrixXd input;                    // 3 x n
  std::vector<Eigen::MatrixXd> point_acts;  // post-ReLU per layer, width x n
  Eigen::VectorXd pooled;                   // feature_width
  std::vector<int> pool_src;                // column credited per channel
  std::vector<Eigen::VectorXd> head_acts;   // post-ReLU hidden activations
  Logits logits;
  // scratch for backward
  Eigen::MatrixXd d_cur, d_prev;
  std::vector<int> credited_cols;
};

namespace detail {

// channelwise max over columns [first_col, n); strict > keeps the lowest
// column index, which is the tie-break every gradient consumer relies on
inline void pool_columns(const Eigen::MatrixXd& acts, Eigen::VectorXd& pooled,
                         std::vector<int>& src, int first_col, int col_offset) {
  const int rows = static_cast<int>(acts.rows());
  const int cols = static_cast<int>(acts.cols());
  for (int j = first_col; j < cols; ++j) {
    for (int ch = 0; ch < rows; ++ch) {
      const double v = acts(ch, j);
      if (v > pooled[ch]) {
        pooled[ch] = v;
        src[ch] = j + col_offset;
      }
    }
  }
}

inline void head_forward(const ModelParams& p, const Eigen::VectorXd& pooled,
                         std::vector<Eigen::VectorXd>& head_acts, Logits& logits) {
  const std::size_t hk = p.head_layers.size();
  head_acts.resize(hk > 0 ? hk - 1 : 0);
  const Eigen::VectorXd* cur = &pooled;
  for (std::size_t k = 0; k + 1 < hk; ++k) {
    head_acts[k].noalias() = p.head_layers[k].W * (*cur);
    head_acts[k] += p.head_layers[k].b;
    head_acts[k] = head_acts[k].cwiseMax(0.0);
    cur = &head_acts[k];
  }
  logits.noalias() = p.head_layers.back().W * (*cur);
  logits += p.head_layers.back().b;
}

inline void point_stack_forward(const ModelParams& p, ForwardWorkspace& ws) {
  const Eigen::MatrixXd* cur = &ws.input;
  ws.point_acts.resize(p.point_layers.size());
  for (std::size_t l = 0; l < p.point_layers.size(); ++l) {
    Eigen::MatrixXd& act = ws.point_acts[l];
    act.noalias() = p.point_layers[l].W * (*cur);
    act.colwise() += p.point_layers[l].b;
    act = act.cwiseMax(0.0);
    cur = &act;
  }
}

}  // namespace detail

inline const Logits& forward_ws(const ModelParams& p, const PointCloud& cloud,
                                ForwardWorkspace& ws) {
  if (cloud.empty()) throw std::invalid_argument("forward: empty cloud");
  const int n = static_cast<int>(cloud.size());
  ws.input.resize(3, n);
  for (int j = 0; j < n; ++j) {
    ws.input(0, j) = cloud.points[j].x;
    ws.input(1, j) = cloud.points[j].y;
    ws.input(2, j) = cloud.points[j].z;
  }
  detail::point_stack_forward(p, ws);
  const Eigen::MatrixXd& feats = ws.point_acts.back();
  const int fw = static_cast<int>(feats.rows());
  ws.pooled = feats.col(0);
  ws.pool_src.assign(fw, 0);
  detail::pool_columns(feats, ws.pooled, ws.pool_src, 1, 0);
  detail::head_forward(p, ws.pooled, ws.head_acts, ws.logits);
  return ws.logits;
}

inline Logits forward(const ModelParams& p, const PointCloud& cloud) {
  ForwardWorkspace ws;
  return forward_ws(p, cloud, ws);
}

// lowest-index argmax
inline int predicted_class(const Logits& logits) {
  int arg = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[arg]) arg = i;
  return arg;
}

// ---------------------------------------------------------------------------
// Adversarial hinge loss

struct HingeLoss {
  double value = 0.0;
  int attacker = -1;  // argmax over non-target classes (lowest index on ties)
  Eigen::VectorXd grad;
};

// f = (max_{i != target} z_i - z_target)^+ with subgradient 0 at the clamp
inline HingeLoss adversarial_loss(const Logits& logits, int target) {
  const int c = static_cast<int>(logits.size());
  if (target < 0 || target >= c)
    throw std::invalid_argument("adversarial_loss: target class " + std::to_string(target) +
                                " out of range [0, " + std::to_string(c) + ")");
  HingeLoss out;
  out.grad = Eigen::VectorXd::Zero(c);
  for (int i = 0; i < c; ++i) {
    if (i == target) continue;
    if (out.attacker < 0 || logits[i] > logits[out.attacker]) out.attacker = i;
  }
  const double margin = logits[out.attacker] - logits[target];
  if (margin > 0.0) {
    out.value = margin;
    out.grad[out.attacker] = 1.0;
    out.grad[target] = -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward passes

namespace detail {

// dlogits -> d pooled; optionally accumulates head parameter gradients
inline void head_backward(const ModelParams& p, const ForwardWorkspace& ws,
                          const Eigen::VectorXd& dlogits, Eigen::VectorXd& dpooled,
                          std::vector<DenseLayer>* head_grad) {
  const std::size_t hk = p.head_layers.size();
  Eigen::VectorXd d = dlogits;
  for (std::size_t k = hk; k-- > 0;) {
    const Eigen::VectorXd& in_act = (k == 0) ? ws.pooled : ws.head_acts[k - 1];
    if (head_grad) {
      (*head_grad)[k].W.noalias() += d * in_act.transpose();
      (*head_grad)[k].b += d;
    }
    Eigen::VectorXd dn = p.head_layers[k].W.transpose() * d;
    if (k > 0) dn = dn.cwiseProduct((ws.head_acts[k - 1].array() > 0.0).cast<double>().matrix());
    d.swap(dn);
  }
  dpooled = d;
}

// Backprop from the pooled feature gradient to input columns. Only columns
// credited by the max pool carry signal, so the whole chain runs on that
// gathered subset. Optionally accumulates per-point-layer parameter grads.
inline void point_stack_backward(const ModelParams& p, ForwardWorkspace& ws,
                                 const Eigen::VectorXd& dpooled,
                                 std::vector<DenseLayer>* point_grad,
                                 Eigen::MatrixXd* dinput_cols) {
  const int fw = static_cast<int>(ws.pooled.size());
  const int n = static_cast<int>(ws.input.cols());
  // collect credited columns in ascending order
  std::vector<int>& cols = ws.credited_cols;
  cols.clear();
  std::vector<int> slot(n, -1);
  for (int ch = 0; ch < fw; ++ch) {
    if (dpooled[ch] == 0.0) continue;
    const int c = ws.pool_src[ch];
    if (slot[c] < 0) {
      slot[c] = static_cast<int>(cols.size());
      cols.push_back(c);
    }
  }
  // keep column order ascending for deterministic accumulation
  std::sort(cols.begin(), cols.end());
  for (std::size_t s = 0; s < cols.size(); ++s) slot[cols[s]] = static_cast<int>(s);
  const int m = static_cast<int>(cols.size());
  if (dinput_cols) dinput_cols->setZero(3, m);
  if (m == 0) return;

  Eigen::MatrixXd& d_cur = ws.d_cur;
  d_cur.setZero(fw, m);
  for (int ch = 0; ch < fw; ++ch) {
    if (dpooled[ch] != 0.0) d_cur(ch, slot[ws.pool_src[ch]]) += dpooled[ch];
  }
  const std::size_t nl = p.point_layers.size();
  for (std::size_t l = nl; l-- > 0;) {
    const Eigen::MatrixXd& act = ws.point_acts[l];
    // ReLU mask of this layer's output, restricted to the gathered columns
    for (int s = 0; s < m; ++s) {
      const int c = cols[s];
      for (int ch = 0; ch < d_cur.rows(); ++ch)
        if (act(ch, c) <= 0.0) d_cur(ch, s) = 0.0;
    }
    if (point_grad) {
      DenseLayer& g = (*point_grad)[l];
      for (int s = 0; s < m; ++s) {
        const int c = cols[s];
        const auto in_col = (l == 0) ? ws.input.col(c) : ws.point_acts[l - 1].col(c);
        g.W.noalias() += d_cur.col(s) * in_col.transpose();
        g.b += d_cur.col(s);
      }
    }
    if (l == 0) {
      if (dinput_cols) dinput_cols->noalias() = p.point_layers[0].W.transpose() * d_cur;
      break;
    }
    ws.d_prev.noalias() = p.point_layers[l].W.transpose() * d_cur;
    d_cur.swap(ws.d_prev);
  }
}

}  // namespace detail

struct HingeEval {
  double hinge = 0.0;
  int predicted = -1;
};

// Forward + hinge + gradient w.r.t. every input point, sharing one workspace
// across calls. grad_out may be null for a value-only evaluation.
inline HingeEval forward_hinge_full(const ModelParams& p, const PointCloud& cloud, int target,
                                    ForwardWorkspace& ws, std::vector<Vec3>* grad_out) {
  const Logits& logits = forward_ws(p, cloud, ws);
  const HingeLoss loss = adversarial_loss(logits, target);
  HingeEval ev{loss.value, predicted_class(logits)};
  if (!grad_out) return ev;
  grad_out->assign(cloud.size(), Vec3{});
  if (loss.value <= 0.0) return ev;  // clamped hinge: zero subgradient
  Eigen::VectorXd dpooled;
  detail::head_backward(p, ws, loss.grad, dpooled, nullptr);
  Eigen::MatrixXd dcols;
  detail::point_stack_backward(p, ws, dpooled, nullptr, &dcols);
  for (std::size_t s = 0; s < ws.credited_cols.size(); ++s) {
    const int c = ws.credited_cols[s];
    (*grad_out)[c] = {dcols(0, s), dcols(1, s), dcols(2, s)};
  }
  return ev;
}

// d adversarial_loss / d point coordinates
inline std::vector<Vec3> input_gradient(const ModelParams& p, const PointCloud& cloud,
                                        int target) {
  ForwardWorkspace ws;
  std::vector<Vec3> grad;
  forward_hinge_full(p, cloud, target, ws, &grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Training gradient (softmax cross-entropy, mean over batch)

struct LabeledCloud {
  const PointCloud* cloud;
  int label;
};

inline ModelParams zero_like(const ModelParams& p) {
  ModelParams g;
  g.points_hint = p.points_hint;
  for (const auto& l : p.point_layers)
    g.point_layers.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                              Eigen::VectorXd::Zero(l.b.size())});
  for (const auto& l : p.head_layers)
    g.head_layers.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                             Eigen::VectorXd::Zero(l.b.size())});
  return g;
}

// Returns the mean cross-entropy; fills `grad` (params-shaped container) with
// the mean gradient. Examples are reduced in index order.
inline double param_gradient(const ModelParams& p, const std::vector<LabeledCloud>& batch,
                             ModelParams& grad) {
  if (batch.empty()) throw std::invalid_argument("param_gradient: empty batch");
  const int c = p.classes();
  for (const auto& ex : batch)
    if (ex.label < 0 || ex.label >= c)
      throw std::invalid_argument("param_gradient: label " + std::to_string(ex.label) +
                                  " out of range [0, " + std::to_string(c) + ")");
  for (auto& l : grad.point_layers) {
    l.W.setZero();
    l.b.setZero();
  }
  for (auto& l : grad.head_layers) {
    l.W.setZero();
    l.b.setZero();
  }
  ForwardWorkspace ws;
  double loss_sum = 0.0;
  for (const auto& ex : batch) {
    const Logits& logits = forward_ws(p, *ex.cloud, ws);
    const double zmax = logits.maxCoeff();
    const Eigen::ArrayXd e = (logits.array() - zmax).exp();
    const double esum = e.sum();
    loss_sum += std::log(esum) - (logits[ex.label] - zmax);
    Eigen::VectorXd dlogits = (e / esum).matrix();
    dlogits[ex.label] -= 1.0;
    Eigen::VectorXd dpooled;
    detail::head_backward(p, ws, dlogits, dpooled, &grad.head_layers);
    detail::point_stack_backward(p, ws, dpooled, &grad.point_layers, nullptr);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& l : grad.point_layers) {
    l.W *= inv;
    l.b *= inv;
  }
  for (auto& l : grad.head_layers) {
    l.W *= inv;
    l.b *= inv;
  }
  return loss_sum * inv;
}

// ---------------------------------------------------------------------------
// Critical points

struct CriticalPointSet {
  std::vector<int> indices;         // ascending
  std::vector<int> channel_counts;  // per index; sums to feature_width
};

// Points that survive the max pool: for each global-feature channel the
// lowest-index point achieving the channel max gets the credit.
inline CriticalPointSet critical_points(const ModelParams& p, const PointCloud& cloud) {
  ForwardWorkspace ws;
  forward_ws(p, cloud, ws);
  std::vector<int> counts(cloud.size(), 0);
  for (int src : ws.pool_src) counts[src] += 1;
  CriticalPointSet out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      out.indices.push_back(static_cast<int>(i));
      out.channel_counts.push_back(counts[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling floor: fixed points contribute only through their channelwise max,
// so attacks that never move the original cloud fold it into a 1-vector and
// evaluate just the added points each iteration. Produces logits bit-identical
// to forward() on original.concat(added): the scan order and tie-breaks match.

struct PoolFloor {
  Eigen::VectorXd channel_max;
  int fixed_count = 0;
};

inline PoolFloor make_pool_floor(const ModelParams& p, const PointCloud& fixed) {
  ForwardWorkspace ws;
  forward_ws(p, fixed, ws);
  return {ws.pooled, static_cast<int>(fixed.size())};
}

struct FloorEval {
  Logits logits;
  double hinge = 0.0;
  int predicted = -1;
};

// Forward + hinge over the implicit union (floor's fixed cloud + movable),
// with the hinge gradient taken w.r.t. the movable points only. A movable
// point wins a channel only by strictly exceeding the floor, exactly as it
// would sitting after the fixed points in a full forward pass.
inline FloorEval forward_hinge_with_floor(const ModelParams& p, const PoolFloor& floor,
                                          const PointCloud& movable, int target,
                                          ForwardWorkspace& ws, std::vector<Vec3>* grad_out) {
  if (movable.empty()) throw std::invalid_argument("forward_hinge_with_floor: empty movable set");
  const int n = static_cast<int>(movable.size());
  ws.input.resize(3, n);
  for (int j = 0; j < n; ++j) {
    ws.input(0, j) = movable.points[j].x;
    ws.input(1, j) = movable.points[j].y;
    ws.input(2, j) = movable.points[j].z;
  }
  detail::point_stack_forward(p, ws);
  const Eigen::MatrixXd& feats = ws.point_acts.back();
  const int fw = static_cast<int>(feats.rows());
  ws.pooled = floor.channel_max;
  ws.pool_src.assign(fw, -1);  // -1: credited to the fixed cloud
  detail::pool_columns(feats, ws.pooled, ws.pool_src, 0, 0);
  detail::head_forward(p, ws.pooled, ws.head_acts, ws.logits);

  const HingeLoss loss = adversarial_loss(ws.logits, target);
  FloorEval ev;
  ev.logits = ws.logits;
  ev.hinge = loss.value;
  ev.predicted = predicted_class(ws.logits);
  if (!grad_out) return ev;
  grad_out->assign(movable.size(), Vec3{});
  if (loss.value <= 0.0) return ev;
  Eigen::VectorXd dpooled;
  detail::head_backward(p, ws, loss.grad, dpooled, nullptr);
  // channels won by the fixed cloud route nothing into the movable block
  for (int ch = 0; ch < fw; ++ch)
    if (ws.pool_src[ch] < 0) dpooled[ch] = 0.0;
  for (int ch = 0; ch < fw; ++ch)
    if (ws.pool_src[ch] < 0) ws.pool_src[ch] = 0;  // harmless placeholder, grad is zero
  Eigen::MatrixXd dcols;
  detail::point_stack_backward(p, ws, dpooled, nullptr, &dcols);
  for (std::size_t s = 0; s < ws.credited_cols.size(); ++s) {
    const int c = ws.credited_cols[s];
    (*grad_out)[c] = {dcols(0, s), dcols(1, s), dcols(2, s)};
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Flatten helpers (optimizer state and finite-difference tests)

inline std::size_t flat_size(const ModelParams& p) { return p.parameter_count(); }

inline void params_to_vector(const ModelParams& p, std::vector<double>& out) {
  out.clear();
  out.reserve(p.parameter_count());
  auto push = [&out](const DenseLayer& l) {
    for (int i = 0; i < l.W.rows(); ++i)
      for (int j = 0; j < l.W.cols(); ++j) out.push_back(l.W(i, j));
    for (int i = 0; i < l.b.size(); ++i) out.push_back(l.b[i]);
  };
  for (const auto& l : p.point_layers) push(l);
  for (const auto& l : p.head_layers) push(l);
}

inline void vector_to_params(const std::vector<double>& v, ModelParams& p) {
  if (v.size() != p.parameter_count())
    throw std::invalid_argument("vector_to_params: size mismatch");
  std::size_t at = 0;
  auto pull = [&v, &at](DenseLayer& l) {
    for (int i = 0; i < l.W.rows(); ++i)
      for (int j = 0; j < l.W.cols(); ++j) l.W(i, j) = v[at++];
    for (int i = 0; i < l.b.size(); ++i) l.b[i] = v[at++];
  };
  for (auto& l : p.point_layers) pull(l);
  for (auto& l : p.head_layers) pull(l);
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, architecture descriptor, then row-major
// float32 weight/bias blocks in layer order. Little-endian throughout.

inline constexpr char kCheckpointMagic[8] = {'P', 'C', 'A', 'D', 'V', 'C', 'K', '1'};

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  auto put_u32 = [&out](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put_u32(static_cast<std::uint32_t>(p.point_layers.size()));
  put_u32(static_cast<std::uint32_t>(p.head_layers.size()));
  put_u32(static_cast<std::uint32_t>(p.classes()));
  put_u32(static_cast<std::uint32_t>(p.points_hint));
  auto put_layer = [&out, &put_u32](const DenseLayer& l) {
    put_u32(static_cast<std::uint32_t>(l.W.rows()));
    put_u32(static_cast<std::uint32_t>(l.W.cols()));
    std::vector<float> buf;
    buf.reserve(l.W.size() + l.b.size());
    for (int i = 0; i < l.W.rows(); ++i)
      for (int j = 0; j < l.W.cols(); ++j) buf.push_back(static_cast<float>(l.W(i, j)));
    for (int i = 0; i < l.b.size(); ++i) buf.push_back(static_cast<float>(l.b[i]));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  };
  for (const auto& l : p.point_layers) put_layer(l);
  for (const auto& l : p.head_layers) put_layer(l);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  auto get_u32 = [&in, &path]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
    return v;
  };
  const std::uint32_t n_point = get_u32(), n_head = get_u32();
  const std::uint32_t classes = get_u32(), points_hint = get_u32();
  if (n_point == 0 || n_head == 0 || n_point + n_head > 64)
    throw std::runtime_error("load_checkpoint: implausible layer counts in " + path.string());
  ModelParams p;
  p.points_hint = static_cast<int>(points_hint);
  auto get_layer = [&in, &get_u32, &path]() {
    const std::uint32_t rows = get_u32(), cols = get_u32();
    if (rows == 0 || cols == 0 || rows > 65536 || cols > 65536)
      throw std::runtime_error("load_checkpoint: implausible layer shape in " + path.string());
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols + rows);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path.string());
    DenseLayer l;
    l.W.resize(rows, cols);
    std::size_t at = 0;
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) l.W(i, j) = buf[at++];
    l.b.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) l.b[i] = buf[at++];
    return l;
  };
  for (std::uint32_t i = 0; i < n_point; ++i) p.point_layers.push_back(get_layer());
  for (std::uint32_t i = 0; i < n_head; ++i) p.head_layers.push_back(get_layer());
  if (static_cast<std::uint32_t>(p.classes()) != classes)
    throw std::runtime_error("load_checkpoint: class count mismatch in " + path.string());
  if (!p.all_finite())
    throw std::runtime_error("load_checkpoint: non-finite parameter in " + path.string());
  validate_shapes(p);
  return p;
}

}  // namespace pcadv

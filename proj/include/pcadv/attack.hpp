#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcadv/adam.hpp"
#include "pcadv/dbscan.hpp"
#include "pcadv/metrics.hpp"
#include "pcadv/model.hpp"
#include "pcadv/point_cloud.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/shapes.hpp"

namespace pcadv {

enum class AttackKind { Perturb, AddPoints, Clusters, Objects };

inline const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::Perturb: return "perturb";
    case AttackKind::AddPoints: return "add-points";
    case AttackKind::Clusters: return "clusters";
    case AttackKind::Objects: return "objects";
  }
  return "unknown";
}

// Where initialize-and-shift takes its seed coordinates for independent
// points: the victim's own critical points (default), or pooled critical
// points of target-class examples.
enum class InitSource { Victim, TargetClass };

struct AttackConfig {
  int target = 0;
  MetricKind metric = MetricKind::Chamfer;  // distance for the add-points attack
  double lambda_init = 10.0;
  double lambda_lo = 1e-3;
  double lambda_hi = 1e4;
  int search_steps = 10;  // 10 for perturb/add-points, 5 for clusters/objects
  int inner_iters = 500;
  double learning_rate = 0.01;
  double mu = 0.1;  // 0.1 clusters / 0.2 objects
  int k = 3;        // cluster/object count, hard bounded to 1..3
  int points_per_cluster = 32;
  double t_thre = 0.01;
  double dbscan_eps = 0.15;
  int dbscan_min_pts = 4;
  InitSource init_source = InitSource::Victim;
  std::optional<PointCloud> template_cloud;  // objects attack; default: cross at 0.3 scale
  std::uint64_t seed = 0;
  // stop a lambda branch once the best objective stalls for a full check
  // window; disable to run exactly inner_iters steps
  bool early_abort = true;
};

inline AttackConfig default_attack_config(AttackKind kind, int target) {
  AttackConfig cfg;
  cfg.target = target;
  switch (kind) {
    case AttackKind::Perturb:
      cfg.metric = MetricKind::L2Norm;
      break;
    case AttackKind::AddPoints:
      cfg.metric = MetricKind::Chamfer;
      break;
    case AttackKind::Clusters:
      cfg.search_steps = 5;
      cfg.mu = 0.1;
      break;
    case AttackKind::Objects:
      cfg.search_steps = 5;
      cfg.mu = 0.2;
      break;
  }
  return cfg;
}

inline void check_attack_config(const AttackConfig& cfg) {
  if (cfg.search_steps < 1) throw std::invalid_argument("attack: search_steps must be >= 1");
  if (!(cfg.lambda_lo > 0.0) || !(cfg.lambda_lo <= cfg.lambda_hi))
    throw std::invalid_argument("attack: need 0 < lambda_lo <= lambda_hi");
  if (!(cfg.lambda_init > 0.0)) throw std::invalid_argument("attack: lambda_init must be > 0");
  if (cfg.inner_iters < 1) throw std::invalid_argument("attack: inner_iters must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("attack: learning_rate must be > 0");
  if (cfg.mu < 0.0) throw std::invalid_argument("attack: mu must be >= 0");
  if (cfg.k < 1 || cfg.k > 3)
    throw std::invalid_argument("attack: k must be in [1, 3], got " + std::to_string(cfg.k));
  if (cfg.points_per_cluster < 1)
    throw std::invalid_argument("attack: points_per_cluster must be >= 1");
  if (cfg.t_thre < 0.0) throw std::invalid_argument("attack: t_thre must be >= 0");
  if (cfg.target < 0) throw std::invalid_argument("attack: target class must be >= 0");
}

// ---------------------------------------------------------------------------
// Inner optimizer: Adam over one coordinate block at a fixed lambda

struct InnerEval {
  double f = 0.0;     // adversarial hinge
  double dist = 0.0;  // perturbation distance D for this attack
  bool hit = false;   // predicted class equals the target
};

struct InnerResult {
  std::vector<double> vars;  // best successful iterate if any, else the final one
  bool success = false;
  double dist = std::numeric_limits<double>::infinity();
  bool aborted = false;  // non-finite objective encountered
  int iterations = 0;
};

using InnerObserver = std::function<void(int iter, double f, double dist, double objective)>;

// Minimizes f + lambda*dist; keeps the iterate with the smallest dist among
// those classified as the target. Objective: (vars, lambda, grad_out) ->
// InnerEval, where grad_out (when non-null) receives d(f + lambda*dist)/dvars.
template <typename Objective>
InnerResult optimize_inner(Objective&& objective, std::vector<double> vars, double lambda,
                           const AttackConfig& cfg, const InnerObserver& observer = {}) {
  AdamOptimizer adam(vars.size(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<double> grad(vars.size(), 0.0);
  InnerResult out;
  double best_obj = std::numeric_limits<double>::infinity();
  double window_mark = std::numeric_limits<double>::infinity();
  const int window = std::max(20, cfg.inner_iters / 10);
  int it = 0;
  bool stalled = false;
  for (; it < cfg.inner_iters && !stalled; ++it) {
    const InnerEval ev = objective(vars, lambda, &grad);
    const double obj = ev.f + lambda * ev.dist;
    if (!std::isfinite(obj)) {
      out.aborted = true;
      break;
    }
    if (observer) observer(it, ev.f, ev.dist, obj);
    if (ev.hit && ev.dist < out.dist) {
      out.dist = ev.dist;
      out.vars = vars;
      out.success = true;
    }
    if (obj < best_obj) best_obj = obj;
    if (cfg.early_abort && (it + 1) % window == 0) {
      if (best_obj > window_mark - 1e-9 * (1.0 + std::abs(window_mark))) stalled = true;
      window_mark = best_obj;
    }
    adam.step(vars, grad);
  }
  out.iterations = it;
  if (out.aborted) {
    // a branch that blew up is reported as a failure even if an earlier
    // iterate had hit the target
    out.success = false;
    out.dist = std::numeric_limits<double>::infinity();
    out.vars = std::move(vars);
    return out;
  }
  const InnerEval fin = objective(vars, lambda, nullptr);
  const double fobj = fin.f + lambda * fin.dist;
  if (std::isfinite(fobj)) {
    if (observer) observer(it, fin.f, fin.dist, fobj);
    if (fin.hit && fin.dist < out.dist) {
      out.dist = fin.dist;
      out.vars = vars;
      out.success = true;
    }
  }
  if (!out.success) {
    out.dist = fin.dist;
    out.vars = std::move(vars);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lambda binary search

struct LambdaProbe {
  double lambda;
  bool success;
  double dist;
};

struct SearchOutcome {
  bool success = false;
  double best_lambda = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<double> best_vars;
  std::vector<LambdaProbe> trace;
  long long iterations = 0;
};

// Success at a lambda means the distance penalty can be tightened (raise
// lambda); failure means it was too tight (lower lambda). Doubling/halving
// until both outcomes have been seen, then bisection; the returned candidate
// has the smallest dist over every successful probe.
template <typename Body>  // InnerResult body(double lambda)
SearchOutcome lambda_search(Body&& body, const AttackConfig& cfg) {
  check_attack_config(cfg);
  SearchOutcome out;
  double lam = std::clamp(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi);
  double lo_success = -1.0, hi_fail = -1.0;
  for (int step = 0; step < cfg.search_steps; ++step) {
    InnerResult r = body(lam);
    out.iterations += r.iterations;
    out.trace.push_back({lam, r.success, r.dist});
    double next;
    if (r.success) {
      if (r.dist < out.best_dist) {
        out.best_dist = r.dist;
        out.best_lambda = lam;
        out.best_vars = std::move(r.vars);
        out.success = true;
      }
      lo_success = std::max(lo_success, lam);
      next = hi_fail > 0.0 ? 0.5 * (lam + hi_fail) : std::min(lam * 2.0, cfg.lambda_hi);
    } else {
      hi_fail = hi_fail > 0.0 ? std::min(hi_fail, lam) : lam;
      next = lo_success > 0.0 ? 0.5 * (lam + lo_success) : std::max(lam * 0.5, cfg.lambda_lo);
    }
    if (next == lam) break;  // pinned at a bracket edge
    lam = next;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct AttackMetrics {
  std::optional<double> l2;
  std::optional<double> hausdorff;
  std::optional<double> chamfer;
  std::optional<double> farthest;     // mean over clusters/objects
  std::optional<double> count_added;  // at t_thre
  std::optional<double> composite;    // the D the lambda search minimized
};

struct AttackResult {
  AttackKind kind = AttackKind::Perturb;
  bool success = false;
  int predicted = -1;  // full-forward re-verification on `adversarial`
  double best_lambda = 0.0;
  PointCloud adversarial;              // model input: perturbed victim, or victim + added
  std::vector<PointCloud> added_sets;  // generation attacks; original never moves
  // objects attack provenance, so every reported number recomputes from
  // stored clouds: world cloud i == apply_transform(deformed_templates[i], poses[i])
  PointCloud object_template;
  std::vector<PointCloud> deformed_templates;
  std::vector<RigidTransform> poses;
  AttackMetrics metrics;
  std::vector<LambdaProbe> trace;
  long long inner_iterations = 0;
};

struct ClusterSeed {
  Vec3 center;
  PointCloud initial_points;
};

// ---------------------------------------------------------------------------
// Perturbation attack: every original point owns a shift vector

inline AttackResult attack_perturb(const ModelParams& params, const PointCloud& victim,
                                   const AttackConfig& cfg) {
  check_attack_config(cfg);
  if (victim.empty()) throw std::invalid_argument("attack_perturb: empty victim");
  if (cfg.target >= params.classes())
    throw std::invalid_argument("attack_perturb: target class out of range");
  AttackResult res;
  res.kind = AttackKind::Perturb;

  ForwardWorkspace verify_ws;
  if (predicted_class(forward_ws(params, victim, verify_ws)) == cfg.target) {
    res.success = true;
    res.predicted = cfg.target;
    res.best_lambda = std::clamp(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi);
    res.adversarial = victim;
    res.trace.push_back({res.best_lambda, true, 0.0});
    res.metrics.l2 = 0.0;
    res.metrics.hausdorff = 0.0;
    res.metrics.chamfer = 0.0;
    res.metrics.count_added = 0.0;
    res.metrics.composite = 0.0;
    return res;
  }

  const std::size_t n = victim.size();
  ForwardWorkspace ws;
  PointCloud cur = victim;
  std::vector<Vec3> fgrad;
  auto objective = [&](const std::vector<double>& vars, double lambda,
                       std::vector<double>* grad) -> InnerEval {
    for (std::size_t i = 0; i < n; ++i) {
      cur.points[i] = victim.points[i] +
                      Vec3{vars[3 * i], vars[3 * i + 1], vars[3 * i + 2]};
    }
    const HingeEval he =
        forward_hinge_full(params, cur, cfg.target, ws, grad ? &fgrad : nullptr);
    double ss = 0.0;
    for (double v : vars) ss += v * v;
    const double dist = std::sqrt(ss);
    if (grad) {
      const double inv = dist > 0.0 ? lambda / dist : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        (*grad)[3 * i] = fgrad[i].x + inv * vars[3 * i];
        (*grad)[3 * i + 1] = fgrad[i].y + inv * vars[3 * i + 1];
        (*grad)[3 * i + 2] = fgrad[i].z + inv * vars[3 * i + 2];
      }
    }
    return {he.hinge, dist, he.predicted == cfg.target};
  };

  SearchOutcome so = lambda_search(
      [&](double lam) {
        return optimize_inner(objective, std::vector<double>(3 * n, 0.0), lam, cfg);
      },
      cfg);
  res.trace = std::move(so.trace);
  res.inner_iterations = so.iterations;
  if (!so.success) {
    res.adversarial = victim;
    res.predicted = predicted_class(forward_ws(params, victim, verify_ws));
    return res;
  }
  res.best_lambda = so.best_lambda;
  res.adversarial.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.adversarial.points[i] =
        victim.points[i] +
        Vec3{so.best_vars[3 * i], so.best_vars[3 * i + 1], so.best_vars[3 * i + 2]};
  }
  res.predicted = predicted_class(forward_ws(params, res.adversarial, verify_ws));
  res.success = res.predicted == cfg.target;
  res.metrics.l2 = lp_perturbation(victim, res.adversarial).value;
  res.metrics.hausdorff = hausdorff(victim, res.adversarial).value;
  res.metrics.chamfer = chamfer(victim, res.adversarial).value;
  res.metrics.count_added = count_added(victim, res.adversarial, cfg.t_thre).value;
  res.metrics.composite = res.metrics.l2;
  return res;
}

// ---------------------------------------------------------------------------
// Independent point generation (initialize-and-shift)

namespace detail {

// per example: the 32 critical points contributing to the most channels
inline PointCloud pool_top_critical(const ModelParams& params,
                                    const std::vector<PointCloud>& examples, int per_example,
                                    std::size_t max_examples) {
  PointCloud pooled;
  const std::size_t ne = std::min(examples.size(), max_examples);
  for (std::size_t e = 0; e < ne; ++e) {
    const CriticalPointSet crit = critical_points(params, examples[e]);
    std::vector<std::size_t> order(crit.indices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&crit](std::size_t a, std::size_t b) {
      if (crit.channel_counts[a] != crit.channel_counts[b])
        return crit.channel_counts[a] > crit.channel_counts[b];
      return crit.indices[a] < crit.indices[b];
    });
    const std::size_t take = std::min<std::size_t>(per_example, order.size());
    for (std::size_t i = 0; i < take; ++i)
      pooled.points.push_back(examples[e].points[crit.indices[order[i]]]);
  }
  return pooled;
}

inline PointCloud subsample_stride(const PointCloud& cloud, std::size_t target) {
  PointCloud out;
  out.points.reserve(target);
  for (std::size_t i = 0; i < target; ++i)
    out.points.push_back(cloud.points[i * cloud.size() / target]);
  return out;
}

}  // namespace detail

inline AttackResult attack_add_points(const ModelParams& params, const PointCloud& victim,
                                      const AttackConfig& cfg,
                                      const std::vector<PointCloud>* target_examples = nullptr) {
  check_attack_config(cfg);
  if (victim.empty()) throw std::invalid_argument("attack_add_points: empty victim");
  if (cfg.target >= params.classes())
    throw std::invalid_argument("attack_add_points: target class out of range");
  if (cfg.metric != MetricKind::Hausdorff && cfg.metric != MetricKind::Chamfer)
    throw std::invalid_argument(
        std::string("attack_add_points: metric must be hausdorff or chamfer, got ") +
        metric_name(cfg.metric));

  PointCloud init;
  if (cfg.init_source == InitSource::Victim) {
    const CriticalPointSet crit = critical_points(params, victim);
    for (int ix : crit.indices) init.points.push_back(victim.points[ix]);
  } else {
    if (!target_examples || target_examples->empty())
      throw std::invalid_argument(
          "attack_add_points: init_source=target requires target-class examples");
    init = detail::pool_top_critical(params, *target_examples, 32, 8);
    if (init.size() > 128) init = detail::subsample_stride(init, 128);
  }
  // A point placed exactly on an original ties with it in the max pool and
  // loses on index, so the whole added block would start with a zero hinge
  // gradient and never shift. Break the symmetry with a sub-threshold jitter
  // (well under t_thre, so unmoved points still count as not-added).
  {
    Rng jitter(mix_seed({cfg.seed, 0xadd9u}));
    for (Vec3& p : init.points)
      p += Vec3{jitter.uniform(-1e-3, 1e-3), jitter.uniform(-1e-3, 1e-3),
                jitter.uniform(-1e-3, 1e-3)};
  }

  AttackResult res;
  res.kind = AttackKind::AddPoints;
  const std::size_t m = init.size();
  const PoolFloor floor = make_pool_floor(params, victim);

  auto finalize = [&](const PointCloud& added, double best_lambda) {
    res.best_lambda = best_lambda;
    res.added_sets = {added};
    res.adversarial = victim.concat(added);
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, res.adversarial, verify_ws));
    res.success = res.predicted == cfg.target;
    res.metrics.hausdorff = hausdorff(victim, added).value;
    res.metrics.chamfer = chamfer(victim, added).value;
    res.metrics.count_added = count_added(victim, added, cfg.t_thre).value;
    res.metrics.composite = cfg.metric == MetricKind::Hausdorff ? *res.metrics.hausdorff
                                                                : *res.metrics.chamfer;
  };

  {  // trivial case: the union with unmoved seeds already classifies as target
    ForwardWorkspace ws0;
    if (predicted_class(forward_ws(params, victim.concat(init), ws0)) == cfg.target) {
      finalize(init, std::clamp(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi));
      res.trace.push_back({res.best_lambda, true, *res.metrics.composite});
      return res;
    }
  }

  ForwardWorkspace ws;
  PointCloud added;
  added.points.resize(m);
  std::vector<Vec3> fgrad;
  auto objective = [&](const std::vector<double>& vars, double lambda,
                       std::vector<double>* grad) -> InnerEval {
    for (std::size_t i = 0; i < m; ++i)
      added.points[i] = {vars[3 * i], vars[3 * i + 1], vars[3 * i + 2]};
    const FloorEval fe = forward_hinge_with_floor(params, floor, added, cfg.target, ws,
                                                  grad ? &fgrad : nullptr);
    const double dist = cfg.metric == MetricKind::Hausdorff ? hausdorff(victim, added).value
                                                            : chamfer(victim, added).value;
    if (grad) {
      const std::vector<Vec3> dgrad = metric_gradient(cfg.metric, victim, added);
      for (std::size_t i = 0; i < m; ++i) {
        (*grad)[3 * i] = fgrad[i].x + lambda * dgrad[i].x;
        (*grad)[3 * i + 1] = fgrad[i].y + lambda * dgrad[i].y;
        (*grad)[3 * i + 2] = fgrad[i].z + lambda * dgrad[i].z;
      }
    }
    return {fe.hinge, dist, fe.predicted == cfg.target};
  };

  std::vector<double> init_vars(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    init_vars[3 * i] = init.points[i].x;
    init_vars[3 * i + 1] = init.points[i].y;
    init_vars[3 * i + 2] = init.points[i].z;
  }
  SearchOutcome so = lambda_search(
      [&](double lam) { return optimize_inner(objective, init_vars, lam, cfg); }, cfg);
  res.trace = std::move(so.trace);
  res.inner_iterations = so.iterations;
  if (!so.success) {
    res.adversarial = victim;
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, victim, verify_ws));
    return res;
  }
  PointCloud best;
  best.points.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    best.points[i] = {so.best_vars[3 * i], so.best_vars[3 * i + 1], so.best_vars[3 * i + 2]};
  finalize(best, so.best_lambda);
  return res;
}

// ---------------------------------------------------------------------------
// Vulnerable-region seeding for cluster/object attacks

// Pools the top-32 critical points of up to 8 target-class examples, clusters
// them with DBSCAN, and turns the k largest clusters into 32-point seeds
// (stride subsampling or jitter padding, each seed point kept inside the
// source cluster's bounding sphere).
inline std::vector<ClusterSeed> vulnerable_regions(const ModelParams& params,
                                                   const std::vector<PointCloud>& target_examples,
                                                   int k, const AttackConfig& cfg) {
  if (target_examples.empty())
    throw std::invalid_argument("vulnerable_regions: need at least one target-class example");
  if (k < 1) throw std::invalid_argument("vulnerable_regions: k must be >= 1");
  const PointCloud pooled = detail::pool_top_critical(params, target_examples, 32, 8);
  const DbscanResult db = dbscan(pooled, cfg.dbscan_eps, cfg.dbscan_min_pts);
  if (db.num_clusters < k)
    throw std::runtime_error("vulnerable_regions: DBSCAN found " +
                             std::to_string(db.num_clusters) + " cluster(s) but k=" +
                             std::to_string(k) +
                             "; relax dbscan_eps / dbscan_min_pts or add target examples");
  std::vector<std::vector<int>> members = db.members();
  std::vector<int> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&members](int a, int b) {
    if (members[a].size() != members[b].size()) return members[a].size() > members[b].size();
    return a < b;
  });

  std::vector<ClusterSeed> seeds;
  const std::size_t want = static_cast<std::size_t>(cfg.points_per_cluster);
  for (int rank = 0; rank < k; ++rank) {
    PointCloud pts;
    for (int ix : members[order[rank]]) pts.points.push_back(pooled.points[ix]);
    ClusterSeed seed;
    seed.center = pts.centroid();
    double radius = 0.0;
    for (const Vec3& p : pts.points) radius = std::max(radius, (p - seed.center).norm());
    if (pts.size() >= want) {
      seed.initial_points = detail::subsample_stride(pts, want);
    } else {
      seed.initial_points = pts;
      Rng rng(mix_seed({cfg.seed, 0x564cu, static_cast<std::uint64_t>(rank)}));
      const double sigma = std::min(0.01, 0.5 * radius);
      std::size_t j = 0;
      while (seed.initial_points.size() < want) {
        Vec3 p = pts.points[j % pts.size()];
        if (sigma > 0.0) {
          p += Vec3{sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
          const Vec3 d = p - seed.center;
          const double dn = d.norm();
          if (dn > radius) p = seed.center + d * (radius / dn);
        }
        seed.initial_points.points.push_back(p);
        ++j;
      }
    }
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Adversarial clusters: k compact blobs seeded at vulnerable regions

inline AttackResult attack_add_clusters(const ModelParams& params, const PointCloud& victim,
                                        const std::vector<PointCloud>& target_examples,
                                        const AttackConfig& cfg) {
  check_attack_config(cfg);
  if (victim.empty()) throw std::invalid_argument("attack_add_clusters: empty victim");
  if (cfg.target >= params.classes())
    throw std::invalid_argument("attack_add_clusters: target class out of range");
  const std::vector<ClusterSeed> seeds = vulnerable_regions(params, target_examples, cfg.k, cfg);
  const int k = cfg.k;
  const std::size_t m = static_cast<std::size_t>(cfg.points_per_cluster);

  AttackResult res;
  res.kind = AttackKind::Clusters;
  const PoolFloor floor = make_pool_floor(params, victim);

  auto clusters_from_vars = [&](const std::vector<double>& vars,
                                std::vector<PointCloud>& cs) {
    cs.resize(k);
    for (int i = 0; i < k; ++i) {
      cs[i].points.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t at = 3 * (i * m + j);
        cs[i].points[j] = {vars[at], vars[at + 1], vars[at + 2]};
      }
    }
  };

  auto finalize = [&](const std::vector<PointCloud>& cs, double best_lambda) {
    res.best_lambda = best_lambda;
    res.added_sets = cs;
    res.adversarial = victim;
    for (const PointCloud& c : cs) res.adversarial = res.adversarial.concat(c);
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, res.adversarial, verify_ws));
    res.success = res.predicted == cfg.target;
    PointCloud all_added;
    for (const PointCloud& c : cs) all_added = all_added.concat(c);
    double far_sum = 0.0, composite = 0.0;
    for (const PointCloud& c : cs) {
      const double far = farthest_distance(c).value;
      far_sum += far;
      composite += far + cfg.mu * chamfer(victim, c).value;
    }
    res.metrics.farthest = far_sum / k;
    res.metrics.hausdorff = hausdorff(victim, all_added).value;
    res.metrics.chamfer = chamfer(victim, all_added).value;
    res.metrics.count_added = count_added(victim, all_added, cfg.t_thre).value;
    res.metrics.composite = composite;
  };

  std::vector<double> init_vars(3 * k * m);
  for (int i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Vec3& p = seeds[i].initial_points.points[j];
      const std::size_t at = 3 * (i * m + j);
      init_vars[at] = p.x;
      init_vars[at + 1] = p.y;
      init_vars[at + 2] = p.z;
    }

  {  // trivial case: union with unmoved seeds already classifies as target
    std::vector<PointCloud> cs;
    clusters_from_vars(init_vars, cs);
    PointCloud u = victim;
    for (const PointCloud& c : cs) u = u.concat(c);
    ForwardWorkspace ws0;
    if (predicted_class(forward_ws(params, u, ws0)) == cfg.target) {
      finalize(cs, std::clamp(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi));
      res.trace.push_back({res.best_lambda, true, *res.metrics.composite});
      return res;
    }
  }

  ForwardWorkspace ws;
  std::vector<PointCloud> cs;
  PointCloud added;
  added.points.resize(k * m);
  std::vector<Vec3> fgrad;
  auto objective = [&](const std::vector<double>& vars, double lambda,
                       std::vector<double>* grad) -> InnerEval {
    clusters_from_vars(vars, cs);
    for (int i = 0; i < k; ++i)
      for (std::size_t j = 0; j < m; ++j) added.points[i * m + j] = cs[i].points[j];
    const FloorEval fe = forward_hinge_with_floor(params, floor, added, cfg.target, ws,
                                                  grad ? &fgrad : nullptr);
    double dist = 0.0;
    for (int i = 0; i < k; ++i)
      dist += farthest_distance(cs[i]).value + cfg.mu * chamfer(victim, cs[i]).value;
    if (grad) {
      for (int i = 0; i < k; ++i) {
        const std::vector<Vec3> fargrad =
            metric_gradient(MetricKind::FarthestDistance, victim, cs[i]);
        const std::vector<Vec3> chamgrad = metric_gradient(MetricKind::Chamfer, victim, cs[i]);
        for (std::size_t j = 0; j < m; ++j) {
          const Vec3 g = fgrad[i * m + j] + lambda * (fargrad[j] + cfg.mu * chamgrad[j]);
          const std::size_t at = 3 * (i * m + j);
          (*grad)[at] = g.x;
          (*grad)[at + 1] = g.y;
          (*grad)[at + 2] = g.z;
        }
      }
    }
    return {fe.hinge, dist, fe.predicted == cfg.target};
  };

  SearchOutcome so = lambda_search(
      [&](double lam) { return optimize_inner(objective, init_vars, lam, cfg); }, cfg);
  res.trace = std::move(so.trace);
  res.inner_iterations = so.iterations;
  if (!so.success) {
    res.adversarial = victim;
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, victim, verify_ws));
    return res;
  }
  std::vector<PointCloud> best;
  clusters_from_vars(so.best_vars, best);
  finalize(best, so.best_lambda);
  return res;
}

// ---------------------------------------------------------------------------
// Adversarial objects: rigid template instances with a penalized deformation

inline PointCloud default_object_template() {
  PointCloud tpl = sample_shape(default_spec(ShapeKind::Cross), 64, 0x7e3);
  for (Vec3& p : tpl.points) p *= 0.3;  // three-tenths of the unit-ball scale
  return tpl;
}

inline AttackResult attack_add_objects(const ModelParams& params, const PointCloud& victim,
                                       const std::vector<PointCloud>& target_examples,
                                       const AttackConfig& cfg) {
  check_attack_config(cfg);
  if (victim.empty()) throw std::invalid_argument("attack_add_objects: empty victim");
  if (cfg.target >= params.classes())
    throw std::invalid_argument("attack_add_objects: target class out of range");
  const PointCloud tpl = cfg.template_cloud ? *cfg.template_cloud : default_object_template();
  if (tpl.empty()) throw std::invalid_argument("attack_add_objects: empty template");
  const std::vector<ClusterSeed> seeds = vulnerable_regions(params, target_examples, cfg.k, cfg);
  const int k = cfg.k;
  const std::size_t tm = tpl.size();
  const std::size_t stride = 6 + 3 * tm;  // rotation, translation, per-point deltas

  AttackResult res;
  res.kind = AttackKind::Objects;
  res.object_template = tpl;
  const PoolFloor floor = make_pool_floor(params, victim);

  auto decode = [&](const std::vector<double>& vars, int i, Vec3& w, Vec3& t,
                    PointCloud& deformed) {
    const std::size_t base = i * stride;
    w = {vars[base], vars[base + 1], vars[base + 2]};
    t = {vars[base + 3], vars[base + 4], vars[base + 5]};
    deformed.points.resize(tm);
    for (std::size_t j = 0; j < tm; ++j) {
      const std::size_t at = base + 6 + 3 * j;
      deformed.points[j] = tpl.points[j] + Vec3{vars[at], vars[at + 1], vars[at + 2]};
    }
  };

  auto finalize = [&](const std::vector<double>& vars, double best_lambda) {
    res.best_lambda = best_lambda;
    res.added_sets.clear();
    res.deformed_templates.clear();
    res.poses.clear();
    res.adversarial = victim;
    PointCloud all_added;
    double l2_sum = 0.0, far_sum = 0.0, composite = 0.0;
    for (int i = 0; i < k; ++i) {
      Vec3 w, t;
      PointCloud deformed;
      decode(vars, i, w, t, deformed);
      const RigidTransform pose{w, t};
      const PointCloud world = apply_transform(deformed, pose);
      res.deformed_templates.push_back(deformed);
      res.poses.push_back(pose);
      res.added_sets.push_back(world);
      res.adversarial = res.adversarial.concat(world);
      all_added = all_added.concat(world);
      const double l2 = lp_perturbation(tpl, deformed).value;
      l2_sum += l2;
      far_sum += farthest_distance(world).value;
      composite += l2 + cfg.mu * chamfer(victim, world).value;
    }
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, res.adversarial, verify_ws));
    res.success = res.predicted == cfg.target;
    res.metrics.l2 = l2_sum / k;
    res.metrics.farthest = far_sum / k;
    res.metrics.hausdorff = hausdorff(victim, all_added).value;
    res.metrics.chamfer = chamfer(victim, all_added).value;
    res.metrics.count_added = count_added(victim, all_added, cfg.t_thre).value;
    res.metrics.composite = composite;
  };

  std::vector<double> init_vars(k * stride, 0.0);
  for (int i = 0; i < k; ++i) {
    init_vars[i * stride + 3] = seeds[i].center.x;
    init_vars[i * stride + 4] = seeds[i].center.y;
    init_vars[i * stride + 5] = seeds[i].center.z;
  }

  {  // trivial case: untouched templates at the seed centers already succeed
    PointCloud u = victim;
    for (int i = 0; i < k; ++i) {
      Vec3 w, t;
      PointCloud deformed;
      decode(init_vars, i, w, t, deformed);
      u = u.concat(apply_transform(deformed, {w, t}));
    }
    ForwardWorkspace ws0;
    if (predicted_class(forward_ws(params, u, ws0)) == cfg.target) {
      finalize(init_vars, std::clamp(cfg.lambda_init, cfg.lambda_lo, cfg.lambda_hi));
      res.trace.push_back({res.best_lambda, true, *res.metrics.composite});
      return res;
    }
  }

  ForwardWorkspace ws;
  PointCloud added;
  added.points.resize(k * tm);
  std::vector<Vec3> fgrad;
  std::vector<PointCloud> worlds(k);
  std::vector<Mat3> jac(k * tm);
  auto objective = [&](const std::vector<double>& vars, double lambda,
                       std::vector<double>* grad) -> InnerEval {
    // world points (and rotation jacobians when the gradient is needed)
    for (int i = 0; i < k; ++i) {
      const std::size_t base = i * stride;
      const Vec3 w{vars[base], vars[base + 1], vars[base + 2]};
      const Vec3 t{vars[base + 3], vars[base + 4], vars[base + 5]};
      worlds[i].points.resize(tm);
      for (std::size_t j = 0; j < tm; ++j) {
        const std::size_t at = base + 6 + 3 * j;
        const Vec3 q = tpl.points[j] + Vec3{vars[at], vars[at + 1], vars[at + 2]};
        worlds[i].points[j] =
            rotate_with_jacobian(w, q, grad ? &jac[i * tm + j] : nullptr) + t;
        added.points[i * tm + j] = worlds[i].points[j];
      }
    }
    const FloorEval fe = forward_hinge_with_floor(params, floor, added, cfg.target, ws,
                                                  grad ? &fgrad : nullptr);
    double dist = 0.0;
    std::vector<double> l2s(k);
    for (int i = 0; i < k; ++i) {
      double ss = 0.0;
      const std::size_t base = i * stride;
      for (std::size_t d = 0; d < 3 * tm; ++d) ss += vars[base + 6 + d] * vars[base + 6 + d];
      l2s[i] = std::sqrt(ss);
      dist += l2s[i] + cfg.mu * chamfer(victim, worlds[i]).value;
    }
    if (grad) {
      for (int i = 0; i < k; ++i) {
        const std::size_t base = i * stride;
        const Vec3 w{vars[base], vars[base + 1], vars[base + 2]};
        const Mat3 rot = rotation_matrix(w);
        const std::vector<Vec3> chamgrad = metric_gradient(MetricKind::Chamfer, victim, worlds[i]);
        Vec3 gw, gt;
        for (std::size_t j = 0; j < tm; ++j) {
          const Vec3 g_world = fgrad[i * tm + j] + (lambda * cfg.mu) * chamgrad[j];
          gt += g_world;
          gw += jac[i * tm + j].apply_transposed(g_world);
          const Vec3 gd = rot.apply_transposed(g_world);
          const std::size_t at = base + 6 + 3 * j;
          const double inv = l2s[i] > 0.0 ? lambda / l2s[i] : 0.0;
          (*grad)[at] = gd.x + inv * vars[at];
          (*grad)[at + 1] = gd.y + inv * vars[at + 1];
          (*grad)[at + 2] = gd.z + inv * vars[at + 2];
        }
        (*grad)[base] = gw.x;
        (*grad)[base + 1] = gw.y;
        (*grad)[base + 2] = gw.z;
        (*grad)[base + 3] = gt.x;
        (*grad)[base + 4] = gt.y;
        (*grad)[base + 5] = gt.z;
      }
    }
    return {fe.hinge, dist, fe.predicted == cfg.target};
  };

  SearchOutcome so = lambda_search(
      [&](double lam) { return optimize_inner(objective, init_vars, lam, cfg); }, cfg);
  res.trace = std::move(so.trace);
  res.inner_iterations = so.iterations;
  if (!so.success) {
    res.adversarial = victim;
    ForwardWorkspace verify_ws;
    res.predicted = predicted_class(forward_ws(params, victim, verify_ws));
    return res;
  }
  finalize(so.best_vars, so.best_lambda);
  return res;
}

}  // namespace pcadv

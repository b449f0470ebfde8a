// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy matrices run once and feed several criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pcadv/attack.hpp"
#include "pcadv/eval.hpp"
#include "pcadv/train.hpp"

#include "../oracles.hpp"

using namespace pcadv;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) { return detail::fmt_double(v); }

ModelParams generic_model(const ModelConfig& mc, std::uint64_t seed) {
  ModelParams p = init_model(mc, seed);
  Rng rng(mix_seed({seed, 0xb1a5u}));
  for (auto* layers : {&p.point_layers, &p.head_layers})
    for (auto& l : *layers)
      for (int i = 0; i < l.b.size(); ++i) l.b[i] += rng.uniform(-0.05, 0.05);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

int main() {
  const std::uint64_t kSeed = 2024;

  // ---- criterion 1: victim model training gate -----------------------------
  auto t0 = Clock::now();
  const Dataset ds = generate_dataset(50, 256, 1);
  TrainConfig tcfg;
  tcfg.seed = 7;
  const ModelParams params = train_model(ds, tcfg);
  const double train_time = elapsed(t0);
  const double test_acc = evaluate_accuracy(params, ds, Split::Test);
  report(1, "victim model accuracy and training budget",
         test_acc >= 0.90 && train_time <= 600.0,
         "test_acc=" + fmt(test_acc) + " (>=0.90), train_time=" + fmt(train_time) +
             "s (<=600, single-threaded)");

  MatrixConfig mcfg;
  mcfg.victims_per_class = 5;
  mcfg.workers = 8;

  // ---- criterion 2: perturbation matrix ------------------------------------
  t0 = Clock::now();
  AttackConfig pcfg = default_attack_config(AttackKind::Perturb, 0);
  pcfg.seed = kSeed;
  const AttackMatrixReport perturb = run_matrix(params, ds, AttackKind::Perturb, pcfg, mcfg);
  const double perturb_time = elapsed(t0);
  report(2, "perturbation attack matrix",
         perturb.average.success_rate >= 0.95 && perturb.average.mean_l2 &&
             *perturb.average.mean_l2 <= 1.0 && perturb_time <= 1800.0,
         "success=" + fmt(perturb.average.success_rate) + " (>=0.95), mean_L2=" +
             fmt(perturb.average.mean_l2.value_or(-1)) + " (<=1.0), time=" +
             fmt(perturb_time) + "s (<=1800 at 8 workers)");

  // ---- criterion 3: independent points, both metrics -----------------------
  AttackConfig hcfg = default_attack_config(AttackKind::AddPoints, 0);
  hcfg.metric = MetricKind::Hausdorff;
  hcfg.seed = kSeed;
  const AttackMatrixReport add_h = run_matrix(params, ds, AttackKind::AddPoints, hcfg, mcfg);
  AttackConfig ccfg = hcfg;
  ccfg.metric = MetricKind::Chamfer;
  const AttackMatrixReport add_c = run_matrix(params, ds, AttackKind::AddPoints, ccfg, mcfg);
  {
    const double sh = add_h.average.success_rate, sc = add_c.average.success_rate;
    const double h_loss = add_h.average.mean_hausdorff.value_or(-1);
    const double c_loss = add_c.average.mean_chamfer.value_or(-1);
    const double h_count = add_h.average.mean_count.value_or(-1);
    const double c_count = add_c.average.mean_count.value_or(-1);
    const bool pass = sh >= 0.95 && sc >= 0.95 && c_loss >= 0 && h_loss >= 0 &&
                      c_loss < h_loss && c_count < h_count;
    report(3, "independent point generation, hausdorff and chamfer",
           pass,
           "success_H=" + fmt(sh) + " success_C=" + fmt(sc) + " (>=0.95 each); chamfer_loss=" +
               fmt(c_loss) + " < hausdorff_loss=" + fmt(h_loss) + "; counts " + fmt(c_count) +
               " < " + fmt(h_count));
  }

  // ---- criteria 4+5: clusters and objects over k ---------------------------
  double clu_succ[3], clu_far[3], obj_succ[3];
  for (int k = 1; k <= 3; ++k) {
    AttackConfig cfg = default_attack_config(AttackKind::Clusters, 0);
    cfg.k = k;
    cfg.dbscan_eps = 0.10;  // tuned so every target class seeds k=3 (flag-exposed knob)
    cfg.seed = kSeed;
    const AttackMatrixReport rep = run_matrix(params, ds, AttackKind::Clusters, cfg, mcfg);
    clu_succ[k - 1] = rep.average.success_rate;
    clu_far[k - 1] = rep.average.mean_far.value_or(-1);
  }
  report(4, "adversarial clusters over k",
         clu_succ[0] <= clu_succ[1] && clu_succ[1] <= clu_succ[2] && clu_succ[2] >= 0.90 &&
             clu_far[2] >= 0 && clu_far[2] < clu_far[0],
         "success k=1..3: " + fmt(clu_succ[0]) + ", " + fmt(clu_succ[1]) + ", " +
             fmt(clu_succ[2]) + " (non-decreasing, k3>=0.90); far k3=" + fmt(clu_far[2]) +
             " < far k1=" + fmt(clu_far[0]));

  for (int k = 1; k <= 3; ++k) {
    AttackConfig cfg = default_attack_config(AttackKind::Objects, 0);
    cfg.k = k;
    cfg.dbscan_eps = 0.10;
    cfg.seed = kSeed;
    const AttackMatrixReport rep = run_matrix(params, ds, AttackKind::Objects, cfg, mcfg);
    obj_succ[k - 1] = rep.average.success_rate;
  }
  report(5, "adversarial objects over k",
         obj_succ[0] <= obj_succ[1] && obj_succ[1] <= obj_succ[2] && obj_succ[2] >= 0.85 &&
             obj_succ[0] <= clu_succ[0] && obj_succ[1] <= clu_succ[1] &&
             obj_succ[2] <= clu_succ[2],
         "success k=1..3: " + fmt(obj_succ[0]) + ", " + fmt(obj_succ[1]) + ", " +
             fmt(obj_succ[2]) + " (non-decreasing, k3>=0.85, <= clusters at each k)");

  // ---- criterion 6: gradient suite ------------------------------------------
  t0 = Clock::now();
  {
    ModelConfig mc;
    mc.point_widths = {4, 6};
    mc.head_widths = {5};
    mc.classes = 3;
    int bad_input = 0, bad_param = 0, bad_metric = 0;
    Rng rng(4242);
    for (int rep = 0; rep < 50; ++rep) {
      // input gradient
      {
        const ModelParams m = generic_model(mc, 1000 + rep);
        const PointCloud c = oracle::random_cloud(rng, 8);
        const Logits z = forward(m, c);
        int target = 0;
        for (int i = 1; i < z.size(); ++i)
          if (z[i] < z[target]) target = i;
        const auto analytic = input_gradient(m, c, target);
        std::vector<double> flat, x;
        for (const auto& g : analytic) {
          flat.push_back(g.x);
          flat.push_back(g.y);
          flat.push_back(g.z);
        }
        for (const auto& p : c.points) {
          x.push_back(p.x);
          x.push_back(p.y);
          x.push_back(p.z);
        }
        const auto fd = oracle::central_diff(
            [&](const std::vector<double>& v) {
              PointCloud cc;
              for (std::size_t i = 0; i < v.size(); i += 3)
                cc.points.push_back({v[i], v[i + 1], v[i + 2]});
              return adversarial_loss(forward(m, cc), target).value;
            },
            x);
        if (oracle::max_rel_err(flat, fd) >= 1e-4) ++bad_input;
      }
      // parameter gradient
      {
        ModelParams m = generic_model(mc, 2000 + rep);
        const PointCloud a = oracle::random_cloud(rng, 6);
        const PointCloud b = oracle::random_cloud(rng, 6);
        const std::vector<LabeledCloud> batch = {{&a, 0}, {&b, 2}};
        ModelParams grad = zero_like(m);
        param_gradient(m, batch, grad);
        std::vector<double> analytic, x;
        params_to_vector(grad, analytic);
        params_to_vector(m, x);
        ModelParams probe = m;
        const auto fd = oracle::central_diff(
            [&](const std::vector<double>& v) {
              vector_to_params(v, probe);
              ModelParams sink = zero_like(probe);
              return param_gradient(probe, batch, sink);
            },
            x);
        if (oracle::max_rel_err(analytic, fd) >= 1e-4) ++bad_param;
      }
      // metric gradients
      {
        const PointCloud s = oracle::random_cloud(rng, 8);
        const PointCloud sp = oracle::random_cloud(rng, 8);
        for (MetricKind kind : {MetricKind::L2Norm, MetricKind::Hausdorff, MetricKind::Chamfer,
                                MetricKind::FarthestDistance}) {
          const auto analytic = metric_gradient(kind, s, sp);
          std::vector<double> flat, x;
          for (const auto& g : analytic) {
            flat.push_back(g.x);
            flat.push_back(g.y);
            flat.push_back(g.z);
          }
          for (const auto& p : sp.points) {
            x.push_back(p.x);
            x.push_back(p.y);
            x.push_back(p.z);
          }
          const auto fd = oracle::central_diff(
              [&](const std::vector<double>& v) {
                PointCloud cc;
                for (std::size_t i = 0; i < v.size(); i += 3)
                  cc.points.push_back({v[i], v[i + 1], v[i + 2]});
                switch (kind) {
                  case MetricKind::L2Norm: return lp_perturbation(s, cc).value;
                  case MetricKind::Hausdorff: return hausdorff(s, cc).value;
                  case MetricKind::Chamfer: return chamfer(s, cc).value;
                  default: return farthest_distance(cc).value;
                }
              },
              x);
          if (oracle::max_rel_err(flat, fd) >= 1e-4) ++bad_metric;
        }
      }
    }
    const double grad_time = elapsed(t0);
    report(6, "gradient suite vs central finite differences",
           bad_input == 0 && bad_param == 0 && bad_metric == 0 && grad_time <= 60.0,
           "50 instances each: input_bad=" + std::to_string(bad_input) + " param_bad=" +
               std::to_string(bad_param) + " metric_bad=" + std::to_string(bad_metric) +
               ", time=" + fmt(grad_time) + "s (<=60)");
  }

  // ---- criterion 7: metric oracle suite -------------------------------------
  {
    Rng rng(31337);
    int bad = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 1 + rng.uniform_index(64);
      const std::size_t m = 1 + rng.uniform_index(64);
      const PointCloud s = oracle::random_cloud(rng, n);
      const PointCloud sp = oracle::random_cloud(rng, m);
      if (std::abs(hausdorff(s, sp).value - oracle::hausdorff_ref(s, sp)) > 1e-12) ++bad;
      if (std::abs(chamfer(s, sp).value - oracle::chamfer_ref(s, sp)) > 1e-12) ++bad;
      if (std::abs(farthest_distance(sp).value - oracle::farthest_ref(sp)) > 1e-12) ++bad;
      if (count_added(s, sp, 0.25).value != oracle::count_added_ref(s, sp, 0.25)) ++bad;
      PointCloud sq = sp;
      sq.points.resize(n, Vec3{0.5, 0.5, 0.5});  // force equal cardinality for L2
      if (std::abs(lp_perturbation(s, sq).value - oracle::l2_ref(s, sq)) > 1e-12) ++bad;
    }
    report(7, "metric values vs exhaustive oracles", bad == 0,
           "200 random set pairs (|S|<=64), tolerance 1e-12, mismatches=" +
               std::to_string(bad));
  }

  // ---- criterion 8: dbscan equivalence --------------------------------------
  {
    Rng rng(555);
    int bad = 0;
    for (int rep = 0; rep < 100; ++rep) {
      PointCloud c;
      const int blobs = 1 + static_cast<int>(rng.uniform_index(5));
      for (int b = 0; b < blobs; ++b) {
        const Vec3 center{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const int n = 5 + static_cast<int>(rng.uniform_index(35));
        for (int i = 0; i < n; ++i)
          c.points.push_back(center + Vec3{0.06 * rng.normal(), 0.06 * rng.normal(),
                                           0.06 * rng.normal()});
      }
      const int bg = static_cast<int>(rng.uniform_index(40));
      for (int i = 0; i < bg; ++i)
        c.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
      if (c.size() > 200) c.points.resize(200);
      const double eps = rng.uniform(0.05, 0.4);
      const int min_pts = 2 + static_cast<int>(rng.uniform_index(5));
      const DbscanResult got = dbscan(c, eps, min_pts);
      const oracle::DbscanRef want = oracle::dbscan_ref(c, eps, min_pts);
      for (std::size_t i = 0; i < c.size(); ++i)
        if (got.cluster[i] != want.cluster[i] ||
            static_cast<int>(got.role[i]) != want.role[i]) {
          ++bad;
          break;
        }
    }
    report(8, "dbscan equals the reference implementation", bad == 0,
           "100 seeded instances (<=200 points), mismatched instances=" + std::to_string(bad));
  }

  // ---- criterion 9: critical-point sufficiency ------------------------------
  {
    int bad = 0;
    Rng rng(999);
    for (int rep = 0; rep < 100; ++rep) {
      const PointCloud& cloud =
          rep < 60 ? ds.examples[rng.uniform_index(ds.examples.size())].cloud
                   : oracle::random_cloud(rng, 64 + rng.uniform_index(192));
      const CriticalPointSet crit = critical_points(params, cloud);
      PointCloud subset;
      for (int ix : crit.indices) subset.points.push_back(cloud.points[ix]);
      const Logits full = forward(params, cloud);
      const Logits sub = forward(params, subset);
      for (int i = 0; i < full.size(); ++i)
        if (sub[i] != full[i]) {
          ++bad;
          break;
        }
    }
    report(9, "critical subset reproduces logits bit for bit", bad == 0,
           "100 clouds through the trained desk model, mismatches=" + std::to_string(bad));
  }

  // ---- criterion 10: shift distribution -------------------------------------
  {
    // breakpoints: 0.005, 0.01, 0.02, 0.03, 0.05
    const double frac_003 = perturb.shift_cdf.size() > 3 ? perturb.shift_cdf[3] : 0.0;
    report(10, "perturbation shifts are mostly tiny", frac_003 >= 0.60,
           "fraction of per-point shifts <= 0.03: " + fmt(frac_003) + " (>=0.60)");
  }

  // ---- criterion 11: determinism across runs and worker counts --------------
  {
    namespace fs = std::filesystem;
    AttackConfig dcfg = default_attack_config(AttackKind::Perturb, 0);
    dcfg.inner_iters = 60;
    dcfg.search_steps = 3;
    dcfg.seed = 97;
    MatrixConfig m1;
    m1.victims_per_class = 1;
    m1.workers = 1;
    MatrixConfig m8 = m1;
    m8.workers = 8;
    const fs::path d1 = fs::temp_directory_path() / "pcadv_acc_w1";
    const fs::path d8 = fs::temp_directory_path() / "pcadv_acc_w8";
    fs::remove_all(d1);
    fs::remove_all(d8);
    const AttackMatrixReport r1 = run_matrix(params, ds, AttackKind::Perturb, dcfg, m1);
    const AttackMatrixReport r8 = run_matrix(params, ds, AttackKind::Perturb, dcfg, m8);
    emit_report(r1, ReportFormat::Csv, d1);
    emit_report(r8, ReportFormat::Csv, d8);
    write_job_log(r1, d1 / "jobs.jsonl");
    write_job_log(r8, d8 / "jobs.jsonl");
    bool same = true;
    for (const char* name : {"perturb_pairs.csv", "perturb_cases.csv", "shift_cdf.csv",
                             "jobs.jsonl"}) {
      if (slurp(d1 / name) != slurp(d8 / name)) same = false;
    }
    fs::remove_all(d1);
    fs::remove_all(d8);
    report(11, "matrix outputs byte-identical across worker counts", same,
           same ? "1 vs 8 workers: all report files identical"
                : "1 vs 8 workers: report files differ");
  }

  std::printf("%d/%d criteria passed\n", 11 - failures, 11);
  return failures == 0 ? 0 : 1;
}

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pcadv/attack.hpp"
#include "pcadv/dataset.hpp"
#include "pcadv/eval.hpp"
#include "pcadv/io.hpp"
#include "pcadv/model.hpp"
#include "pcadv/train.hpp"

namespace {

pcadv::AttackKind parse_kind(const std::string& s) {
  if (s == "perturb") return pcadv::AttackKind::Perturb;
  if (s == "add-points") return pcadv::AttackKind::AddPoints;
  if (s == "clusters") return pcadv::AttackKind::Clusters;
  if (s == "objects") return pcadv::AttackKind::Objects;
  throw CLI::ValidationError("--kind", "unknown attack kind '" + s + "'");
}

pcadv::PointCloud load_any_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".ply") return pcadv::load_cloud_ply(path);
  return pcadv::load_cloud_text(path);
}

void check_model_dataset(const pcadv::ModelParams& params, const pcadv::Dataset& ds) {
  if (params.classes() != ds.classes())
    throw std::runtime_error("checkpoint/dataset mismatch: model has " +
                             std::to_string(params.classes()) + " classes, dataset has " +
                             std::to_string(ds.classes()));
  if (params.points_hint != 0 && params.points_hint != ds.points_per_cloud)
    throw std::runtime_error("checkpoint/dataset mismatch: model trained with " +
                             std::to_string(params.points_hint) + " points per cloud, dataset has " +
                             std::to_string(ds.points_per_cloud));
}

struct AttackFlags {
  std::string metric = "chamfer";
  double lambda_init = 10.0, lambda_lo = 1e-3, lambda_hi = 1e4;
  int search_steps = -1;  // -1: per-kind default (10 perturb/points, 5 clusters/objects)
  int iters = 500;
  double lr = 0.01;
  double mu = -1.0;  // -1: per-kind default (0.1 clusters, 0.2 objects)
  int k = 3;
  int points_per_cluster = 32;
  double t_thre = 0.01;
  double dbscan_eps = 0.15;
  int dbscan_min_pts = 4;
  std::string init_source = "victim";
  std::string template_path;
  std::uint64_t seed = 0;
  bool no_early_abort = false;
};

void add_attack_flags(CLI::App* cmd, AttackFlags& f) {
  cmd->add_option("--metric", f.metric, "distance for add-points: hausdorff|chamfer")
      ->check(CLI::IsMember({"hausdorff", "chamfer"}));
  cmd->add_option("--lambda-init", f.lambda_init, "initial trade-off weight");
  cmd->add_option("--lambda-lo", f.lambda_lo, "lower lambda bound");
  cmd->add_option("--lambda-hi", f.lambda_hi, "upper lambda bound");
  cmd->add_option("--search-steps", f.search_steps, "lambda binary-search steps");
  cmd->add_option("--iters", f.iters, "optimizer iterations per lambda branch");
  cmd->add_option("--attack-lr", f.lr, "optimizer learning rate");
  cmd->add_option("--mu", f.mu, "surface-closeness weight (clusters/objects)");
  cmd->add_option("--k", f.k, "number of clusters/objects")->check(CLI::Range(1, 3));
  cmd->add_option("--points-per-cluster", f.points_per_cluster, "points per cluster seed");
  cmd->add_option("--t-thre", f.t_thre, "counting threshold for added points");
  cmd->add_option("--dbscan-eps", f.dbscan_eps, "DBSCAN neighborhood radius");
  cmd->add_option("--dbscan-min-pts", f.dbscan_min_pts, "DBSCAN core-point threshold");
  cmd->add_option("--init-source", f.init_source, "add-points seeding: victim|target")
      ->check(CLI::IsMember({"victim", "target"}));
  cmd->add_option("--template", f.template_path, "object template cloud (.ply or text)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_flag("--no-early-abort", f.no_early_abort,
                "run every optimizer iteration, never stop a stalled branch");
}

pcadv::AttackConfig make_config(pcadv::AttackKind kind, int target, const AttackFlags& f) {
  pcadv::AttackConfig cfg = pcadv::default_attack_config(kind, target);
  cfg.metric = f.metric == "hausdorff" ? pcadv::MetricKind::Hausdorff
                                       : pcadv::MetricKind::Chamfer;
  if (kind == pcadv::AttackKind::Perturb) cfg.metric = pcadv::MetricKind::L2Norm;
  cfg.lambda_init = f.lambda_init;
  cfg.lambda_lo = f.lambda_lo;
  cfg.lambda_hi = f.lambda_hi;
  if (f.search_steps > 0) cfg.search_steps = f.search_steps;
  cfg.inner_iters = f.iters;
  cfg.learning_rate = f.lr;
  if (f.mu >= 0.0) cfg.mu = f.mu;
  cfg.k = f.k;
  cfg.points_per_cluster = f.points_per_cluster;
  cfg.t_thre = f.t_thre;
  cfg.dbscan_eps = f.dbscan_eps;
  cfg.dbscan_min_pts = f.dbscan_min_pts;
  cfg.init_source = f.init_source == "target" ? pcadv::InitSource::TargetClass
                                              : pcadv::InitSource::Victim;
  if (!f.template_path.empty()) cfg.template_cloud = load_any_cloud(f.template_path);
  cfg.seed = f.seed;
  cfg.early_abort = !f.no_early_abort;
  return cfg;
}

std::string opt_str(const std::optional<double>& v) {
  return v ? pcadv::detail::fmt_double(*v) : std::string("-");
}

int run(int argc, char** argv) {
  CLI::App app{"miniature point-cloud classifier with targeted adversarial attacks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file merged beneath flags");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
  int classes = 10, per_class = 50, points = 256;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--classes", classes, "number of shape classes (2-10)")
      ->check(CLI::Range(2, 10));
  gen->add_option("--per-class", per_class, "examples per class")->check(CLI::PositiveNumber);
  gen->add_option("--points", points, "points per cloud")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", gen_out, "output dataset directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the victim classifier");
  std::string tr_data, tr_out;
  pcadv::TrainConfig tcfg;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--epochs", tcfg.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  tr->add_option("--batch", tcfg.batch_size, "batch size")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tcfg.adam.lr, "learning rate");
  tr->add_option("--beta1", tcfg.adam.beta1, "first-moment decay");
  tr->add_option("--beta2", tcfg.adam.beta2, "second-moment decay");
  tr->add_option("--eps", tcfg.adam.eps, "optimizer epsilon");
  tr->add_option("--seed", tcfg.seed, "random seed");
  tr->add_option("--point-widths", tcfg.model.point_widths, "per-point MLP widths");
  tr->add_option("--head-widths", tcfg.model.head_widths, "classifier head hidden widths");

  // attack
  auto* at = app.add_subcommand("attack", "run one targeted attack job");
  std::string at_ckpt, at_data, at_kind = "perturb", at_export, at_log;
  int victim_id = 0, at_target = 0;
  AttackFlags af;
  at->add_option("--ckpt", at_ckpt, "model checkpoint")->required();
  at->add_option("--data", at_data, "dataset directory")->required();
  at->add_option("--kind", at_kind, "perturb|add-points|clusters|objects")
      ->check(CLI::IsMember({"perturb", "add-points", "clusters", "objects"}));
  at->add_option("--victim-id", victim_id, "dataset example index")->required();
  at->add_option("--target", at_target, "target class id")->required();
  at->add_option("--export-ply", at_export, "directory for victim/adversarial/added PLY files");
  at->add_option("--log", at_log, "append one JSONL record to this run log");
  add_attack_flags(at, af);

  // matrix
  auto* mx = app.add_subcommand("matrix", "run the full victim x target attack matrix");
  std::string mx_ckpt, mx_data, mx_kind = "perturb", mx_out;
  pcadv::MatrixConfig mcfg;
  AttackFlags mf;
  mx->add_option("--ckpt", mx_ckpt, "model checkpoint")->required();
  mx->add_option("--data", mx_data, "dataset directory")->required();
  mx->add_option("--kind", mx_kind, "perturb|add-points|clusters|objects")
      ->check(CLI::IsMember({"perturb", "add-points", "clusters", "objects"}));
  mx->add_option("--victims-per-class", mcfg.victims_per_class, "victims per class")
      ->check(CLI::PositiveNumber);
  mx->add_option("--workers", mcfg.workers, "parallel attack jobs")->check(CLI::PositiveNumber);
  mx->add_flag("--timing", mcfg.record_timing,
               "record real wall times (breaks byte-identical reruns)");
  mx->add_option("--out", mx_out, "report output directory")->required();
  add_attack_flags(mx, mf);

  // exit-code contract: 0 success, 2 usage error, 1 runtime error
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    const pcadv::Dataset ds = pcadv::generate_dataset(per_class, points, gen_seed, classes);
    pcadv::save_dataset(ds, gen_out);
    std::printf("examples=%zu train=%zu test=%zu out=%s\n", ds.examples.size(),
                ds.indices(pcadv::Split::Train).size(), ds.indices(pcadv::Split::Test).size(),
                gen_out.c_str());
    return 0;
  }

  if (tr->parsed()) {
    const pcadv::Dataset ds = pcadv::load_dataset(tr_data);
    const pcadv::ModelParams params = pcadv::train_model(ds, tcfg);
    pcadv::save_checkpoint(params, tr_out);
    const double train_acc = pcadv::evaluate_accuracy(params, ds, pcadv::Split::Train);
    const double test_acc = pcadv::evaluate_accuracy(params, ds, pcadv::Split::Test);
    std::printf("%.6f %.6f\n", train_acc, test_acc);
    return 0;
  }

  if (at->parsed()) {
    const pcadv::ModelParams params = pcadv::load_checkpoint(at_ckpt);
    const pcadv::Dataset ds = pcadv::load_dataset(at_data);
    check_model_dataset(params, ds);
    if (victim_id < 0 || victim_id >= static_cast<int>(ds.examples.size()))
      throw std::runtime_error("victim id " + std::to_string(victim_id) +
                               " out of range (dataset has " +
                               std::to_string(ds.examples.size()) + " examples)");
    if (at_target < 0 || at_target >= ds.classes())
      throw std::runtime_error("target class " + std::to_string(at_target) + " out of range");
    const pcadv::AttackKind kind = parse_kind(at_kind);
    const pcadv::AttackConfig cfg = make_config(kind, at_target, af);
    const pcadv::PointCloud& victim = ds.examples[victim_id].cloud;
    const std::vector<pcadv::PointCloud> targets =
        pcadv::select_target_examples(ds, at_target, cfg.seed);

    pcadv::AttackResult r;
    switch (kind) {
      case pcadv::AttackKind::Perturb: r = pcadv::attack_perturb(params, victim, cfg); break;
      case pcadv::AttackKind::AddPoints:
        r = pcadv::attack_add_points(params, victim, cfg, &targets);
        break;
      case pcadv::AttackKind::Clusters:
        r = pcadv::attack_add_clusters(params, victim, targets, cfg);
        break;
      case pcadv::AttackKind::Objects:
        r = pcadv::attack_add_objects(params, victim, targets, cfg);
        break;
    }
    std::printf(
        "success=%d predicted=%s lambda=%s l2=%s hausdorff=%s chamfer=%s farthest=%s "
        "count_added=%s\n",
        r.success ? 1 : 0,
        r.predicted >= 0 ? ds.class_names[r.predicted].c_str() : "-",
        pcadv::detail::fmt_double(r.best_lambda).c_str(), opt_str(r.metrics.l2).c_str(),
        opt_str(r.metrics.hausdorff).c_str(), opt_str(r.metrics.chamfer).c_str(),
        opt_str(r.metrics.farthest).c_str(), opt_str(r.metrics.count_added).c_str());

    if (!at_export.empty()) {
      std::filesystem::create_directories(at_export);
      const std::filesystem::path dir(at_export);
      pcadv::save_cloud_ply(victim, dir / "victim.ply");
      pcadv::save_cloud_ply(r.adversarial, dir / "adversarial.ply");
      if (!r.added_sets.empty()) {
        pcadv::PointCloud added;
        for (const auto& s : r.added_sets) added = added.concat(s);
        pcadv::save_cloud_ply(added, dir / "added.ply");
      }
    }
    if (!at_log.empty()) {
      nlohmann::json rec;
      rec["attack_kind"] = pcadv::attack_kind_name(kind);
      rec["victim_index"] = victim_id;
      rec["victim_class"] = ds.class_names[ds.examples[victim_id].label];
      rec["target_class"] = ds.class_names[at_target];
      rec["k"] = (kind == pcadv::AttackKind::Clusters || kind == pcadv::AttackKind::Objects)
                     ? cfg.k
                     : 0;
      rec["success"] = r.success;
      rec["best_lambda"] = r.best_lambda;
      nlohmann::json m;
      auto put = [&m](const char* key, const std::optional<double>& v) {
        if (v) m[key] = *v;
      };
      put("l2", r.metrics.l2);
      put("hausdorff", r.metrics.hausdorff);
      put("chamfer", r.metrics.chamfer);
      put("farthest", r.metrics.farthest);
      put("count_added", r.metrics.count_added);
      put("composite", r.metrics.composite);
      rec["metrics"] = std::move(m);
      rec["inner_iterations"] = r.inner_iterations;
      std::ofstream log(at_log, std::ios::app);
      if (!log) throw std::runtime_error("cannot open run log " + at_log);
      log << rec.dump() << "\n";
    }
    return 0;
  }

  if (mx->parsed()) {
    const pcadv::ModelParams params = pcadv::load_checkpoint(mx_ckpt);
    const pcadv::Dataset ds = pcadv::load_dataset(mx_data);
    check_model_dataset(params, ds);
    const pcadv::AttackKind kind = parse_kind(mx_kind);
    const pcadv::AttackConfig cfg = make_config(kind, 0, mf);
    const pcadv::AttackMatrixReport rep = pcadv::run_matrix(params, ds, kind, cfg, mcfg);
    pcadv::emit_report(rep, pcadv::ReportFormat::Csv, mx_out);
    pcadv::emit_report(rep, pcadv::ReportFormat::Markdown, mx_out);
    const std::string stem = std::string(pcadv::attack_kind_name(kind)) +
                             (rep.k > 0 ? "_k" + std::to_string(rep.k) : "");
    pcadv::write_job_log(rep, std::filesystem::path(mx_out) / (stem + "_jobs.jsonl"));
    std::printf("jobs=%zu success_rate=%s out=%s\n", rep.jobs.size(),
                pcadv::detail::fmt_double(rep.average.success_rate).c_str(), mx_out.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

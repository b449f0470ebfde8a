#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcadv/attack.hpp"
#include "pcadv/dataset.hpp"
#include "pcadv/model.hpp"

namespace pcadv {

struct JobRecord {
  int job_id = 0;
  AttackKind kind = AttackKind::Perturb;
  int victim_index = -1;
  int victim_class = -1;
  int target_class = -1;
  int k = 0;
  bool success = false;
  double best_lambda = 0.0;
  AttackMetrics metrics;
  double wall_time_s = 0.0;
  long long inner_iterations = 0;
  std::vector<double> point_shifts;       // perturbation: per-point shift magnitudes
  std::vector<double> nearest_distances;  // generation: added-point distance to the original
};

struct PairStats {
  int victim_class = -1;
  int target_class = -1;
  int jobs = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_l2, mean_hausdorff, mean_chamfer, mean_far, mean_count;
  std::optional<double> mean_composite;
  double mean_wall = 0.0;

  bool operator==(const PairStats&) const = default;
};

struct CaseStats {
  std::string label;
  int jobs = 0;
  double success_rate = 0.0;
  std::optional<double> mean_l2, mean_hausdorff, mean_chamfer, mean_far, mean_count;
  std::optional<double> mean_composite;
};

struct HistBin {
  double lo = 0.0, hi = 0.0;
  long long count = 0;
  double fraction = 0.0;
};

inline constexpr double kShiftBreakpoints[] = {0.005, 0.01, 0.02, 0.03, 0.05};

struct AttackMatrixReport {
  AttackKind kind = AttackKind::Perturb;
  int k = 0;
  std::vector<std::string> class_names;
  std::vector<JobRecord> jobs;
  std::vector<PairStats> pairs;  // ordered by (victim_class, target_class)
  CaseStats best, average, worst;
  std::vector<double> shift_cdf;   // at kShiftBreakpoints; perturbation matrices only
  std::vector<HistBin> nearest_hist;  // generation matrices only
};

struct MatrixConfig {
  int victims_per_class = 5;
  int workers = 1;
  bool record_timing = false;  // real wall times break byte-determinism; opt in
};

// ---------------------------------------------------------------------------
// Aggregation

namespace detail {

struct MeanAcc {
  double sum = 0.0;
  int n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / n;
  }
};

template <typename Stats>
void fill_means_from_jobs(Stats& st, const std::vector<const JobRecord*>& jobs) {
  MeanAcc l2, ha, ch, fa, co, cp;
  int succ = 0;
  double wall = 0.0;
  for (const JobRecord* j : jobs) {
    wall += j->wall_time_s;
    if (!j->success) continue;
    ++succ;
    l2.add(j->metrics.l2);
    ha.add(j->metrics.hausdorff);
    ch.add(j->metrics.chamfer);
    fa.add(j->metrics.farthest);
    co.add(j->metrics.count_added);
    cp.add(j->metrics.composite);
  }
  st.jobs = static_cast<int>(jobs.size());
  st.success_rate = jobs.empty() ? 0.0 : static_cast<double>(succ) / jobs.size();
  st.mean_l2 = l2.mean();
  st.mean_hausdorff = ha.mean();
  st.mean_chamfer = ch.mean();
  st.mean_far = fa.mean();
  st.mean_count = co.mean();
  st.mean_composite = cp.mean();
  if constexpr (requires { st.successes; }) st.successes = succ;
  if constexpr (requires { st.mean_wall; })
    st.mean_wall = jobs.empty() ? 0.0 : wall / jobs.size();
}

}  // namespace detail

inline void aggregate_report(AttackMatrixReport& rep) {
  std::map<std::pair<int, int>, std::vector<const JobRecord*>> by_pair;
  std::vector<const JobRecord*> all;
  for (const JobRecord& j : rep.jobs) {
    by_pair[{j.victim_class, j.target_class}].push_back(&j);
    all.push_back(&j);
  }
  rep.pairs.clear();
  for (const auto& [key, jobs] : by_pair) {
    PairStats st;
    st.victim_class = key.first;
    st.target_class = key.second;
    detail::fill_means_from_jobs(st, jobs);
    rep.pairs.push_back(st);
  }
  detail::fill_means_from_jobs(rep.average, all);
  rep.average.label = "average";

  // best: highest success rate, then smallest mean D; worst: lowest success
  // rate, ties to the larger mean D (undefined D counts as hardest)
  auto composite_or = [](const PairStats& p, double fallback) {
    return p.mean_composite ? *p.mean_composite : fallback;
  };
  const double inf = std::numeric_limits<double>::infinity();
  const PairStats* best = nullptr;
  const PairStats* worst = nullptr;
  for (const PairStats& p : rep.pairs) {
    if (!best || p.success_rate > best->success_rate ||
        (p.success_rate == best->success_rate &&
         composite_or(p, inf) < composite_or(*best, inf)))
      best = &p;
    if (!worst || p.success_rate < worst->success_rate ||
        (p.success_rate == worst->success_rate &&
         composite_or(p, inf) > composite_or(*worst, inf)))
      worst = &p;
  }
  auto to_case = [&rep, &by_pair](const PairStats* p, const char* label) {
    CaseStats cs;
    cs.label = label;
    if (!p) return cs;
    detail::fill_means_from_jobs(cs, by_pair[{p->victim_class, p->target_class}]);
    cs.label = label;
    return cs;
  };
  rep.best = to_case(best, "best");
  rep.worst = to_case(worst, "worst");

  // distribution tables
  rep.shift_cdf.clear();
  rep.nearest_hist.clear();
  if (rep.kind == AttackKind::Perturb) {
    long long total = 0;
    std::vector<long long> below(std::size(kShiftBreakpoints), 0);
    for (const JobRecord& j : rep.jobs)
      for (double s : j.point_shifts) {
        ++total;
        for (std::size_t b = 0; b < std::size(kShiftBreakpoints); ++b)
          if (s <= kShiftBreakpoints[b]) ++below[b];
      }
    for (std::size_t b = 0; b < std::size(kShiftBreakpoints); ++b)
      rep.shift_cdf.push_back(total == 0 ? 0.0
                                         : static_cast<double>(below[b]) / total);
  } else {
    static constexpr double edges[] = {0.0, 0.005, 0.01, 0.02, 0.03, 0.05,
                                       0.1, 0.2,   0.5,  1.0,  2.0};
    const std::size_t nb = std::size(edges) - 1;
    std::vector<long long> counts(nb + 1, 0);  // +1 overflow bin
    long long total = 0;
    for (const JobRecord& j : rep.jobs)
      for (double d : j.nearest_distances) {
        ++total;
        std::size_t b = 0;
        while (b < nb && d > edges[b + 1]) ++b;
        if (b == nb - 1 && d > edges[nb]) b = nb;
        ++counts[b];
      }
    for (std::size_t b = 0; b <= nb; ++b) {
      HistBin bin;
      bin.lo = b < nb ? edges[b] : edges[nb];
      bin.hi = b < nb ? edges[b + 1] : std::numeric_limits<double>::infinity();
      bin.count = counts[b];
      bin.fraction = total == 0 ? 0.0 : static_cast<double>(counts[b]) / total;
      rep.nearest_hist.push_back(bin);
    }
  }
}

// Empirical CDF of per-point shift magnitudes at the fixed breakpoints.
inline std::vector<double> shift_distribution(const std::vector<JobRecord>& jobs) {
  for (const JobRecord& j : jobs)
    if (j.kind != AttackKind::Perturb)
      throw std::invalid_argument(
          "shift_distribution: only perturbation results have point correspondence");
  AttackMatrixReport tmp;
  tmp.kind = AttackKind::Perturb;
  tmp.jobs = jobs;
  aggregate_report(tmp);
  return tmp.shift_cdf;
}

// ---------------------------------------------------------------------------
// Matrix execution

// Deterministic draw of up to `count` test examples of one class, used to
// seed cluster/object attacks against that class as the target.
inline std::vector<PointCloud> select_target_examples(const Dataset& ds, int cls,
                                                      std::uint64_t seed,
                                                      std::size_t count = 8) {
  std::vector<int> pool = ds.indices(Split::Test, cls);
  Rng rng(mix_seed({seed, 0x5447u, static_cast<std::uint64_t>(cls)}));
  rng.shuffle(pool);
  std::vector<PointCloud> out;
  for (std::size_t i = 0; i < pool.size() && i < count; ++i)
    out.push_back(ds.examples[pool[i]].cloud);
  return out;
}

inline AttackMatrixReport run_matrix(const ModelParams& params, const Dataset& ds,
                                     AttackKind kind, const AttackConfig& base_cfg,
                                     const MatrixConfig& mcfg) {
  if (mcfg.victims_per_class < 1)
    throw std::invalid_argument("run_matrix: victims_per_class must be >= 1");
  if (params.classes() != ds.classes())
    throw std::invalid_argument("run_matrix: checkpoint classes (" +
                                std::to_string(params.classes()) + ") != dataset classes (" +
                                std::to_string(ds.classes()) + ")");
  const int c = ds.classes();

  // victims: correctly-classified test examples, deterministic shuffled order,
  // misclassified candidates skipped and replaced
  ForwardWorkspace ws;
  std::vector<std::vector<int>> victims(c);
  for (int cls = 0; cls < c; ++cls) {
    std::vector<int> pool = ds.indices(Split::Test, cls);
    Rng rng(mix_seed({base_cfg.seed, 0x5649u, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(pool);
    for (int ix : pool) {
      if (static_cast<int>(victims[cls].size()) >= mcfg.victims_per_class) break;
      if (predicted_class(forward_ws(params, ds.examples[ix].cloud, ws)) == cls)
        victims[cls].push_back(ix);
    }
    if (static_cast<int>(victims[cls].size()) < mcfg.victims_per_class)
      throw std::runtime_error("run_matrix: class '" + ds.class_names[cls] + "' has only " +
                               std::to_string(victims[cls].size()) +
                               " correctly-classified test examples, need " +
                               std::to_string(mcfg.victims_per_class));
  }

  // target-class example clouds for seeding (clusters/objects/add-points@target)
  std::vector<std::vector<PointCloud>> target_pool(c);
  if (kind == AttackKind::Clusters || kind == AttackKind::Objects ||
      base_cfg.init_source == InitSource::TargetClass) {
    for (int cls = 0; cls < c; ++cls)
      target_pool[cls] = select_target_examples(ds, cls, base_cfg.seed);
  }

  struct JobSpec {
    int victim_index, victim_class, target_class;
  };
  std::vector<JobSpec> specs;
  for (int vc = 0; vc < c; ++vc)
    for (int slot = 0; slot < mcfg.victims_per_class; ++slot)
      for (int tc = 0; tc < c; ++tc)
        if (tc != vc) specs.push_back({victims[vc][slot], vc, tc});

  AttackMatrixReport rep;
  rep.kind = kind;
  rep.k = (kind == AttackKind::Clusters || kind == AttackKind::Objects) ? base_cfg.k : 0;
  rep.class_names = ds.class_names;
  rep.jobs.resize(specs.size());

  auto run_job = [&](std::size_t id) {
    const JobSpec& spec = specs[id];
    const PointCloud& victim = ds.examples[spec.victim_index].cloud;
    AttackConfig cfg = base_cfg;
    cfg.target = spec.target_class;
    cfg.seed = mix_seed({base_cfg.seed, 0x4a4fu, static_cast<std::uint64_t>(id)});
    const auto t0 = std::chrono::steady_clock::now();
    AttackResult r;
    switch (kind) {
      case AttackKind::Perturb: r = attack_perturb(params, victim, cfg); break;
      case AttackKind::AddPoints:
        r = attack_add_points(params, victim, cfg, &target_pool[spec.target_class]);
        break;
      case AttackKind::Clusters:
        r = attack_add_clusters(params, victim, target_pool[spec.target_class], cfg);
        break;
      case AttackKind::Objects:
        r = attack_add_objects(params, victim, target_pool[spec.target_class], cfg);
        break;
    }
    JobRecord& rec = rep.jobs[id];
    rec.job_id = static_cast<int>(id);
    rec.kind = kind;
    rec.victim_index = spec.victim_index;
    rec.victim_class = spec.victim_class;
    rec.target_class = spec.target_class;
    rec.k = rep.k;
    rec.success = r.success;
    rec.best_lambda = r.best_lambda;
    rec.metrics = r.metrics;
    rec.inner_iterations = r.inner_iterations;
    if (r.success) {
      if (kind == AttackKind::Perturb) {
        rec.point_shifts.reserve(victim.size());
        for (std::size_t i = 0; i < victim.size(); ++i)
          rec.point_shifts.push_back(distance(victim.points[i], r.adversarial.points[i]));
      } else {
        for (const PointCloud& added : r.added_sets)
          for (const Vec3& p : added.points)
            rec.nearest_distances.push_back(
                std::sqrt(detail::nearest_squared(victim, p).first));
      }
    }
    if (mcfg.record_timing) {
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  const int workers = std::max(1, mcfg.workers);
  if (workers == 1 || specs.size() <= 1) {
    for (std::size_t id = 0; id < specs.size(); ++id) run_job(id);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int nthreads = static_cast<int>(std::min<std::size_t>(workers, specs.size()));
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t id = next.fetch_add(1);
          if (id >= specs.size()) return;
          run_job(id);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  aggregate_report(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Emission: CSV (fixed schema), markdown, JSONL job log

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("parse_double: bad field '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline constexpr const char* kPairsCsvHeader =
    "attack_kind,victim_class,target_class,k,success_rate,mean_L2,mean_hausdorff,"
    "mean_chamfer,mean_far,mean_count_added,wall_time_s";

inline void write_pairs_csv(const AttackMatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_pairs_csv: cannot open " + path.string());
  out << kPairsCsvHeader << "\n";
  for (const PairStats& p : rep.pairs) {
    out << attack_kind_name(rep.kind) << ',' << rep.class_names[p.victim_class] << ','
        << rep.class_names[p.target_class] << ',' << rep.k << ','
        << detail::fmt_double(p.success_rate) << ',' << detail::fmt_opt(p.mean_l2) << ','
        << detail::fmt_opt(p.mean_hausdorff) << ',' << detail::fmt_opt(p.mean_chamfer) << ','
        << detail::fmt_opt(p.mean_far) << ',' << detail::fmt_opt(p.mean_count) << ','
        << detail::fmt_double(p.mean_wall) << "\n";
  }
  if (!out) throw std::runtime_error("write_pairs_csv: write failed for " + path.string());
}

inline std::vector<PairStats> parse_pairs_csv(const std::filesystem::path& path,
                                              const std::vector<std::string>& class_names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_pairs_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kPairsCsvHeader)
    throw std::runtime_error("parse_pairs_csv: unexpected header in " + path.string());
  auto class_id = [&class_names, &path](const std::string& name) {
    for (std::size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == name) return static_cast<int>(i);
    throw std::runtime_error("parse_pairs_csv: unknown class '" + name + "' in " +
                             path.string());
  };
  std::vector<PairStats> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 11)
      throw std::runtime_error("parse_pairs_csv: bad field count in " + path.string());
    PairStats p;
    p.victim_class = class_id(f[1]);
    p.target_class = class_id(f[2]);
    p.success_rate = detail::parse_double(f[4]);
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return detail::parse_double(s);
    };
    p.mean_l2 = opt(f[5]);
    p.mean_hausdorff = opt(f[6]);
    p.mean_chamfer = opt(f[7]);
    p.mean_far = opt(f[8]);
    p.mean_count = opt(f[9]);
    p.mean_wall = detail::parse_double(f[10]);
    out.push_back(p);
  }
  return out;
}

inline void write_cases_csv(const AttackMatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_cases_csv: cannot open " + path.string());
  out << "case,attack_kind,k,jobs,success_rate,mean_L2,mean_hausdorff,mean_chamfer,mean_far,"
         "mean_count_added,mean_composite\n";
  for (const CaseStats* cs : {&rep.best, &rep.average, &rep.worst}) {
    out << cs->label << ',' << attack_kind_name(rep.kind) << ',' << rep.k << ',' << cs->jobs
        << ',' << detail::fmt_double(cs->success_rate) << ',' << detail::fmt_opt(cs->mean_l2)
        << ',' << detail::fmt_opt(cs->mean_hausdorff) << ',' << detail::fmt_opt(cs->mean_chamfer)
        << ',' << detail::fmt_opt(cs->mean_far) << ',' << detail::fmt_opt(cs->mean_count) << ','
        << detail::fmt_opt(cs->mean_composite) << "\n";
  }
}

inline void write_histogram_csv(const AttackMatrixReport& rep,
                                const std::filesystem::path& dir) {
  if (rep.kind == AttackKind::Perturb) {
    std::ofstream out(dir / "shift_cdf.csv");
    if (!out) throw std::runtime_error("write_histogram_csv: cannot open shift_cdf.csv");
    out << "breakpoint,fraction_le\n";
    for (std::size_t b = 0; b < rep.shift_cdf.size(); ++b)
      out << detail::fmt_double(kShiftBreakpoints[b]) << ','
          << detail::fmt_double(rep.shift_cdf[b]) << "\n";
  } else {
    std::ofstream out(dir / "nearest_distance_hist.csv");
    if (!out)
      throw std::runtime_error("write_histogram_csv: cannot open nearest_distance_hist.csv");
    out << "bin_lo,bin_hi,count,fraction\n";
    for (const HistBin& b : rep.nearest_hist)
      out << detail::fmt_double(b.lo) << ','
          << (std::isinf(b.hi) ? std::string("inf") : detail::fmt_double(b.hi)) << ','
          << b.count << ',' << detail::fmt_double(b.fraction) << "\n";
  }
}

inline void write_markdown(const AttackMatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_markdown: cannot open " + path.string());
  out << "# " << attack_kind_name(rep.kind) << " attack matrix";
  if (rep.k > 0) out << " (k=" << rep.k << ")";
  out << "\n\n";
  const char* primary = rep.kind == AttackKind::Clusters ? "mean farthest" : "mean L2";
  if (rep.kind == AttackKind::AddPoints) primary = "mean metric";
  out << "| case | success rate | " << primary
      << " | mean hausdorff | mean chamfer | points added |\n";
  out << "|---|---|---|---|---|---|\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? detail::fmt_double(*v) : std::string("-");
  };
  for (const CaseStats* cs : {&rep.best, &rep.average, &rep.worst}) {
    std::optional<double> prim = cs->mean_l2;
    if (rep.kind == AttackKind::Clusters) prim = cs->mean_far;
    if (rep.kind == AttackKind::AddPoints) prim = cs->mean_composite;
    out << "| " << cs->label << " | " << detail::fmt_double(cs->success_rate) << " | "
        << cell(prim) << " | " << cell(cs->mean_hausdorff) << " | " << cell(cs->mean_chamfer)
        << " | " << cell(cs->mean_count) << " |\n";
  }
  out << "\n";
  if (rep.kind == AttackKind::Perturb) {
    out << "| shift breakpoint | fraction <= |\n|---|---|\n";
    for (std::size_t b = 0; b < rep.shift_cdf.size(); ++b)
      out << "| " << detail::fmt_double(kShiftBreakpoints[b]) << " | "
          << detail::fmt_double(rep.shift_cdf[b]) << " |\n";
  }
}

inline void write_job_log(const AttackMatrixReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_job_log: cannot open " + path.string());
  for (const JobRecord& j : rep.jobs) {
    nlohmann::json rec;
    rec["job_id"] = j.job_id;
    rec["attack_kind"] = attack_kind_name(j.kind);
    rec["victim_index"] = j.victim_index;
    rec["victim_class"] = rep.class_names[j.victim_class];
    rec["target_class"] = rep.class_names[j.target_class];
    rec["k"] = j.k;
    rec["success"] = j.success;
    rec["best_lambda"] = j.best_lambda;
    nlohmann::json m;
    auto put = [&m](const char* key, const std::optional<double>& v) {
      if (v) m[key] = *v;
    };
    put("l2", j.metrics.l2);
    put("hausdorff", j.metrics.hausdorff);
    put("chamfer", j.metrics.chamfer);
    put("farthest", j.metrics.farthest);
    put("count_added", j.metrics.count_added);
    put("composite", j.metrics.composite);
    rec["metrics"] = std::move(m);
    rec["wall_time_s"] = j.wall_time_s;
    rec["inner_iterations"] = j.inner_iterations;
    out << rec.dump() << "\n";
  }
}

enum class ReportFormat { Csv, Markdown };

// Table-shaped outputs; byte-deterministic given the report.
inline void emit_report(const AttackMatrixReport& rep, ReportFormat format,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = std::string(attack_kind_name(rep.kind)) +
                           (rep.k > 0 ? "_k" + std::to_string(rep.k) : "");
  if (format == ReportFormat::Csv) {
    write_pairs_csv(rep, dir / (stem + "_pairs.csv"));
    write_cases_csv(rep, dir / (stem + "_cases.csv"));
    write_histogram_csv(rep, dir);
  } else {
    write_markdown(rep, dir / (stem + "_report.md"));
  }
}

}  // namespace pcadv

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "core/config.hpp"
#include "core/datasets.hpp"
#include "core/error.hpp"
#include "core/objectives.hpp"
#include "core/optimizers.hpp"
#include "core/simnet.hpp"

namespace core {

inline constexpr char kArtifactVersion[] = "0.1.0";

/// FNV-1a over the raw config bytes; stable fingerprint for the manifest.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-error: cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("io-error: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  unsigned jobs = 1;
  std::optional<std::filesystem::path> output_root;
};

struct CellOutput {
  std::string label;
  std::string algorithm;
  std::uint64_t seed = 0;
  RunRecord record;
  std::filesystem::path csv_path;
};

struct ExperimentOutput {
  std::filesystem::path directory;
  std::vector<CellOutput> cells;
  std::filesystem::path summary_path;
  std::filesystem::path manifest_path;
};

namespace detail {

/// The two objective families a config can instantiate; optimizer drivers
/// are templates, so dispatch happens once here.
struct BuiltObjective {
  std::optional<QuadraticObjective> quadratic;
  std::optional<RidgeSeparableObjective> ridge;
  double f_star = 0.0;

  Eigen::Index dim() const {
    return quadratic ? quadratic->dim() : ridge->dim();
  }
};

inline BuiltObjective build_objective(const ExperimentConfig& cfg) {
  BuiltObjective out;
  if (cfg.objective.family == ObjectiveConfig::Family::quadratic) {
    out.quadratic.emplace(cfg.objective.quadratic.spectrum(),
                          cfg.topology.n);
    out.f_star = 0.0;
    return out;
  }
  const RidgeConfig& rc = cfg.objective.ridge;
  std::ifstream in(rc.resolved_dataset);
  if (!in)
    throw Error("io-error: cannot open dataset " +
                rc.resolved_dataset.string());
  LabeledDataset ds = parse_libsvm(in);
  if (rc.normalize) ds = normalize_rows(std::move(ds));
  std::vector<double> labels;
  if (rc.link == Link::logistic) labels = binary_labels(ds);
  out.ridge.emplace(dense_matrix(ds), std::move(labels), rc.link, rc.alpha,
                    cfg.topology.n, rc.shard_seed);
  if (rc.link != Link::bounded_nonconvex) {
    const Vector x0 = cfg.initial_point.build(out.ridge->dim());
    out.f_star = estimate_minimum(*out.ridge, x0, out.ridge->smoothness(),
                                  200000);
  }
  return out;
}

inline double trace_bound_of(const QuadraticObjective& o) {
  return o.trace_exact();
}
inline double trace_bound_of(const RidgeSeparableObjective& o) {
  return o.trace_bound();
}
inline double strong_convexity_of(const QuadraticObjective& o) {
  return o.strong_convexity();
}
inline double strong_convexity_of(const RidgeSeparableObjective& o) {
  return o.alpha();
}
inline double sqrt_eigen_sum_of(const QuadraticObjective& o) {
  return o.sum_sqrt_eigenvalues();
}
inline double sqrt_eigen_sum_of(const RidgeSeparableObjective&) {
  throw Error("invalid-config: core_agd needs the quadratic family");
}
inline std::size_t rows_of(const QuadraticObjective&) { return 1; }
inline std::size_t rows_of(const RidgeSeparableObjective& o) {
  return static_cast<std::size_t>(o.rows());
}

template <typename Objective>
RunRecord run_cell(const Objective& obj, double f_star,
                   const ExperimentConfig& cfg, const AlgorithmSpec& alg,
                   std::uint64_t seed, const Vector& x0) {
  const std::uint64_t rounds = alg.max_rounds.value_or(cfg.max_rounds);
  if (alg.name == "core_gd") {
    GdConfig gd;
    gd.m = alg.m;
    gd.trace_A = trace_bound_of(obj);
    gd.smoothness = obj.smoothness();
    gd.strong_convexity = strong_convexity_of(obj);
    gd.max_rounds = rounds;
    gd.target_gap = cfg.target_gap;
    gd.allow_large_m = alg.allow_large_m;
    return run_core_gd(obj, x0, f_star, gd, seed, cfg.topology);
  }
  if (alg.name == "core_agd") {
    AgdConfig agd;
    agd.m = alg.m;
    agd.sqrt_eigen_sum = sqrt_eigen_sum_of(obj);
    agd.mu = strong_convexity_of(obj);
    agd.max_rounds = rounds;
    agd.target_gap = cfg.target_gap;
    return run_core_agd(obj, x0, agd, seed, cfg.topology);
  }
  if (alg.name == "core_gd_nonconvex") {
    NcConfig nc;
    nc.m = alg.m;
    nc.r1 = trace_bound_of(obj);
    nc.hessian_lipschitz = alg.hessian_lipschitz;
    nc.smoothness = obj.smoothness();
    nc.delta_f = alg.delta_f;
    nc.confidence_delta = alg.confidence_delta;
    nc.option = alg.option;
    nc.epsilon = alg.epsilon;
    nc.max_rounds = rounds;
    nc.data_rows = rows_of(obj);
    nc.grad_norm_proxy = alg.grad_norm_proxy;
    return run_core_gd_nonconvex(obj, x0, nc, seed, cfg.topology);
  }
  if (alg.name == "cgd")
    return run_cgd(obj, x0, f_star, obj.smoothness(), cfg.target_gap,
                   rounds, cfg.topology);
  if (alg.name == "cagd")
    return run_cagd(obj, x0, f_star, obj.smoothness(),
                    strong_convexity_of(obj), cfg.target_gap, rounds,
                    cfg.topology);
  throw Error("invalid-config: unknown algorithm '" + alg.name + "'");
}

inline std::string status_histogram(
    const std::vector<const CellOutput*>& cells) {
  std::map<std::string, int> counts;
  for (const CellOutput* c : cells)
    ++counts[run_status_name(c->record.status)];
  std::string out;
  for (const auto& [name, count] : counts) {
    if (!out.empty()) out += ';';
    out += name + ":" + std::to_string(count);
  }
  return out;
}

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_dev = std::numeric_limits<double>::quiet_NaN();
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  double acc = 0.0;
  for (const double x : v) acc += x;
  out.mean = acc / static_cast<double>(v.size());
  if (v.size() == 1) {
    out.std_dev = 0.0;
    return out;
  }
  double sq = 0.0;
  for (const double x : v) sq += (x - out.mean) * (x - out.mean);
  out.std_dev = std::sqrt(sq / static_cast<double>(v.size() - 1));
  return out;
}

}  // namespace detail

/// Aggregates one summary row per algorithm.  A cell reaches the target iff
/// its run converged; its floats-to-target then equal the ledger total for
/// that run, which run_experiment cross-checks.
inline std::string summary_csv(const ExperimentConfig& cfg,
                               const std::vector<CellOutput>& cells) {
  std::ostringstream out;
  out.precision(17);
  out << "label,algorithm,seeds,reached,floats_to_target_mean,"
         "floats_to_target_std,rounds_to_target_mean,rounds_to_target_std,"
         "final_gap_mean,final_gap_std,status\n";
  for (const auto& alg : cfg.algorithms) {
    std::vector<const CellOutput*> mine;
    for (const auto& cell : cells)
      if (cell.label == alg.label) mine.push_back(&cell);
    std::vector<double> floats, rounds, gaps;
    for (const CellOutput* c : mine) {
      gaps.push_back(c->record.final_gap);
      if (c->record.status == RunStatus::converged) {
        floats.push_back(
            static_cast<double>(c->record.ledger.total_floats()));
        rounds.push_back(static_cast<double>(c->record.terminal_round));
      }
    }
    const auto f = detail::mean_std(floats);
    const auto r = detail::mean_std(rounds);
    const auto g = detail::mean_std(gaps);
    out << alg.label << ',' << alg.name << ',' << mine.size() << ','
        << floats.size() << ',' << f.mean << ',' << f.std_dev << ','
        << r.mean << ',' << r.std_dev << ',' << g.mean << ',' << g.std_dev
        << ',' << detail::status_histogram(mine) << '\n';
  }
  return out.str();
}

inline std::string manifest_json(const ExperimentConfig& cfg,
                                 const RunOptions& opts,
                                 const std::vector<std::uint64_t>& seeds) {
  Json m;
  m["config_hash"] = "fnv1a64:" + [&] {
    std::ostringstream hex;
    hex << std::hex << fnv1a64(cfg.raw_text);
    return hex.str();
  }();
  m["config_source"] = cfg.source_name;
  m["format"] = 1;
  Json algos = Json::array();
  for (const auto& alg : cfg.algorithms) algos.push_back(alg.label);
  m["algorithms"] = algos;
  m["seeds"] = seeds;
  if (opts.seed_override)
    m["seed_override"] = *opts.seed_override;
  else
    m["seed_override"] = nullptr;
  m["target_gap"] = cfg.target_gap;
  m["max_rounds"] = cfg.max_rounds;
  m["versions"] = {
      {"artifact", kArtifactVersion},
      {"compiler", __VERSION__},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                            "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
  };
  return m.dump(2) + "\n";
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                       const RunOptions& opts = {}) {
  std::vector<std::uint64_t> seeds =
      opts.seed_override ? std::vector<std::uint64_t>{*opts.seed_override}
                         : cfg.seeds;

  const std::filesystem::path root =
      opts.output_root.value_or(std::filesystem::path("."));
  ExperimentOutput out;
  out.directory = root / cfg.output_dir;
  std::filesystem::create_directories(out.directory);

  const detail::BuiltObjective built = detail::build_objective(cfg);
  const Vector x0 = cfg.initial_point.build(built.dim());

  for (const auto& alg : cfg.algorithms)
    for (const std::uint64_t seed : seeds) {
      CellOutput cell;
      cell.label = alg.label;
      cell.algorithm = alg.name;
      cell.seed = seed;
      cell.csv_path = out.directory /
                      (alg.label + "_seed" + std::to_string(seed) + ".csv");
      out.cells.push_back(std::move(cell));
    }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= out.cells.size()) return;
      CellOutput& cell = out.cells[i];
      try {
        const auto& alg = *[&] {
          for (const auto& a : cfg.algorithms)
            if (a.label == cell.label) return &a;
          throw Error("internal-error: lost algorithm label");
        }();
        cell.record =
            built.quadratic
                ? detail::run_cell(*built.quadratic, built.f_star, cfg, alg,
                                   cell.seed, x0)
                : detail::run_cell(*built.ridge, built.f_star, cfg, alg,
                                   cell.seed, x0);
        if (cell.record.status == RunStatus::converged &&
            !cell.record.rows.empty() &&
            cell.record.rows.back().floats !=
                cell.record.ledger.total_floats())
          throw Error("internal-error: ledger disagrees with the trajectory "
                      "floats column");
        atomic_write(cell.csv_path, cell.record.to_csv());
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const unsigned jobs = std::max(1u, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  out.summary_path = out.directory / "summary.csv";
  atomic_write(out.summary_path, summary_csv(cfg, out.cells));
  out.manifest_path = out.directory / "manifest.json";
  atomic_write(out.manifest_path, manifest_json(cfg, opts, seeds));
  return out;
}

}  // namespace core

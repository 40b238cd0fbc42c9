#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/objectives.hpp"
#include "core/simnet.hpp"

namespace core {

enum class RunStatus { converged, max_rounds, diverged };

inline std::string run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_rounds: return "max-rounds";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

/// Trajectory of one optimizer run.  Row k describes the iterate x^k:
/// floats is the cumulative communication spent to reach it, step_size the
/// step used to leave it (0 on the terminal row).
struct RunRecord {
  struct Row {
    std::uint64_t round = 0;
    std::uint64_t floats = 0;
    double f_gap = 0.0;
    double grad_norm = 0.0;
    double step_size = 0.0;
  };

  std::vector<Row> rows;
  RunStatus status = RunStatus::max_rounds;
  std::uint64_t terminal_round = 0;
  double final_gap = std::numeric_limits<double>::infinity();
  double min_grad_norm = std::numeric_limits<double>::infinity();
  Vector final_iterate;
  CommLedger ledger;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "round,floats,f_gap,grad_norm,step_size\n";
    for (const auto& r : rows)
      out << r.round << ',' << r.floats << ',' << r.f_gap << ','
          << r.grad_norm << ',' << r.step_size << '\n';
    return out.str();
  }

  std::optional<std::uint64_t> floats_to_gap(double target) const {
    for (const auto& r : rows)
      if (r.f_gap <= target) return r.floats;
    return std::nullopt;
  }

  std::optional<std::uint64_t> rounds_to_gap(double target) const {
    for (const auto& r : rows)
      if (r.f_gap <= target) return r.round;
    return std::nullopt;
  }
};

constexpr double kDivergenceFactor = 1e6;

struct GdConfig {
  std::uint32_t m = 1;
  double trace_A = 0.0;
  double smoothness = 0.0;
  double strong_convexity = 0.0;
  std::uint64_t max_rounds = 1000;
  double target_gap = 0.0;
  bool allow_large_m = false;

  double step_size() const { return m / (4.0 * trace_A); }

  void validate() const {
    if (m == 0) throw Error("invalid-budget: m must be >= 1");
    if (!(trace_A > 0.0))
      throw Error("invalid-input: trace bound must be positive");
    if (!(smoothness > 0.0))
      throw Error("invalid-input: smoothness must be positive");
    if (!allow_large_m &&
        static_cast<double>(m) > trace_A / smoothness)
      throw Error("invalid-budget: m exceeds trace(A)/L; the per-round "
                  "rate caps at m = trace(A)/L");
  }
};

struct AgdConfig {
  std::uint32_t m = 1;
  double sqrt_eigen_sum = 0.0;
  double mu = 0.0;
  std::uint64_t max_rounds = 1000;
  double target_gap = 0.0;

  double step_size() const {
    const double scaled = m / (14400.0 * sqrt_eigen_sum);
    return scaled * scaled;
  }
  double beta() const { return std::sqrt(step_size() * mu); }

  void validate() const {
    if (m == 0) throw Error("invalid-budget: m must be >= 1");
    if (!(sqrt_eigen_sum > 0.0))
      throw Error("invalid-spectrum: sum of root eigenvalues must be "
                  "positive");
    if (!(mu > 0.0))
      throw Error("invalid-input: heavy-ball momentum needs mu > 0");
    if (step_size() * mu > 1.0 / (14400.0 * 14400.0) + 1e-18)
      throw Error("invalid-input: h*mu exceeds 14400^-2");
    const double b = beta();
    if (!(b > 0.0 && b < 1.0))
      throw Error("invalid-input: beta must lie in (0, 1)");
  }
};

enum class NcOption { option_i, option_ii };

struct NcConfig {
  std::uint32_t m = 1;
  double r1 = 0.0;
  double hessian_lipschitz = 0.0;
  double smoothness = 0.0;
  double delta_f = 0.0;
  double confidence_delta = 0.01;
  NcOption option = NcOption::option_ii;
  double epsilon = 0.0;
  std::uint64_t max_rounds = 1000;
  std::size_t data_rows = 1;
  bool grad_norm_proxy = false;

  void validate() const {
    if (m == 0) throw Error("invalid-budget: m must be >= 1");
    if (!(r1 > 0.0)) throw Error("invalid-input: r1 must be positive");
    if (!(hessian_lipschitz > 0.0))
      throw Error("invalid-input: Hessian Lipschitz bound must be positive");
    if (!(smoothness > 0.0))
      throw Error("invalid-input: smoothness must be positive");
    if (!(delta_f > 0.0))
      throw Error("invalid-input: initial gap bound must be positive");
    if (!(confidence_delta > 0.0 && confidence_delta < 1.0))
      throw Error("invalid-input: confidence must lie in (0, 1)");
    if (option == NcOption::option_i &&
        static_cast<double>(m) <=
            std::log(static_cast<double>(data_rows) / confidence_delta))
      throw Error("invalid-budget: option I needs m > log(N/delta)");
  }
};

/// Step size of the non-convex scheme.  The second branch divides by the
/// released scalar p, which can come out non-positive; then only the first
/// branch is defined and we fall back to it.
inline double nc_step_size(const NcConfig& cfg, Eigen::Index dim, double p) {
  const double first = cfg.m / (16.0 * cfg.r1);
  const double d = static_cast<double>(dim);
  const double common = (1.0 / 1600.0) /
                        std::sqrt(cfg.hessian_lipschitz) *
                        std::pow(d, -0.75) *
                        std::pow(static_cast<double>(cfg.m), 0.75);
  if (cfg.option == NcOption::option_ii)
    return std::min(first,
                    common * std::pow(cfg.smoothness * cfg.delta_f, -0.25));
  if (!(p > 0.0)) return first;
  return std::min(first, common / std::sqrt(p));
}

namespace detail {

struct GradientEstimator {
  const Topology* topo = nullptr;
  std::uint32_t gossip_iters = 0;
  GossipMethod method = GossipMethod::chebyshev;

  explicit GradientEstimator(const Topology& topology) : topo(&topology) {
    if (topo->kind == Topology::Kind::graph && topo->n > 1)
      gossip_iters = gossip_iterations(*topo, 1e-10);
  }

  template <typename Objective>
  StarRoundResult round(const Objective& obj, const Vector& x,
                        std::uint64_t seed, std::uint64_t round_index,
                        std::uint32_t m, CommLedger& ledger) const {
    if (topo->kind == Topology::Kind::star)
      return star_round_detailed(obj, x, seed, round_index, m, ledger);

    const auto dim = static_cast<std::uint32_t>(x.size());
    const auto basis = round_basis(seed, round_index, m, dim);
    ledger.begin_round(round_index);
    std::vector<Vector> coeff(topo->n);
    for (std::uint32_t i = 0; i < topo->n; ++i) {
      const Vector g = obj.local_grad(i, x);
      Vector p(m);
      for (std::uint32_t j = 0; j < m; ++j) p[j] = seq_dot(g, basis[j]);
      coeff[i] = std::move(p);
    }
    const auto averaged =
        gossip_average(coeff, *topo, gossip_iters, ledger, method);

    StarRoundResult out;
    out.estimate = Vector::Zero(dim);
    out.coefficient_sums.resize(m);
    for (std::uint32_t j = 0; j < m; ++j) {
      out.estimate += averaged[0][j] * basis[j];
      out.coefficient_sums[j] = averaged[0][j] * static_cast<double>(topo->n);
    }
    out.estimate /= static_cast<double>(m);
    return out;
  }
};

inline void check_machine_count(std::uint32_t obj_machines,
                                const Topology& topo) {
  if (obj_machines != topo.n)
    throw Error("invalid-input: objective machine count disagrees with "
                "topology");
}

}  // namespace detail

template <typename Objective>
RunRecord run_core_gd(const Objective& obj, const Vector& x0, double f_star,
                      const GdConfig& cfg, std::uint64_t seed,
                      const Topology& topo) {
  cfg.validate();
  detail::check_machine_count(obj.machines(), topo);
  const detail::GradientEstimator net(topo);
  const double h = cfg.step_size();

  RunRecord rec;
  Vector x = x0;
  double gap0 = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double gap = obj.value(x) - f_star;
    const double gn = obj.grad(x).norm();
    if (k == 0) gap0 = gap;
    rec.min_grad_norm = std::min(rec.min_grad_norm, gn);

    bool terminal = false;
    if (gap > kDivergenceFactor * gap0 && k > 0) {
      rec.status = RunStatus::diverged;
      terminal = true;
    } else if (cfg.target_gap > 0.0 && gap <= cfg.target_gap) {
      rec.status = RunStatus::converged;
      terminal = true;
    } else if (k >= cfg.max_rounds) {
      rec.status = RunStatus::max_rounds;
      terminal = true;
    }

    rec.rows.push_back({k, rec.ledger.total_floats(), gap, gn,
                        terminal ? 0.0 : h});
    if (terminal) {
      rec.terminal_round = k;
      rec.final_gap = gap;
      rec.final_iterate = x;
      break;
    }

    const auto est = net.round(obj, x, seed, k, cfg.m, rec.ledger);
    x -= h * est.estimate;
  }
  return rec;
}

inline RunRecord run_core_agd(const QuadraticObjective& obj, const Vector& x0,
                              const AgdConfig& cfg, std::uint64_t seed,
                              const Topology& topo) {
  cfg.validate();
  detail::check_machine_count(obj.machines(), topo);
  const detail::GradientEstimator net(topo);
  const double h = cfg.step_size();
  const double beta = cfg.beta();

  RunRecord rec;
  Vector x = x0;
  Vector x_prev = x0;
  double gap0 = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double gap = obj.value(x);
    const double gn = obj.grad(x).norm();
    if (k == 0) gap0 = gap;
    rec.min_grad_norm = std::min(rec.min_grad_norm, gn);

    bool terminal = false;
    if (gap > kDivergenceFactor * gap0 && k > 0) {
      rec.status = RunStatus::diverged;
      terminal = true;
    } else if (cfg.target_gap > 0.0 && gap <= cfg.target_gap) {
      rec.status = RunStatus::converged;
      terminal = true;
    } else if (k >= cfg.max_rounds) {
      rec.status = RunStatus::max_rounds;
      terminal = true;
    }

    rec.rows.push_back({k, rec.ledger.total_floats(), gap, gn,
                        terminal ? 0.0 : h});
    if (terminal) {
      rec.terminal_round = k;
      rec.final_gap = gap;
      rec.final_iterate = x;
      break;
    }

    const Vector y = x + (1.0 - beta) * (x - x_prev);
    const auto est = net.round(obj, y, seed, k, cfg.m, rec.ledger);
    x_prev = x;
    x = y - h * est.estimate;
  }
  return rec;
}

template <typename Objective>
RunRecord run_core_agd(const Objective&, const Vector&, const AgdConfig&,
                       std::uint64_t, const Topology&) {
  throw Error("unsupported-objective: the heavy-ball scheme is defined for "
              "quadratics; regularize and reduce first");
}

template <typename Objective>
RunRecord run_core_gd_nonconvex(const Objective& obj, const Vector& x0,
                                const NcConfig& cfg, std::uint64_t seed,
                                const Topology& topo) {
  cfg.validate();
  detail::check_machine_count(obj.machines(), topo);
  const detail::GradientEstimator net(topo);

  RunRecord rec;
  Vector x = x0;
  double f0 = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double f = obj.value(x);
    const double gn = obj.grad(x).norm();
    if (k == 0) f0 = f;
    rec.min_grad_norm = std::min(rec.min_grad_norm, gn);

    bool terminal = false;
    double h = 0.0;
    if (std::abs(f) > kDivergenceFactor * (std::abs(f0) + 1.0) && k > 0) {
      rec.status = RunStatus::diverged;
      terminal = true;
    } else if (cfg.epsilon > 0.0 && rec.min_grad_norm <= cfg.epsilon) {
      rec.status = RunStatus::converged;
      terminal = true;
    } else if (k >= cfg.max_rounds) {
      rec.status = RunStatus::max_rounds;
      terminal = true;
    }

    if (terminal) {
      rec.rows.push_back({k, rec.ledger.total_floats(), f, gn, 0.0});
      rec.terminal_round = k;
      rec.final_gap = f;
      rec.final_iterate = x;
      break;
    }

    const auto est = net.round(obj, x, seed, k, cfg.m, rec.ledger);
    double p = 0.0;
    for (const double c : est.coefficient_sums) p += c;
    p /= static_cast<double>(cfg.m);
    if (cfg.grad_norm_proxy) p = est.estimate.norm();

    h = nc_step_size(cfg, x.size(), p);
    rec.rows.push_back({k, rec.ledger.total_floats(), f, gn, h});

    const Vector candidate = x - h * est.estimate;
    rec.ledger.charge_downlink(1);
    if (obj.value(candidate) < f) x = candidate;
  }
  return rec;
}

template <typename Objective>
RunRecord run_cgd(const Objective& obj, const Vector& x0, double f_star,
                  double smoothness, double target_gap,
                  std::uint64_t max_rounds, const Topology& topo) {
  detail::check_machine_count(obj.machines(), topo);
  if (!(smoothness > 0.0))
    throw Error("invalid-input: smoothness must be positive");
  const double h = 1.0 / smoothness;
  const auto n = static_cast<std::uint64_t>(topo.n);
  const auto d = static_cast<std::uint64_t>(x0.size());

  RunRecord rec;
  Vector x = x0;
  double gap0 = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double gap = obj.value(x) - f_star;
    const double gn = obj.grad(x).norm();
    if (k == 0) gap0 = gap;
    rec.min_grad_norm = std::min(rec.min_grad_norm, gn);

    bool terminal = false;
    if (gap > kDivergenceFactor * gap0 && k > 0) {
      rec.status = RunStatus::diverged;
      terminal = true;
    } else if (target_gap > 0.0 && gap <= target_gap) {
      rec.status = RunStatus::converged;
      terminal = true;
    } else if (k >= max_rounds) {
      rec.status = RunStatus::max_rounds;
      terminal = true;
    }

    rec.rows.push_back({k, rec.ledger.total_floats(), gap, gn,
                        terminal ? 0.0 : h});
    if (terminal) {
      rec.terminal_round = k;
      rec.final_gap = gap;
      rec.final_iterate = x;
      break;
    }

    Vector g = Vector::Zero(x.size());
    for (std::uint32_t i = 0; i < topo.n; ++i) g += obj.local_grad(i, x);
    g /= static_cast<double>(topo.n);
    rec.ledger.begin_round(k);
    rec.ledger.charge_uplink(n * d);
    rec.ledger.charge_downlink(n * d);
    x -= h * g;
  }
  return rec;
}

template <typename Objective>
RunRecord run_cagd(const Objective& obj, const Vector& x0, double f_star,
                   double smoothness, double mu, double target_gap,
                   std::uint64_t max_rounds, const Topology& topo) {
  detail::check_machine_count(obj.machines(), topo);
  if (!(smoothness > 0.0 && mu > 0.0 && mu <= smoothness))
    throw Error("invalid-input: need 0 < mu <= L for accelerated descent");
  const double h = 1.0 / smoothness;
  const double kappa = smoothness / mu;
  const double beta =
      (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
  const auto n = static_cast<std::uint64_t>(topo.n);
  const auto d = static_cast<std::uint64_t>(x0.size());

  RunRecord rec;
  Vector x = x0;
  Vector x_prev = x0;
  double gap0 = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double gap = obj.value(x) - f_star;
    const double gn = obj.grad(x).norm();
    if (k == 0) gap0 = gap;
    rec.min_grad_norm = std::min(rec.min_grad_norm, gn);

    bool terminal = false;
    if (gap > kDivergenceFactor * gap0 && k > 0) {
      rec.status = RunStatus::diverged;
      terminal = true;
    } else if (target_gap > 0.0 && gap <= target_gap) {
      rec.status = RunStatus::converged;
      terminal = true;
    } else if (k >= max_rounds) {
      rec.status = RunStatus::max_rounds;
      terminal = true;
    }

    rec.rows.push_back({k, rec.ledger.total_floats(), gap, gn,
                        terminal ? 0.0 : h});
    if (terminal) {
      rec.terminal_round = k;
      rec.final_gap = gap;
      rec.final_iterate = x;
      break;
    }

    const Vector y = x + beta * (x - x_prev);
    Vector g = Vector::Zero(x.size());
    for (std::uint32_t i = 0; i < topo.n; ++i) g += obj.local_grad(i, y);
    g /= static_cast<double>(topo.n);
    rec.ledger.begin_round(k);
    rec.ledger.charge_uplink(n * d);
    rec.ledger.charge_downlink(n * d);
    x_prev = x;
    x = y - h * g;
  }
  return rec;
}

/// Long exact gradient descent; pins f* for objectives without a closed
/// form.
template <typename Objective>
double estimate_minimum(const Objective& obj, Vector x, double smoothness,
                        std::uint64_t steps) {
  const double h = 1.0 / smoothness;
  for (std::uint64_t k = 0; k < steps; ++k) x -= h * obj.grad(x);
  return obj.value(x);
}

struct CommReportRow {
  std::string algorithm;
  bool reached = false;
  std::uint64_t floats_to_target = 0;
  std::uint64_t rounds_to_target = 0;
  double ratio_to_first = 0.0;
};

struct CommReport {
  double target_gap = 0.0;
  std::vector<CommReportRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "algorithm,reached,floats_to_target,rounds_to_target,"
           "ratio_to_first\n";
    for (const auto& r : rows)
      out << r.algorithm << ',' << (r.reached ? 1 : 0) << ','
          << r.floats_to_target << ',' << r.rounds_to_target << ','
          << r.ratio_to_first << '\n';
    return out.str();
  }
};

inline CommReport communication_report(
    const std::vector<std::pair<std::string, RunRecord>>& records,
    double target_gap) {
  CommReport report;
  report.target_gap = target_gap;
  std::optional<double> base;
  for (const auto& [name, rec] : records) {
    CommReportRow row;
    row.algorithm = name;
    const auto floats = rec.floats_to_gap(target_gap);
    const auto rounds = rec.rounds_to_gap(target_gap);
    row.reached = floats.has_value();
    row.floats_to_target = floats.value_or(0);
    row.rounds_to_target = rounds.value_or(0);
    if (row.reached) {
      if (!base) base = static_cast<double>(*floats);
      row.ratio_to_first = static_cast<double>(*floats) / *base;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace core

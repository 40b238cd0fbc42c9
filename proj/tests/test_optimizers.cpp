#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "core/optimizers.hpp"
#include "core/stats.hpp"
#include "reference_values.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

core::QuadraticObjective harmonic_quadratic(int d, std::uint32_t n = 1) {
  core::Vector lam(d);
  for (int i = 0; i < d; ++i) lam[i] = 1.0 / (i + 1.0);
  return core::QuadraticObjective({lam, std::nullopt}, n);
}

core::QuadraticObjective shifted_power_quadratic(int d) {
  core::Vector lam(d);
  const double dd = static_cast<double>(d);
  for (int i = 0; i < d; ++i)
    lam[i] = 1.0 / ((i + 1.0) * (i + 1.0)) - 1.0 / (dd * dd) + 1e-3;
  return core::QuadraticObjective({lam, std::nullopt}, 1);
}

core::GdConfig gd_config_for(const core::QuadraticObjective& obj,
                             std::uint32_t m, std::uint64_t max_rounds,
                             double target) {
  core::GdConfig cfg;
  cfg.m = m;
  cfg.trace_A = obj.trace_exact();
  cfg.smoothness = obj.smoothness();
  cfg.strong_convexity = obj.strong_convexity();
  cfg.max_rounds = max_rounds;
  cfg.target_gap = target;
  return cfg;
}

double fitted_rate(const std::vector<std::vector<double>>& gaps,
                   std::size_t skip = 0) {
  const std::size_t rounds = gaps[0].size();
  std::vector<double> log_mean;
  for (std::size_t k = skip; k < rounds; ++k) {
    double acc = 0.0;
    for (const auto& g : gaps) acc += g[k];
    log_mean.push_back(std::log(acc / static_cast<double>(gaps.size())));
  }
  return std::exp(core::fit_line(log_mean).slope);
}

core::RidgeSeparableObjective bounded_instance(int d, int rows,
                                               double alpha, std::uint32_t n,
                                               std::uint64_t seed) {
  core::Matrix betas(rows, d);
  for (int r = 0; r < rows; ++r) {
    core::Vector row = core::gaussian_vector(
        {seed + static_cast<std::uint64_t>(r), 0, 1,
         static_cast<std::uint32_t>(d)});
    betas.row(r) = (row / row.norm()).transpose();
  }
  return core::RidgeSeparableObjective(betas, {},
                                       core::Link::bounded_nonconvex, alpha,
                                       n, seed);
}

core::NcConfig nc_config_for(const core::RidgeSeparableObjective& obj,
                             std::uint32_t m, double epsilon,
                             std::uint64_t max_rounds) {
  core::NcConfig cfg;
  cfg.m = m;
  cfg.r1 = obj.trace_bound();
  cfg.hessian_lipschitz = 5.0;
  cfg.smoothness = obj.smoothness();
  cfg.delta_f = 1.5;
  cfg.confidence_delta = 0.01;
  cfg.option = core::NcOption::option_ii;
  cfg.epsilon = epsilon;
  cfg.max_rounds = max_rounds;
  cfg.data_rows = static_cast<std::size_t>(obj.rows());
  return cfg;
}

}  // namespace

TEST_CASE("gd config validation enforces the budget precondition") {
  const auto obj = harmonic_quadratic(10);
  auto cfg = gd_config_for(obj, 1, 10, 0.0);
  CHECK_NOTHROW(cfg.validate());
  CHECK_THAT(cfg.step_size(), WithinRel(1.0 / (4.0 * obj.trace_exact()),
                                        1e-15));

  cfg.m = 0;
  CHECK_THROWS_AS(cfg.validate(), core::Error);
  cfg.m = 50;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("trace(A)/L"));
  cfg.allow_large_m = true;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("core-gd stays at the minimizer") {
  const auto obj = harmonic_quadratic(3);
  const auto topo = core::Topology::star(1);
  const auto rec = core::run_core_gd(obj, core::Vector::Zero(3), 0.0,
                                     gd_config_for(obj, 1, 5, 0.0), 7, topo);
  CHECK(rec.status == core::RunStatus::max_rounds);
  CHECK(rec.final_gap == 0.0);
  CHECK(rec.min_grad_norm == 0.0);
  CHECK(rec.rows.size() == 6);
  CHECK(rec.ledger.uplink_floats == 5);
  CHECK(rec.final_iterate.norm() == 0.0);
}

TEST_CASE("core-gd one forced step matches the hand iteration") {
  core::Vector lam(2);
  lam << 2.0, 1.0;
  const core::QuadraticObjective obj({lam, std::nullopt}, 1);
  core::Vector xi(2);
  xi << 1.0, 0.0;
  core::testing::ForcedBasis forced({xi});

  auto cfg = gd_config_for(obj, 1, 1, 0.0);
  CHECK_THAT(cfg.step_size(), WithinRel(1.0 / 12.0, 1e-15));
  const auto rec = core::run_core_gd(obj, core::Vector::Ones(2), 0.0, cfg, 1,
                                     core::Topology::star(1));
  REQUIRE(rec.rows.size() == 2);
  CHECK(rec.final_iterate[0] == 1.0 - (1.0 / 12.0) * 2.0);
  CHECK(rec.final_iterate[1] == 1.0);
  CHECK(rec.rows[1].floats == 2);
}

TEST_CASE("forced scaled orthonormal basis with m = d reduces to exact gd") {
  const auto obj = harmonic_quadratic(4);
  std::vector<core::GaussianVector> basis;
  for (int j = 0; j < 4; ++j) {
    core::Vector e = core::Vector::Zero(4);
    e[j] = 2.0;
    basis.push_back(e);
  }
  core::testing::ForcedBasis forced(basis);

  auto cfg = gd_config_for(obj, 4, 10, 0.0);
  cfg.allow_large_m = true;
  const auto rec = core::run_core_gd(obj, core::Vector::Ones(4), 0.0, cfg, 3,
                                     core::Topology::star(1));

  core::Vector x = core::Vector::Ones(4);
  for (int k = 0; k < 10; ++k) x -= cfg.step_size() * obj.grad(x);
  CHECK((rec.final_iterate - x).norm() == 0.0);
}

TEST_CASE("core-gd mean gap decays at the strongly convex rate") {
  const auto obj = shifted_power_quadratic(200);
  CHECK_THAT(obj.trace_exact(), WithinAbs(ref::trace_d200, 1e-12));
  const double mu = obj.strong_convexity();
  CHECK_THAT(mu, WithinRel(1e-3, 1e-9));
  const auto m = static_cast<std::uint32_t>(obj.trace_exact() /
                                            obj.smoothness());
  REQUIRE(m == 1);

  const auto topo = core::Topology::star(1);
  auto cfg = gd_config_for(obj, m, 1500, 0.0);
  std::vector<std::vector<double>> gaps;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto rec = core::run_core_gd(obj, core::Vector::Ones(200), 0.0,
                                       cfg, seed, topo);
    std::vector<double> g;
    for (const auto& row : rec.rows) g.push_back(row.f_gap);
    gaps.push_back(std::move(g));
  }

  const double rate = fitted_rate(gaps);
  const double bound = 1.0 - 3.0 * m * mu / (16.0 * obj.trace_exact());
  CHECK(rate < 1.0);
  CHECK(rate <= 1.0 - 0.8 * (1.0 - bound));
}

TEST_CASE("agd config formulas and validation") {
  core::AgdConfig cfg;
  cfg.m = 1;
  cfg.sqrt_eigen_sum = 1.0;
  cfg.mu = 1e-3;
  CHECK_THAT(cfg.step_size(), WithinRel(4.8225e-9, 1e-4));
  CHECK_THAT(cfg.step_size(), WithinRel(1.0 / (14400.0 * 14400.0), 1e-15));
  CHECK_THAT(cfg.beta(), WithinRel(std::sqrt(cfg.step_size() * 1e-3),
                                   1e-15));
  CHECK_NOTHROW(cfg.validate());

  cfg.mu = 1.5;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("14400"));
  cfg.mu = 0.0;
  CHECK_THROWS_AS(cfg.validate(), core::Error);
}

TEST_CASE("core-agd rejects non-quadratic objectives and stays at rest") {
  const auto ridge = bounded_instance(4, 8, 0.5, 1, 62);
  core::AgdConfig cfg;
  cfg.m = 1;
  cfg.sqrt_eigen_sum = 1.0;
  cfg.mu = 1e-3;
  CHECK_THROWS_WITH(core::run_core_agd(ridge, core::Vector::Zero(4), cfg, 1,
                                       core::Topology::star(1)),
                    ContainsSubstring("unsupported-objective"));

  const auto quad = harmonic_quadratic(3);
  core::AgdConfig qcfg;
  qcfg.m = 1;
  qcfg.sqrt_eigen_sum = quad.sum_sqrt_eigenvalues();
  qcfg.mu = quad.strong_convexity();
  qcfg.max_rounds = 5;
  const auto rec = core::run_core_agd(quad, core::Vector::Zero(3), qcfg, 1,
                                      core::Topology::star(1));
  CHECK(rec.final_gap == 0.0);
  CHECK(rec.final_iterate.norm() == 0.0);
}

TEST_CASE("core-agd mean value decays at the accelerated rate") {
  const auto obj = shifted_power_quadratic(200);
  CHECK_THAT(obj.sum_sqrt_eigenvalues(), WithinAbs(ref::sum_sqrt_d200,
                                                   1e-12));
  core::AgdConfig cfg;
  cfg.m = 1;
  cfg.sqrt_eigen_sum = obj.sum_sqrt_eigenvalues();
  cfg.mu = obj.strong_convexity();
  cfg.max_rounds = 3000;

  const auto topo = core::Topology::star(1);
  std::vector<std::vector<double>> gaps;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto rec = core::run_core_agd(obj, core::Vector::Ones(200), cfg,
                                        seed, topo);
    std::vector<double> g;
    for (const auto& row : rec.rows) g.push_back(row.f_gap);
    gaps.push_back(std::move(g));
  }

  const double rate = fitted_rate(gaps, 1500);
  const double drop =
      cfg.m * std::sqrt(cfg.mu) / (57600.0 * cfg.sqrt_eigen_sum);
  CHECK(rate < 1.0);
  CHECK(rate <= 1.0 - 0.8 * drop);
}

TEST_CASE("cgd one-step example and ledger") {
  core::Vector lam(2);
  lam << 2.0, 1.0;
  const core::QuadraticObjective obj({lam, std::nullopt}, 1);
  core::Vector x0(2);
  x0 << 1.0, 0.0;
  const auto rec = core::run_cgd(obj, x0, 0.0, 2.0, 0.0, 1,
                                 core::Topology::star(1));
  CHECK(rec.final_iterate.norm() == 0.0);
  REQUIRE(rec.rows.size() == 2);
  CHECK(rec.rows[1].f_gap == 0.0);

  const auto wide = harmonic_quadratic(10, 4);
  const auto ledger_rec = core::run_cgd(wide, core::Vector::Ones(10), 0.0,
                                        1.0, 0.0, 1, core::Topology::star(4));
  CHECK(ledger_rec.ledger.total_floats() == 80);
}

TEST_CASE("cgd round count tracks the kappa log rate") {
  core::Vector lam(5);
  lam << 1.0, 0.5, 0.1, 0.01, 1e-3;
  const core::QuadraticObjective obj({lam, std::nullopt}, 1);
  core::Vector x0 = core::Vector::Zero(5);
  x0[4] = std::sqrt(4000.0);

  const double target = 1e-6;
  const auto rec = core::run_cgd(obj, x0, 0.0, obj.smoothness(), target,
                                 20000, core::Topology::star(1));
  REQUIRE(rec.status == core::RunStatus::converged);
  const double measured = static_cast<double>(rec.terminal_round);
  const double predicted =
      obj.smoothness() / obj.strong_convexity() * std::log(1.0 / target);
  CHECK(measured >= 0.5 * predicted);
  CHECK(measured <= 2.0 * predicted);
}

TEST_CASE("expected one-step descent beats the trace bound") {
  const auto obj = harmonic_quadratic(30);
  const core::Vector x = core::gaussian_vector({11000, 0, 1, 30});
  const core::Vector g = obj.grad(x);
  const double gsq = g.squaredNorm();
  const double tr = obj.trace_exact();
  const std::uint32_t m = 3;
  const double h = m / (4.0 * tr);
  const auto topo = core::Topology::star(1);

  const double fx = obj.value(x);
  double mean_descent = 0.0;
  const int trials = 10000;
  core::CommLedger ledger;
  for (int t = 0; t < trials; ++t) {
    const auto est = core::star_round(obj, x, 12000,
                                      static_cast<std::uint64_t>(t), m,
                                      ledger);
    mean_descent += fx - obj.value(x - h * est);
  }
  mean_descent /= trials;

  const double bound = (h - 2.5 * h * h * tr / m) * gsq;
  CHECK(mean_descent >= bound - 0.05 * h * gsq);
}

TEST_CASE("equal config and seed give bitwise equal records") {
  const auto obj = harmonic_quadratic(12);
  const auto cfg = gd_config_for(obj, 2, 40, 0.0);
  const auto topo = core::Topology::star(1);
  const auto a = core::run_core_gd(obj, core::Vector::Ones(12), 0.0, cfg,
                                   123, topo);
  const auto b = core::run_core_gd(obj, core::Vector::Ones(12), 0.0, cfg,
                                   123, topo);
  CHECK(a.to_csv() == b.to_csv());
  CHECK((a.final_iterate - b.final_iterate).norm() == 0.0);

  const auto c = core::run_core_gd(obj, core::Vector::Ones(12), 0.0, cfg,
                                   124, topo);
  CHECK(a.to_csv() != c.to_csv());
}

TEST_CASE("larger sketch budgets do not slow convergence") {
  const auto obj = harmonic_quadratic(20);
  const auto topo = core::Topology::star(1);
  std::vector<double> mean_rounds;
  for (const std::uint32_t m : {1u, 2u, 3u}) {
    auto cfg = gd_config_for(obj, m, 60000, 1e-6);
    double acc = 0.0;
    for (std::uint64_t seed = 200; seed < 210; ++seed) {
      const auto rec = core::run_core_gd(obj, core::Vector::Ones(20), 0.0,
                                         cfg, seed, topo);
      REQUIRE(rec.status == core::RunStatus::converged);
      acc += static_cast<double>(rec.terminal_round);
    }
    mean_rounds.push_back(acc / 10.0);
  }
  CHECK(mean_rounds[1] <= 1.05 * mean_rounds[0] + 5.0);
  CHECK(mean_rounds[2] <= 1.05 * mean_rounds[1] + 5.0);
}

TEST_CASE("divergence is detected and reported with its round") {
  const auto obj = harmonic_quadratic(2);
  core::GdConfig cfg;
  cfg.m = 1;
  cfg.trace_A = 0.01;
  cfg.smoothness = obj.smoothness();
  cfg.strong_convexity = obj.strong_convexity();
  cfg.max_rounds = 5000;
  cfg.allow_large_m = true;
  const auto rec = core::run_core_gd(obj, core::Vector::Ones(2), 0.0, cfg,
                                     17, core::Topology::star(1));
  CHECK(rec.status == core::RunStatus::diverged);
  CHECK(rec.terminal_round > 0);
  CHECK(rec.terminal_round < 5000);
  CHECK(rec.rows.back().f_gap > 1e6 * rec.rows.front().f_gap);
}

TEST_CASE("nonconvex step-size formulas") {
  core::NcConfig cfg;
  cfg.m = 16;
  cfg.r1 = 32.0;
  cfg.hessian_lipschitz = 1e-12;
  cfg.smoothness = 1.0;
  cfg.delta_f = 1.0;
  cfg.option = core::NcOption::option_ii;
  CHECK(core::nc_step_size(cfg, 4, 0.0) == 16.0 / (16.0 * 32.0));
  CHECK_THAT(core::nc_step_size(cfg, 4, 0.0), WithinAbs(1.0 / 32.0, 1e-18));

  cfg.option = core::NcOption::option_i;
  CHECK(core::nc_step_size(cfg, 4, -1.0) == 1.0 / 32.0);
  CHECK(core::nc_step_size(cfg, 4, 0.0) == 1.0 / 32.0);

  cfg.hessian_lipschitz = 4.0;
  const double p = 9.0;
  const double second = (1.0 / 1600.0) / 2.0 * std::pow(4.0, -0.75) *
                        std::pow(16.0, 0.75) / 3.0;
  CHECK_THAT(core::nc_step_size(cfg, 4, p), WithinRel(second, 1e-12));

  cfg.m = 1;
  cfg.data_rows = 500;
  cfg.confidence_delta = 0.01;
  cfg.epsilon = 0.1;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("log(N/delta)"));
}

TEST_CASE("nonconvex runs keep the incumbent when the gradient vanishes") {
  const auto obj = bounded_instance(6, 12, 0.4, 1, 90);
  auto cfg = nc_config_for(obj, 4, 0.0, 5);
  const auto rec = core::run_core_gd_nonconvex(obj, core::Vector::Zero(6),
                                               cfg, 5,
                                               core::Topology::star(1));
  CHECK(rec.status == core::RunStatus::max_rounds);
  CHECK(rec.min_grad_norm == 0.0);
  CHECK(rec.final_iterate.norm() == 0.0);
  for (const auto& row : rec.rows) CHECK(row.f_gap == rec.rows[0].f_gap);
  CHECK(rec.ledger.downlink_floats == 5 * 4 + 5);
}

TEST_CASE("nonconvex descent accumulates at least the half-step sum") {
  const auto obj = bounded_instance(20, 60, 0.5, 1, 140);
  auto cfg = nc_config_for(obj, 16, 0.0, 200);
  double mean_final = 0.0;
  double mean_budgeted = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto rec = core::run_core_gd_nonconvex(
        obj, core::Vector::Constant(20, 0.25), cfg, seed,
        core::Topology::star(1));
    double spent = 0.0;
    for (std::size_t k = 0; k + 1 < rec.rows.size(); ++k)
      spent += 0.5 * rec.rows[k].step_size * rec.rows[k].grad_norm *
               rec.rows[k].grad_norm;
    mean_final += rec.rows.back().f_gap;
    mean_budgeted += rec.rows.front().f_gap - spent;
  }
  mean_final /= 8.0;
  mean_budgeted /= 8.0;
  CHECK(mean_final <= mean_budgeted + 0.02);
}

TEST_CASE("nonconvex optimization reaches a stationary point in budget") {
  const auto obj = bounded_instance(100, 500, 2.0, 4, 700);
  const double eps = 0.05;
  auto cfg = nc_config_for(obj, 64, eps, 0);

  const double first = cfg.delta_f * cfg.r1 / (cfg.m * eps * eps);
  const double second = std::pow(cfg.delta_f, 1.25) *
                        std::pow(cfg.smoothness, 0.25) *
                        std::sqrt(cfg.hessian_lipschitz) *
                        std::pow(100.0, 0.75) /
                        (std::pow(64.0, 0.75) * eps * eps);
  const auto budget =
      static_cast<std::uint64_t>(10.0 * std::max(first, second));
  cfg.max_rounds = budget;

  const auto rec = core::run_core_gd_nonconvex(
      obj, core::Vector::Constant(100, 0.1), cfg, 42,
      core::Topology::star(4));
  CHECK(rec.status == core::RunStatus::converged);
  CHECK(rec.min_grad_norm <= eps);
  CHECK(rec.terminal_round <= budget);
}

TEST_CASE("run record csv layout") {
  const auto obj = harmonic_quadratic(5);
  const auto rec = core::run_core_gd(obj, core::Vector::Ones(5), 0.0,
                                     gd_config_for(obj, 1, 3, 0.0), 9,
                                     core::Topology::star(1));
  const auto csv = rec.to_csv();
  CHECK_THAT(csv, ContainsSubstring("round,floats,f_gap,grad_norm,"
                                    "step_size\n"));
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    CHECK(rec.rows[k].round == rec.rows[k - 1].round + 1);
    CHECK(rec.rows[k].floats >= rec.rows[k - 1].floats);
  }
  CHECK(rec.rows.back().floats == rec.ledger.total_floats());
  CHECK(core::run_status_name(rec.status) == "max-rounds");
}

TEST_CASE("communication report compares floats to target") {
  const auto obj = harmonic_quadratic(10);
  const auto topo = core::Topology::star(1);
  auto cfg = gd_config_for(obj, 1, 50000, 1e-4);
  const auto rec = core::run_core_gd(obj, core::Vector::Ones(10), 0.0, cfg,
                                     5, topo);
  REQUIRE(rec.status == core::RunStatus::converged);

  const auto same = core::communication_report(
      {{"a", rec}, {"b", rec}}, 1e-4);
  REQUIRE(same.rows.size() == 2);
  CHECK(same.rows[0].ratio_to_first == 1.0);
  CHECK(same.rows[1].ratio_to_first == 1.0);
  CHECK(same.rows[0].floats_to_target ==
        rec.floats_to_gap(1e-4).value());

  const auto empty = core::communication_report({}, 1e-4);
  CHECK(empty.rows.empty());
  CHECK_THAT(empty.to_csv(),
             ContainsSubstring("algorithm,reached,floats_to_target"));
}

TEST_CASE("core-gd runs over a decentralized topology") {
  const auto obj = harmonic_quadratic(8, 5);
  const auto star = core::Topology::star(5);
  const auto ring = core::Topology::ring(5);
  auto cfg = gd_config_for(obj, 2, 100, 0.0);
  const auto rec_star = core::run_core_gd(obj, core::Vector::Ones(8), 0.0,
                                          cfg, 77, star);
  const auto rec_ring = core::run_core_gd(obj, core::Vector::Ones(8), 0.0,
                                          cfg, 77, ring);
  CHECK((rec_star.final_iterate - rec_ring.final_iterate)
            .lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(rec_ring.ledger.uplink_floats == 0);
  CHECK(rec_ring.ledger.gossip_floats > 0);
}

#include <cmath>
#include <cstdint>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "core/privacy.hpp"
#include "core/shared_randomness.hpp"
#include "reference_values.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

core::Vector fixed_vector(std::uint64_t seed, std::uint32_t dim) {
  return core::gaussian_vector({seed, 0, 1, dim});
}

}  // namespace

TEST_CASE("privacy loss formula examples") {
  for (const double sigma : {0.25, 1.0, 3.5})
    for (const double p : {0.0, 2.0, 11.0})
      CHECK(core::privacy_loss(sigma, sigma, p, 5) == 0.0);

  const double hand = 3.0 - 3.0 * std::log(2.0);
  CHECK_THAT(hand, WithinAbs(0.9206, 5e-5));
  CHECK_THAT(core::privacy_loss(2.0, 1.0, 8.0, 3), WithinRel(hand, 1e-15));

  for (const double s1 : {0.5, 1.0, 1.7})
    for (const double s2 : {0.9, 2.0})
      for (const double p : {0.0, 1.0, 8.0})
        for (const std::uint32_t m : {1u, 3u, 64u}) {
          const double forward = core::privacy_loss(s1, s2, p, m);
          const double backward = core::privacy_loss(s2, s1, p, m);
          CHECK_THAT(forward, WithinAbs(-backward, 1e-12));
        }

  CHECK_THROWS_WITH(core::privacy_loss(0.0, 1.0, 1.0, 1),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::privacy_loss(1.0, -2.0, 1.0, 1),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::privacy_loss(1.0, 1.0, -0.5, 1),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::privacy_loss(1.0, 1.0, 1.0, 0),
                    ContainsSubstring("invalid-budget"));
}

TEST_CASE("adjacency fixes the first argument as the reference") {
  core::Vector a = core::Vector::Ones(4);
  core::Vector b = a;
  b[0] += 0.1;
  const core::AdjacentPair pair(a, b);
  CHECK_THAT(pair.delta1, WithinRel(0.05, 1e-12));

  core::Vector ref = core::Vector::Zero(3);
  ref[0] = 1.0;
  const core::Vector shrunk = 0.901 * ref;
  CHECK_THAT(core::AdjacentPair(ref, shrunk).delta1, WithinRel(0.099, 1e-12));
  CHECK_THROWS_WITH(core::AdjacentPair(shrunk, ref),
                    ContainsSubstring("not adjacent"));

  CHECK_THROWS_WITH(core::AdjacentPair(core::Vector::Zero(3), ref),
                    ContainsSubstring("must be nonzero"));
  CHECK_THROWS_WITH(core::AdjacentPair(ref, core::Vector::Ones(5)),
                    ContainsSubstring("share a dimension"));
  CHECK_THROWS_WITH(core::AdjacentPair(ref, 2.0 * ref),
                    ContainsSubstring("not adjacent"));
}

TEST_CASE("dp parameters compute the epsilon budget exactly") {
  const core::DpParams params(0.05, 0.01);
  CHECK_THAT(params.epsilon, WithinRel(4.6051701859880918, 1e-15));
  CHECK(core::DpParams(0.0, 0.5).epsilon == 0.0);

  CHECK_THROWS_WITH(core::DpParams(0.05, 0.0),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::DpParams(0.05, 1.0),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::DpParams(0.1, 0.01),
                    ContainsSubstring("invalid-input"));
  CHECK_THROWS_WITH(core::DpParams(-0.01, 0.01),
                    ContainsSubstring("invalid-input"));
}

TEST_CASE("sketch norms follow the chi-square law") {
  const core::Vector a = fixed_vector(3, 8);
  const auto rep = core::sketch_norm_distribution_check(a, 1, 100000, 29);
  CHECK(rep.dim == 8);
  CHECK(rep.m == 1);
  CHECK(rep.samples == 100000);
  CHECK_THAT(rep.ks_critical,
             WithinRel(ref::kolmogorov_crit_001 / std::sqrt(100000.0),
                       1e-12));
  CHECK(rep.ks_statistic <= rep.ks_critical);
  CHECK(rep.pass);
  CHECK_THAT(rep.verdict(), ContainsSubstring("consistent with"));
  CHECK_THAT(rep.to_csv(), ContainsSubstring("ks_statistic,ks_critical"));
  CHECK_THAT(rep.to_csv(), ContainsSubstring("8,1,100000,"));

  CHECK(core::sketch_norm_distribution_check(a, 6, 20000, 31).pass);

  CHECK_THROWS_WITH(
      core::sketch_norm_distribution_check(core::Vector::Zero(8), 1, 2000),
      ContainsSubstring("degenerate-input"));
  CHECK_THROWS_WITH(core::sketch_norm_distribution_check(a, 1, 1),
                    ContainsSubstring("insufficient-samples"));
  CHECK_THROWS_WITH(core::sketch_norm_distribution_check(a, 0, 2000),
                    ContainsSubstring("invalid-budget"));
}

TEST_CASE("sketch norm moments match the chi-square identities") {
  const core::Vector a = fixed_vector(5, 16);
  const double norm_sq = a.squaredNorm();
  const auto rep = core::sketch_norm_distribution_check(a, 4, 1000000, 37);
  CHECK_THAT(rep.mean, WithinRel(4.0 * norm_sq, 0.03));
  CHECK_THAT(rep.variance, WithinRel(8.0 * norm_sq * norm_sq, 0.03));
  CHECK(rep.pass);
}

TEST_CASE("coefficients are empirically uncorrelated") {
  const core::Vector a = fixed_vector(7, 16);
  constexpr std::uint64_t n = 50000;
  constexpr std::uint32_t m = 4;
  std::vector<std::vector<double>> coeff(m, std::vector<double>(n));
  for (std::uint64_t t = 0; t < n; ++t) {
    const auto sketch = core::core_compress(a, 41, t, m);
    for (std::uint32_t j = 0; j < m; ++j) coeff[j][t] = sketch.coefficients[j];
  }
  std::vector<double> mean(m, 0.0);
  for (std::uint32_t j = 0; j < m; ++j) {
    for (const double v : coeff[j]) mean[j] += v;
    mean[j] /= static_cast<double>(n);
  }
  double max_corr = 0.0;
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = i + 1; j < m; ++j) {
      double sii = 0.0, sjj = 0.0, sij = 0.0;
      for (std::uint64_t t = 0; t < n; ++t) {
        const double di = coeff[i][t] - mean[i];
        const double dj = coeff[j][t] - mean[j];
        sii += di * di;
        sjj += dj * dj;
        sij += di * dj;
      }
      max_corr = std::max(max_corr, std::abs(sij / std::sqrt(sii * sjj)));
    }
  CHECK(max_corr <= 0.02);
}

TEST_CASE("scaling the input scales every squared norm exactly") {
  const core::Vector a = fixed_vector(9, 12);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const double base = core::sketch_norm_sq(core::core_compress(a, 13, t, 3));
    const double doubled =
        core::sketch_norm_sq(core::core_compress(2.0 * a, 13, t, 3));
    CHECK(doubled == 4.0 * base);
    const double tripled =
        core::sketch_norm_sq(core::core_compress(3.0 * a, 13, t, 3));
    CHECK_THAT(tripled, WithinRel(9.0 * base, 1e-12));
  }
}

TEST_CASE("the privacy tail check certifies the desk example") {
  core::Vector a = fixed_vector(21, 64);
  a /= a.norm();
  const core::AdjacentPair pair(a, 1.04 * a);
  CHECK_THAT(pair.delta1, WithinRel(0.04, 1e-12));
  const core::DpParams params(0.05, 0.01);
  const auto rep = core::dp_tail_check(pair, 8, params, 100000, 53);
  CHECK(rep.sigma2 > rep.sigma1);
  CHECK(rep.violations == 0);
  CHECK(rep.upper_bound <= 0.01);
  CHECK(rep.pass);
  CHECK_THAT(rep.verdict(), ContainsSubstring("consistent with"));
  CHECK_THAT(rep.to_csv(), ContainsSubstring("violations,frequency"));
  CHECK_THAT(rep.to_csv(), ContainsSubstring("64,8,100000,"));
}

TEST_CASE("identical inputs never violate the budget") {
  const core::Vector a = fixed_vector(23, 10);
  const core::AdjacentPair pair(a, a);
  CHECK(pair.delta1 == 0.0);
  const auto rep = core::dp_tail_check(pair, 4, core::DpParams(0.0, 0.01),
                                       2000, 57);
  CHECK(rep.violations == 0);
  CHECK(rep.pass);
}

TEST_CASE("the tail bound holds across the parameter grid independent of m") {
  const core::Vector a = fixed_vector(25, 32);
  for (const double delta1 : {0.01, 0.05, 0.09})
    for (const double delta : {0.1, 0.01})
      for (const std::uint32_t m : {1u, 8u, 64u}) {
        CAPTURE(delta1, delta, m);
        const core::AdjacentPair pair(a, (1.0 + delta1) * a);
        const core::DpParams params(delta1, delta);
        const auto rep = core::dp_tail_check(pair, m, params, 5000, 61);
        CHECK(rep.upper_bound <= delta);
        CHECK(rep.pass);
      }
}

TEST_CASE("tail check rejects thin sampling and mismatched budgets") {
  const core::Vector a = fixed_vector(27, 6);
  const core::AdjacentPair pair(a, 1.04 * a);
  const core::DpParams params(0.05, 0.01);
  CHECK_THROWS_WITH(core::dp_tail_check(pair, 2, params, 999),
                    ContainsSubstring("insufficient-samples"));
  CHECK_THROWS_WITH(core::dp_tail_check(pair, 0, params, 2000),
                    ContainsSubstring("invalid-budget"));
  CHECK_THROWS_WITH(
      core::dp_tail_check(pair, 2, core::DpParams(0.01, 0.01), 2000),
      ContainsSubstring("invalid-input"));
}

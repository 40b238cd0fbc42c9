#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>

#include "core/compressors.hpp"
#include "core/error.hpp"
#include "core/stats.hpp"
#include "core/types.hpp"

namespace core {

/// Log-likelihood ratio of one released coefficient vector with squared norm
/// p_norm_sq under N(0, sigma1^2 I_m) against N(0, sigma2^2 I_m):
///   L = (p_norm_sq / 2) (1/sigma2^2 - 1/sigma1^2) + m ln(sigma2 / sigma1).
inline double privacy_loss(double sigma1, double sigma2, double p_norm_sq,
                           std::uint32_t m) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0))
    throw Error("invalid-input: privacy loss needs positive scales");
  if (p_norm_sq < 0.0)
    throw Error("invalid-input: squared norm must be non-negative");
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  return 0.5 * p_norm_sq *
             (1.0 / (sigma2 * sigma2) - 1.0 / (sigma1 * sigma1)) +
         static_cast<double>(m) * std::log(sigma2 / sigma1);
}

/// Two inputs an attacker should not distinguish from the released
/// coefficients.  The relation is asymmetric: the first argument is the
/// reference whose norm scales the allowed distance, so (a, b) adjacent does
/// not imply (b, a) adjacent.
struct AdjacentPair {
  Vector a;
  Vector b;
  double delta1 = 0.0;  ///< tight ratio ||a - b|| / ||a||, must stay < 0.1

  AdjacentPair(Vector reference, Vector other)
      : a(std::move(reference)), b(std::move(other)) {
    if (a.size() != b.size())
      throw Error("invalid-input: adjacent vectors must share a dimension");
    if (!a.allFinite() || !b.allFinite())
      throw Error("invalid-input: non-finite coordinates in adjacent pair");
    const double ref_norm = a.norm();
    if (!(ref_norm > 0.0))
      throw Error("invalid-input: the reference vector must be nonzero");
    delta1 = (a - b).norm() / ref_norm;
    if (!(delta1 < 0.1))
      throw Error(
          "invalid-input: not adjacent; the distance must stay below 0.1 of "
          "the reference norm");
  }
};

/// Privacy budget for adjacency level delta1: epsilon = 20 delta1 ln(1/delta).
struct DpParams {
  double delta1 = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;

  DpParams(double delta1_in, double delta_in)
      : delta1(delta1_in), delta(delta_in) {
    if (!(delta > 0.0) || !(delta < 1.0))
      throw Error("invalid-input: delta must lie in (0, 1)");
    if (!(delta1 >= 0.0) || !(delta1 < 0.1))
      throw Error("invalid-input: delta1 must lie in [0, 0.1)");
    epsilon = 20.0 * delta1 * std::log(1.0 / delta);
  }
};

/// Sum of squared released coefficients, accumulated in wire order.
inline double sketch_norm_sq(const Sketch& s) {
  double acc = 0.0;
  for (const double c : s.coefficients) acc += c * c;
  return acc;
}

/// Kolmogorov-Smirnov comparison of sampled ||C(a)||^2 / ||a||^2 against the
/// chi-square law with m degrees of freedom, plus the first two sample
/// moments of ||C(a)||^2 for the chi-square moment identities.
struct SketchNormReport {
  std::uint32_t dim = 0;
  std::uint32_t m = 0;
  std::uint64_t samples = 0;
  double norm_sq = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double ks_statistic = 0.0;
  double ks_critical = 0.0;
  double significance = 0.0;
  bool pass = false;

  std::string verdict() const {
    return pass ? "consistent with N(0, ||a||^2 I_m) coefficients"
                : "inconsistent with N(0, ||a||^2 I_m) coefficients";
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "dim,m,samples,norm_sq,mean,variance,ks_statistic,ks_critical,"
           "significance,pass\n";
    out << dim << ',' << m << ',' << samples << ',' << norm_sq << ',' << mean
        << ',' << variance << ',' << ks_statistic << ',' << ks_critical << ','
        << significance << ',' << (pass ? 1 : 0) << '\n';
    return out.str();
  }
};

inline SketchNormReport sketch_norm_distribution_check(
    const Vector& a, std::uint32_t m, std::uint64_t samples,
    std::uint64_t seed = 11) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  if (samples < 2)
    throw Error("insufficient-samples: the distribution check needs >= 2");
  const double norm_sq = seq_dot(a, a);
  if (!(norm_sq > 0.0))
    throw Error("degenerate-input: the sketch of the zero vector is zero");

  std::vector<double> norms(samples);
  for (std::uint64_t t = 0; t < samples; ++t)
    norms[t] = sketch_norm_sq(core_compress(a, seed, t, m));

  SketchNormReport rep;
  rep.dim = static_cast<std::uint32_t>(a.size());
  rep.m = m;
  rep.samples = samples;
  rep.norm_sq = norm_sq;
  rep.significance = 0.001;

  double acc = 0.0;
  for (const double v : norms) acc += v;
  rep.mean = acc / static_cast<double>(samples);
  double sq = 0.0;
  for (const double v : norms) sq += (v - rep.mean) * (v - rep.mean);
  rep.variance = sq / static_cast<double>(samples - 1);

  std::vector<double> u(samples);
  for (std::uint64_t t = 0; t < samples; ++t)
    u[t] = chi2_cdf(norms[t] / norm_sq, static_cast<double>(m));
  rep.ks_statistic = ks_statistic(std::move(u));
  rep.ks_critical = kolmogorov_critical(rep.significance) /
                    std::sqrt(static_cast<double>(samples));
  rep.pass = rep.ks_statistic <= rep.ks_critical;
  return rep;
}

/// Monte-Carlo check of the release tail: the privacy loss of coefficients
/// drawn under the reference input exceeds the budget with frequency whose
/// exact Clopper-Pearson 99% upper confidence bound must stay within delta.
/// Monte Carlo can only falsify the claim, so a pass reads "consistent with".
struct DpTailReport {
  std::uint32_t dim = 0;
  std::uint32_t m = 0;
  std::uint64_t trials = 0;
  double pair_delta1 = 0.0;
  double delta1 = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::uint64_t violations = 0;
  double frequency = 0.0;
  double upper_bound = 0.0;
  bool pass = false;

  std::string verdict() const {
    return pass ? "consistent with (epsilon,delta)-differential privacy"
                : "tail frequency exceeds the differential-privacy budget";
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "dim,m,trials,pair_delta1,delta1,delta,epsilon,sigma1,sigma2,"
           "violations,frequency,upper_bound,pass\n";
    out << dim << ',' << m << ',' << trials << ',' << pair_delta1 << ','
        << delta1 << ',' << delta << ',' << epsilon << ',' << sigma1 << ','
        << sigma2 << ',' << violations << ',' << frequency << ','
        << upper_bound << ',' << (pass ? 1 : 0) << '\n';
    return out.str();
  }
};

inline DpTailReport dp_tail_check(const AdjacentPair& pair, std::uint32_t m,
                                  const DpParams& params, std::uint64_t trials,
                                  std::uint64_t seed = 17) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  if (trials < 1000)
    throw Error(
        "insufficient-samples: the tail check needs at least 10^3 trials");
  if (params.delta1 + 1e-12 < pair.delta1)
    throw Error(
        "invalid-input: the budget's delta1 is smaller than the pair's "
        "relative distance");

  DpTailReport rep;
  rep.dim = static_cast<std::uint32_t>(pair.a.size());
  rep.m = m;
  rep.trials = trials;
  rep.pair_delta1 = pair.delta1;
  rep.delta1 = params.delta1;
  rep.delta = params.delta;
  rep.epsilon = params.epsilon;
  rep.sigma1 = pair.a.norm();
  rep.sigma2 = pair.b.norm();

  for (std::uint64_t t = 0; t < trials; ++t) {
    const double p_norm_sq = sketch_norm_sq(core_compress(pair.a, seed, t, m));
    const double loss = privacy_loss(rep.sigma1, rep.sigma2, p_norm_sq, m);
    const bool violated = rep.sigma1 > rep.sigma2 ? loss > params.epsilon
                                                  : loss < -params.epsilon;
    if (violated) ++rep.violations;
  }
  rep.frequency =
      static_cast<double>(rep.violations) / static_cast<double>(trials);
  rep.upper_bound = clopper_pearson_upper(
      static_cast<std::int64_t>(rep.violations),
      static_cast<std::int64_t>(trials), 0.99);
  rep.pass = rep.upper_bound <= params.delta;
  return rep;
}

}  // namespace core

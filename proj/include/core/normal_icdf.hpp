#pragma once

#include <cfloat>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

static_assert(FLT_EVAL_METHOD == 0,
              "intermediate rounding must be plain double");

namespace core {
namespace detail {

/// Coefficients are lowest-order first, matching the tables they came from.
template <std::size_t N>
inline double horner(const double (&c)[N], double x) {
  double r = c[N - 1];
  for (std::size_t i = N - 1; i > 0; --i) r = r * x + c[i - 1];
  return r;
}

/// Natural log evaluated with a fixed +,-,*,/ sequence so every platform
/// produces identical bits: frexp reduction onto [sqrt(2)/2, sqrt(2)), an
/// atanh series in z = (m-1)/(m+1), and a Cody-Waite split of ln 2 (the high
/// part has 20 trailing zero mantissa bits, so e * kLn2Hi is exact).
inline double det_log(double v) {
  static constexpr double kLn2Hi = 6.93147180369123816490e-01;
  static constexpr double kLn2Lo = 1.90821492927058770002e-10;
  static constexpr double kInvAtanh[] = {
      1.0,
      0.3333333333333333,
      0.2,
      0.14285714285714285,
      0.1111111111111111,
      0.09090909090909091,
      0.07692307692307693,
      0.06666666666666667,
      0.058823529411764705,
      0.05263157894736842,
      0.047619047619047616,
  };
  int e = 0;
  double m = std::frexp(v, &e);
  if (m < 0.7071067811865476) {
    m *= 2.0;
    e -= 1;
  }
  const double z = (m - 1.0) / (m + 1.0);
  const double s = z * z;
  const double dk = static_cast<double>(e);
  return dk * kLn2Hi + (2.0 * z * horner(kInvAtanh, s) + dk * kLn2Lo);
}

/// erf^{-1}(p) for p in [0, 1), q = 1 - p.  Rational minimax tables
/// transcribed from Boost.Math (boost/math/special_functions/detail/
/// erf_inv.hpp, Boost Software License 1.0; see NOTICE).  Evaluation uses
/// only +,-,*,/ and correctly rounded sqrt, plus det_log above, keeping the
/// result bit-stable across platforms.
inline double erf_inv_imp(double p, double q) {
  if (p <= 0.5) {
    // x = p(p+10)(Y+R(p))
    static constexpr double Y = 0.0891314744949340820313;
    static constexpr double P[] = {
        -0.000508781949658280665617, -0.00836874819741736770379,
        0.0334806625409744615033,    -0.0126926147662974029034,
        -0.0365637971411762664006,   0.0219878681111168899165,
        0.00822687874676915743155,   -0.00538772965071242932965,
    };
    static constexpr double Q[] = {
        1.0,
        -0.970005043303290640362,
        -1.56574558234175846809,
        1.56221558398423026363,
        0.662328840472002992063,
        -0.71228902341542847553,
        -0.0527396382340099713954,
        0.0795283687341571680018,
        -0.00233393759374190016776,
        0.000886216390456424707504,
    };
    const double g = p * (p + 10.0);
    return g * Y + g * (horner(P, p) / horner(Q, p));
  }
  if (q >= 0.25) {
    // x = sqrt(-2 log q) / (Y + R(q - 0.25))
    static constexpr double Y = 2.249481201171875;
    static constexpr double P[] = {
        -0.202433508355938759655, 0.105264680699391713268,
        8.37050328343119927838,   17.6447298408374015486,
        -18.8510648058714251895,  -44.6382324441786960818,
        17.445385985570866523,    21.1294655448340526258,
        -3.67192254707729348546,
    };
    static constexpr double Q[] = {
        1.0,
        6.24264124854247537712,
        3.9713437953343869095,
        -28.6608180499800029974,
        -20.1432634680485188801,
        48.5609213108739935468,
        10.8268667355460159008,
        -22.6436933413139721736,
        1.72114765761200282724,
    };
    const double g = std::sqrt(-2.0 * det_log(q));
    const double xs = q - 0.25;
    return g / (Y + horner(P, xs) / horner(Q, xs));
  }
  // Tail approximations in x = sqrt(-log q); IEEE doubles keep x below 28
  // (q >= 2^-1074), so the last table is a true catch-all.
  const double x = std::sqrt(-det_log(q));
  if (x < 3.0) {
    static constexpr double Y = 0.807220458984375;
    static constexpr double P[] = {
        -0.131102781679951906451,   -0.163794047193317060787,
        0.117030156341995252019,    0.387079738972604337464,
        0.337785538912035898924,    0.142869534408157156766,
        0.0290157910005329060432,   0.00214558995388805277169,
        -0.679465575181126350155e-6, 0.285225331782217055858e-7,
        -0.681149956853776992068e-9,
    };
    static constexpr double Q[] = {
        1.0,
        3.46625407242567245975,
        5.38168345707006855425,
        4.77846592945843778382,
        2.59301921623620271374,
        0.848854343457902036425,
        0.152264338295331783612,
        0.01105924229346489121,
    };
    const double xs = x - 1.125;
    return Y * x + (horner(P, xs) / horner(Q, xs)) * x;
  }
  if (x < 6.0) {
    static constexpr double Y = 0.93995571136474609375;
    static constexpr double P[] = {
        -0.0350353787183177984712,  -0.00222426529213447927281,
        0.0185573306514231072324,   0.00950804701325919603619,
        0.00187123492819559223345,  0.000157544617424960554631,
        0.460469890584317994083e-5, -0.230404776911882601748e-9,
        0.266339227425782031962e-11,
    };
    static constexpr double Q[] = {
        1.0,
        1.3653349817554063097,
        0.762059164553623404043,
        0.220091105764131249824,
        0.0341589143670947727934,
        0.00263861676657015992959,
        0.764675292302794483503e-4,
    };
    const double xs = x - 3.0;
    return Y * x + (horner(P, xs) / horner(Q, xs)) * x;
  }
  if (x < 18.0) {
    static constexpr double Y = 0.98362827301025390625;
    static constexpr double P[] = {
        -0.0167431005076633737133,   -0.00112951438745580278863,
        0.00105628862152492910091,   0.000209386317487588078668,
        0.149624783758342370182e-4,  0.449696789927706453732e-6,
        0.462596163522878599135e-8,  -0.281128735628831791805e-13,
        0.99055709973310326855e-16,
    };
    static constexpr double Q[] = {
        1.0,
        0.591429344886417493481,
        0.138151865749083321638,
        0.0160746087093676504695,
        0.000964011807005165528527,
        0.275335474764726041141e-4,
        0.282243172016108031869e-6,
    };
    const double xs = x - 6.0;
    return Y * x + (horner(P, xs) / horner(Q, xs)) * x;
  }
  static constexpr double Y = 0.99714565277099609375;
  static constexpr double P[] = {
      -0.0024978212791898131227,   -0.779190719229053954292e-5,
      0.254723037413027451751e-4,  0.162397777342510920873e-5,
      0.396341011304801168516e-7,  0.411632831190944208473e-9,
      0.145596286718675035587e-11, -0.116765012397184275695e-17,
  };
  static constexpr double Q[] = {
      1.0,
      0.207123112214422517181,
      0.0169410838120975906478,
      0.000690538265622684595676,
      0.145007359818232637924e-4,
      0.144437756628144157666e-6,
      0.509761276599778486139e-9,
  };
  const double xs = x - 18.0;
  return Y * x + (horner(P, xs) / horner(Q, xs)) * x;
}

}  // namespace detail

/// Standard normal inverse CDF, deterministic across platforms.
inline double normal_icdf(double u) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  static constexpr double kSqrt2 = 1.4142135623730951;
  const double q2 = 2.0 * (u < 0.5 ? u : 1.0 - u);
  const double r = kSqrt2 * detail::erf_inv_imp(1.0 - q2, q2);
  return u < 0.5 ? -r : r;
}

/// Maps a 64-bit word to the open interval (0,1): 52 explicit bits plus a
/// half-ulp offset, so both endpoints are unreachable and the map is
/// symmetric under x -> ~x.
inline double uniform_from_bits(std::uint64_t x) {
  return static_cast<double>(x >> 12) * 0x1p-52 + 0x1p-53;
}

}  // namespace core

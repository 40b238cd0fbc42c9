#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "core/shared_randomness.hpp"
#include "core/stats.hpp"
#include "reference_values.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

void check_blocks(std::uint64_t seed, std::uint64_t round, std::uint32_t vec,
                  const std::uint64_t (&expect)[8]) {
  const core::Philox4x64::Key key{seed, 0};
  const std::uint64_t w1 = (round << 32) | vec;
  const std::uint64_t w2 = round >> 32;
  const auto b0 = core::Philox4x64::block({1, w1, w2, 0}, key);
  const auto b1 = core::Philox4x64::block({2, w1, w2, 0}, key);
  for (int i = 0; i < 4; ++i) {
    CHECK(b0[i] == expect[i]);
    CHECK(b1[i] == expect[4 + i]);
  }
}

}  // namespace

TEST_CASE("Philox blocks match the published generator bit for bit") {
  check_blocks(0, 0, 0, ref::philox_seed0_r0_v0);
  check_blocks(42, 0, 0, ref::philox_seed42_r0_v0);
  check_blocks(0x243F6A8885A308D3ull, 7, 3, ref::philox_seed_pi_r7_v3);
  check_blocks((1ull << 63) + 12345, (1ull << 32) + 5, 9,
               ref::philox_seed_hi_r_big_v9);
}

TEST_CASE("uniform map stays inside the open interval") {
  CHECK(core::uniform_from_bits(0) == 0x1p-53);
  CHECK(core::uniform_from_bits(~0ull) == 1.0 - 0x1p-53);
  CHECK(core::uniform_from_bits(~0ull) < 1.0);
  CHECK(core::uniform_from_bits(1ull << 63) == 0.5 + 0x1p-53);
}

TEST_CASE("normal inverse CDF matches reference points") {
  for (std::size_t i = 0; i < std::size(ref::norm_icdf_u); ++i) {
    const double z = core::normal_icdf(ref::norm_icdf_u[i]);
    CAPTURE(ref::norm_icdf_u[i]);
    if (std::abs(ref::norm_icdf_z[i]) < 1e-8)
      CHECK_THAT(z, WithinAbs(ref::norm_icdf_z[i], 1e-15));
    else
      CHECK_THAT(z, WithinRel(ref::norm_icdf_z[i], 1e-13));
  }
  CHECK(core::normal_icdf(0.5) == 0.0);
  CHECK(std::isinf(core::normal_icdf(0.0)));
  CHECK(std::isinf(core::normal_icdf(1.0)));
  CHECK(core::normal_icdf(0.25) == -core::normal_icdf(0.75));
  CHECK(core::normal_icdf(0.125) == -core::normal_icdf(0.875));
}

TEST_CASE("gaussian_vector stream matches frozen end-to-end values") {
  const auto v = core::gaussian_vector({42, 0, 0, 6});
  for (std::size_t i = 0; i < std::size(ref::stream_seed42_normals); ++i)
    CHECK_THAT(v[static_cast<Eigen::Index>(i)],
               WithinAbs(ref::stream_seed42_normals[i], 1e-12));
}

TEST_CASE("gaussian_vector is a pure function of its key") {
  const core::GaussianStreamKey key{7, 3, 1, 16};
  const auto a = core::gaussian_vector(key);
  const auto b = core::gaussian_vector(key);
  REQUIRE(a.size() == 16);
  CHECK(a == b);

  const auto c = core::gaussian_vector({7, 4, 1, 16});
  CHECK(a != c);
  const auto d = core::gaussian_vector({7, 3, 2, 16});
  CHECK(a != d);
  const auto e = core::gaussian_vector({8, 3, 1, 16});
  CHECK(a != e);
}

TEST_CASE("gaussian_vector rejects dimension zero") {
  CHECK_THROWS_AS(core::gaussian_vector({1, 0, 0, 0}), core::Error);
}

TEST_CASE("round_basis reduces to gaussian_vector at m = 1") {
  const auto basis = core::round_basis(11, 5, 1, 8);
  REQUIRE(basis.size() == 1);
  CHECK(basis[0] == core::gaussian_vector({11, 5, 1, 8}));
}

TEST_CASE("round_basis is identical across simulated machines") {
  const auto machine_a = core::round_basis(5, 0, 3, 4);
  const auto machine_b = core::round_basis(5, 0, 3, 4);
  REQUIRE(machine_a.size() == 3);
  for (int j = 0; j < 3; ++j) CHECK(machine_a[j] == machine_b[j]);
}

TEST_CASE("round_basis rejects m = 0 and honours the forced-basis hook") {
  CHECK_THROWS_AS(core::round_basis(1, 0, 0, 4), core::Error);
  {
    core::Vector xi(2);
    xi << 1.0, 0.0;
    core::testing::ForcedBasis hook({xi});
    const auto basis = core::round_basis(99, 42, 1, 2);
    REQUIRE(basis.size() == 1);
    CHECK(basis[0] == xi);
    CHECK_THROWS_AS(core::round_basis(99, 42, 2, 2), core::Error);
  }
  CHECK(core::round_basis(99, 42, 1, 2)[0] !=
        core::gaussian_vector({99, 42, 0, 2}));
}

TEST_CASE("per-coordinate moments over one million draws") {
  constexpr int kDraws = 1000000;
  constexpr int kDim = 8;
  core::Vector sum = core::Vector::Zero(kDim);
  core::Vector sumsq = core::Vector::Zero(kDim);
  for (int r = 0; r < kDraws; ++r) {
    const auto v = core::gaussian_vector(
        {2024, static_cast<std::uint64_t>(r), 1, kDim});
    sum += v;
    sumsq += v.cwiseProduct(v);
  }
  for (int i = 0; i < kDim; ++i) {
    const double mean = sum[i] / kDraws;
    const double var = sumsq[i] / kDraws - mean * mean;
    CAPTURE(i, mean, var);
    CHECK(std::abs(mean) <= 0.01);
    CHECK(var >= 0.98);
    CHECK(var <= 1.02);
  }
}

TEST_CASE("pooled coordinates pass a chi-square goodness-of-fit test") {
  constexpr int kVectors = 1000;
  constexpr int kDim = 1000;
  constexpr int kBins = 64;
  double edges[kBins - 1];
  for (int b = 1; b < kBins; ++b)
    edges[b - 1] = core::normal_icdf(static_cast<double>(b) / kBins);
  std::vector<std::int64_t> counts(kBins, 0);
  for (int r = 0; r < kVectors; ++r) {
    const auto v = core::gaussian_vector(
        {515, static_cast<std::uint64_t>(r), 1, kDim});
    for (int i = 0; i < kDim; ++i) {
      const auto it =
          std::upper_bound(std::begin(edges), std::end(edges), v[i]);
      ++counts[static_cast<std::size_t>(it - std::begin(edges))];
    }
  }
  const double expected = static_cast<double>(kVectors) * kDim / kBins;
  double stat = 0.0;
  for (const auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  CAPTURE(stat);
  CHECK(core::chi2_cdf(stat, kBins - 1) < 0.999);
}

TEST_CASE("scaled basis Gram matrix concentrates near identity") {
  constexpr std::uint32_t kM = 64;
  constexpr std::uint32_t kDim = 4096;
  const auto basis = core::round_basis(33, 9, kM, kDim);
  for (std::uint32_t a = 0; a < kM; ++a) {
    for (std::uint32_t b = a; b < kM; ++b) {
      const double g = basis[a].dot(basis[b]) / kDim;
      const double target = a == b ? 1.0 : 0.0;
      CAPTURE(a, b, g);
      CHECK(std::abs(g - target) <= 0.1);
    }
  }
}

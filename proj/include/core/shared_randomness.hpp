#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/normal_icdf.hpp"
#include "core/philox.hpp"
#include "core/types.hpp"

namespace core {

/// Address of one shared Gaussian vector.  Every machine holding the same
/// seed regenerates bitwise-identical vectors from equal keys, in any order.
struct GaussianStreamKey {
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
  std::uint32_t vector_index = 0;  ///< j in [1..m]
  std::uint32_t dim = 0;           ///< ambient dimension d
};

using GaussianVector = Vector;

namespace testing {
namespace detail {
inline const std::vector<GaussianVector>* forced_basis = nullptr;
}  // namespace detail

/// Test-only hook: while an instance is alive, round_basis returns the first
/// m injected vectors regardless of seed and round.  Production paths never
/// install one.
class ForcedBasis {
 public:
  explicit ForcedBasis(std::vector<GaussianVector> basis)
      : basis_(std::move(basis)) {
    detail::forced_basis = &basis_;
  }
  ~ForcedBasis() { detail::forced_basis = nullptr; }
  ForcedBasis(const ForcedBasis&) = delete;
  ForcedBasis& operator=(const ForcedBasis&) = delete;

 private:
  std::vector<GaussianVector> basis_;
};
}  // namespace testing

/// The d-dimensional N(0, I) vector addressed by key.
///
/// Counter layout (documented for third-party regeneration): Philox4x64-10
/// with key = (seed, 0) and counter words
///   w0 = 1 + coordinate block index (4 coordinates per block),
///   w1 = (round << 32) | vector_index,
///   w2 = round >> 32,  w3 = 0.
/// The +1 matches numpy.random.Philox, which advances its counter before
/// the first block, so the full stream is reproducible externally as
/// Philox(counter=[0, w1, w2, 0], key=[seed, 0]).random_raw(...).
/// Each 64-bit word maps to (0,1) via uniform_from_bits and then through
/// normal_icdf, so the whole pipeline is exact-rounding IEEE arithmetic.
inline GaussianVector gaussian_vector(const GaussianStreamKey& key) {
  if (key.dim == 0) throw Error("invalid-dimension: dim must be >= 1");
  const Philox4x64::Key k{key.seed, 0};
  const std::uint64_t w1 = (key.round << 32) | key.vector_index;
  const std::uint64_t w2 = key.round >> 32;
  GaussianVector out(key.dim);
  for (std::uint32_t i = 0; i < key.dim; i += 4) {
    const auto blk = Philox4x64::block({i / 4 + 1, w1, w2, 0}, k);
    const std::uint32_t lanes = key.dim - i < 4 ? key.dim - i : 4;
    for (std::uint32_t lane = 0; lane < lanes; ++lane)
      out[i + lane] = normal_icdf(uniform_from_bits(blk[lane]));
  }
  return out;
}

/// The round's shared basis [xi_1, ..., xi_m]; equal inputs give equal
/// output on every caller.
inline std::vector<GaussianVector> round_basis(std::uint64_t seed,
                                               std::uint64_t round,
                                               std::uint32_t m,
                                               std::uint32_t dim) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  if (dim == 0) throw Error("invalid-dimension: dim must be >= 1");
  if (testing::detail::forced_basis != nullptr) {
    const auto& fb = *testing::detail::forced_basis;
    if (fb.size() < m)
      throw Error("invalid-budget: forced basis holds fewer than m vectors");
    return std::vector<GaussianVector>(fb.begin(), fb.begin() + m);
  }
  std::vector<GaussianVector> basis;
  basis.reserve(m);
  for (std::uint32_t j = 1; j <= m; ++j)
    basis.push_back(gaussian_vector({seed, round, j, dim}));
  return basis;
}

}  // namespace core

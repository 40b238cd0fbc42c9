#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/shared_randomness.hpp"
#include "core/types.hpp"

namespace core {

/// What actually crosses the simulated wire for the common-randomness
/// compressor: m projection coefficients plus the round id that lets the
/// receiver regenerate the basis.  Wire cost is exactly budget_m floats.
struct Sketch {
  std::vector<double> coefficients;
  std::uint64_t round = 0;
  std::uint32_t budget_m = 0;
  std::uint32_t dim = 0;
};

/// Top-k / sparse baseline message; indices strictly increasing.  Wire cost
/// is 2k floats (indices travel as f64, exact for d < 2^53).
struct SparseMessage {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

/// Sign-scale quantization baseline message.  Each 8-byte wire float carries
/// 32 sign bits in its low word, so the cost is 1 + ceil(d/32) floats.
struct QuantizedMessage {
  double scale = 0.0;
  std::vector<std::uint32_t> sign_words;
  std::uint32_t dim = 0;
};

/// Shared state for the compressor family; residual is the top-k error
/// accumulator and exists only for that kind.
struct CompressorState {
  enum class Kind { core, topk, quantize, identity };
  Kind kind = Kind::identity;
  std::optional<Vector> residual;
  std::map<std::string, double> params;
};

/// p_i = <a, xi_i> against the round basis of (seed, round).  The dot
/// products run in plain sequential order so independent implementations
/// reproduce the coefficients to the last bit.
inline Sketch core_compress(const Vector& a, std::uint64_t seed,
                            std::uint64_t round, std::uint32_t m) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  if (!a.allFinite())
    throw Error("invalid-input: non-finite coordinates in compress input");
  const auto dim = static_cast<std::uint32_t>(a.size());
  const auto basis = round_basis(seed, round, m, dim);
  Sketch s;
  s.round = round;
  s.budget_m = m;
  s.dim = dim;
  s.coefficients.reserve(m);
  for (const auto& xi : basis) s.coefficients.push_back(seq_dot(a, xi));
  return s;
}

/// (1/m) sum_i p_i xi_i with the basis regenerated from (seed, s.round).
inline Vector core_reconstruct(const Sketch& s, std::uint64_t seed) {
  if (s.budget_m == 0) throw Error("invalid-budget: m must be >= 1");
  if (s.coefficients.size() != s.budget_m)
    throw Error("corrupt-sketch: coefficient count disagrees with budget");
  const auto basis = round_basis(seed, s.round, s.budget_m, s.dim);
  Vector out = Vector::Zero(s.dim);
  for (std::uint32_t j = 0; j < s.budget_m; ++j)
    out += s.coefficients[j] * basis[j];
  return out / static_cast<double>(s.budget_m);
}

namespace detail {
inline void require_symmetric(const Matrix& A) {
  if (A.rows() != A.cols() || !A.isApprox(A.transpose(), 1e-12))
    throw Error("invalid-matrix: A must be symmetric");
}
}  // namespace detail

/// Exact reconstruction variance E||a~ - a||_A^2 = (tr(A)||a||^2 + a'Aa)/m.
inline double core_variance_closed_form(const Vector& a, const Matrix& A,
                                        std::uint32_t m) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  detail::require_symmetric(A);
  const double quad = a.dot(A * a);
  return (A.trace() * a.squaredNorm() + quad) / static_cast<double>(m);
}

/// The looser stated bound 3 tr(A) ||a||^2 / m - ||a||_A^2 / m.
inline double core_variance_bound(const Vector& a, const Matrix& A,
                                  std::uint32_t m) {
  if (m == 0) throw Error("invalid-budget: m must be >= 1");
  detail::require_symmetric(A);
  const double quad = a.dot(A * a);
  return (3.0 * A.trace() * a.squaredNorm() - quad) / static_cast<double>(m);
}

/// Emits the k largest-magnitude coordinates of a + residual (ties broken by
/// lower index) and folds the unsent remainder back into the residual.
inline SparseMessage topk_compress(const Vector& a, std::uint32_t k,
                                   CompressorState& state) {
  const auto d = static_cast<std::uint32_t>(a.size());
  if (k == 0 || k > d)
    throw Error("invalid-budget: k must lie in [1, d]");
  if (!state.residual) state.residual = Vector::Zero(d);
  Vector carried = a + *state.residual;
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t l, std::uint32_t r) {
                     return std::abs(carried[l]) > std::abs(carried[r]);
                   });
  std::vector<std::uint32_t> chosen(order.begin(), order.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  SparseMessage msg;
  msg.indices = chosen;
  msg.values.reserve(k);
  Vector residual = carried;
  for (const auto idx : chosen) {
    msg.values.push_back(carried[idx]);
    residual[idx] = 0.0;
  }
  state.residual = residual;
  return msg;
}

/// scale = mean |a_i|; reconstruction is scale * sign(a_i) with sign bit 0
/// for nonnegative coordinates.
inline QuantizedMessage quantize_compress(const Vector& a) {
  if (!a.allFinite())
    throw Error("invalid-input: non-finite coordinates in compress input");
  const auto d = static_cast<std::uint32_t>(a.size());
  QuantizedMessage msg;
  msg.dim = d;
  msg.scale = d == 0 ? 0.0 : a.cwiseAbs().sum() / static_cast<double>(d);
  msg.sign_words.assign((d + 31) / 32, 0u);
  for (std::uint32_t i = 0; i < d; ++i)
    if (a[i] < 0.0) msg.sign_words[i / 32] |= (1u << (i % 32));
  return msg;
}

inline Vector quantize_reconstruct(const QuantizedMessage& msg) {
  Vector out(msg.dim);
  for (std::uint32_t i = 0; i < msg.dim; ++i) {
    const bool neg = (msg.sign_words[i / 32] >> (i % 32)) & 1u;
    out[i] = neg ? -msg.scale : msg.scale;
  }
  return out;
}

inline Vector sparse_to_dense(const SparseMessage& msg, std::uint32_t dim) {
  Vector out = Vector::Zero(dim);
  for (std::size_t i = 0; i < msg.indices.size(); ++i) {
    if (msg.indices[i] >= dim)
      throw Error("invalid-input: sparse index out of range");
    out[msg.indices[i]] = msg.values[i];
  }
  return out;
}

/// Floats-on-wire accounting, pinned to the documented wire formats.
inline double wire_floats(const Sketch& s) {
  return static_cast<double>(s.budget_m);
}
inline double wire_floats(const SparseMessage& m) {
  return 2.0 * static_cast<double>(m.indices.size());
}
inline double wire_floats(const QuantizedMessage& m) {
  return 1.0 + static_cast<double>(m.sign_words.size());
}

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
inline double get_f64(const std::uint8_t* p) {
  const std::uint64_t bits = get_u64(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace detail

/// Wire layout: [round: u64 LE][m: u32 LE][m x f64 LE].
inline std::vector<std::uint8_t> sketch_to_bytes(const Sketch& s) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * s.coefficients.size());
  detail::put_u64(out, s.round);
  detail::put_u32(out, s.budget_m);
  for (const double c : s.coefficients) detail::put_f64(out, c);
  return out;
}

inline Sketch sketch_from_bytes(const std::vector<std::uint8_t>& bytes,
                                std::uint32_t dim) {
  if (bytes.size() < 12) throw Error("corrupt-sketch: truncated header");
  Sketch s;
  s.round = detail::get_u64(bytes.data());
  s.budget_m = detail::get_u32(bytes.data() + 8);
  s.dim = dim;
  if (bytes.size() != 12 + 8ull * s.budget_m)
    throw Error("corrupt-sketch: payload size disagrees with budget");
  for (std::uint32_t i = 0; i < s.budget_m; ++i)
    s.coefficients.push_back(detail::get_f64(bytes.data() + 12 + 8ull * i));
  return s;
}

/// One-call facade over the compressor family: returns the receiver-side
/// reconstruction and the exact floats the message costs on the wire.
struct CompressResult {
  Vector reconstructed;
  double floats_on_wire = 0.0;
};

inline CompressResult apply_compressor(CompressorState& state, const Vector& a,
                                       std::uint64_t seed,
                                       std::uint64_t round) {
  CompressResult r;
  switch (state.kind) {
    case CompressorState::Kind::core: {
      const auto m = static_cast<std::uint32_t>(state.params.at("m"));
      const Sketch s = core_compress(a, seed, round, m);
      r.reconstructed = core_reconstruct(s, seed);
      r.floats_on_wire = wire_floats(s);
      return r;
    }
    case CompressorState::Kind::topk: {
      const auto k = static_cast<std::uint32_t>(state.params.at("k"));
      const SparseMessage msg = topk_compress(a, k, state);
      r.reconstructed =
          sparse_to_dense(msg, static_cast<std::uint32_t>(a.size()));
      r.floats_on_wire = wire_floats(msg);
      return r;
    }
    case CompressorState::Kind::quantize: {
      const QuantizedMessage msg = quantize_compress(a);
      r.reconstructed = quantize_reconstruct(msg);
      r.floats_on_wire = wire_floats(msg);
      return r;
    }
    case CompressorState::Kind::identity:
      r.reconstructed = a;
      r.floats_on_wire = static_cast<double>(a.size());
      return r;
  }
  throw Error("invalid-input: unknown compressor kind");
}

}  // namespace core

#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/shared_randomness.hpp"
#include "core/types.hpp"

namespace core {

/// Communication layout of one simulated run: a centralized star over n
/// machines, or an undirected graph mixed by W = I - L/lambda_max(L).
struct Topology {
  enum class Kind { star, graph };

  Kind kind = Kind::star;
  std::uint32_t n = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  Matrix gossip_matrix;
  double eigengap = 0.0;

  static Topology star(std::uint32_t n) {
    if (n == 0) throw Error("invalid-input: a topology needs >= 1 machine");
    Topology t;
    t.kind = Kind::star;
    t.n = n;
    return t;
  }

  static Topology graph(
      std::uint32_t n,
      std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list) {
    if (n == 0) throw Error("invalid-input: a topology needs >= 1 machine");
    Topology t;
    t.kind = Kind::graph;
    t.n = n;

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (auto [a, b] : edge_list) {
      if (a >= n || b >= n)
        throw Error("invalid-input: edge endpoint out of range");
      if (a == b) throw Error("invalid-input: self-loop edge");
      const auto key = std::minmax(a, b);
      if (!seen.insert(key).second)
        throw Error("invalid-input: duplicate edge");
      t.edges.push_back(key);
    }

    if (t.edges.empty()) {
      t.gossip_matrix = Matrix::Identity(n, n);
      t.eigengap = n == 1 ? 1.0 : 0.0;
      return t;
    }

    Matrix lap = Matrix::Zero(n, n);
    for (auto [a, b] : t.edges) {
      lap(a, a) += 1.0;
      lap(b, b) += 1.0;
      lap(a, b) -= 1.0;
      lap(b, a) -= 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> lap_eig(lap);
    const double lam_max = lap_eig.eigenvalues().maxCoeff();
    t.gossip_matrix = Matrix::Identity(n, n) - lap / lam_max;

    Eigen::SelfAdjointEigenSolver<Matrix> mix_eig(
        Matrix(Matrix::Identity(n, n) - t.gossip_matrix));
    const Vector evals = mix_eig.eigenvalues();
    const double second = std::max(evals[1], 0.0);
    t.eigengap = second / evals[n - 1];
    return t;
  }

  static Topology ring(std::uint32_t n) {
    if (n < 3) throw Error("invalid-input: a ring needs >= 3 machines");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
    for (std::uint32_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
    return graph(n, std::move(e));
  }

  static Topology complete(std::uint32_t n) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return graph(n, std::move(e));
  }
};

/// Counts every scalar that crosses a link, split by direction, with a
/// per-round breakdown exportable as CSV.
struct CommLedger {
  struct Entry {
    std::uint64_t round = 0;
    std::uint64_t uplink = 0;
    std::uint64_t downlink = 0;
    std::uint64_t gossip = 0;
  };

  std::uint64_t uplink_floats = 0;
  std::uint64_t downlink_floats = 0;
  std::uint64_t gossip_floats = 0;
  std::uint64_t rounds = 0;
  std::vector<Entry> per_round_log;

  void begin_round(std::uint64_t round) {
    per_round_log.push_back({round, 0, 0, 0});
    ++rounds;
  }

  void charge_uplink(std::uint64_t floats) {
    ensure_entry();
    uplink_floats += floats;
    per_round_log.back().uplink += floats;
  }

  void charge_downlink(std::uint64_t floats) {
    ensure_entry();
    downlink_floats += floats;
    per_round_log.back().downlink += floats;
  }

  void charge_gossip(std::uint64_t floats) {
    ensure_entry();
    gossip_floats += floats;
    per_round_log.back().gossip += floats;
  }

  std::uint64_t total_floats() const {
    return uplink_floats + downlink_floats + gossip_floats;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "round,uplink,downlink,gossip\n";
    for (const auto& e : per_round_log)
      out << e.round << ',' << e.uplink << ',' << e.downlink << ','
          << e.gossip << '\n';
    return out.str();
  }

 private:
  void ensure_entry() {
    if (per_round_log.empty()) begin_round(0);
  }
};

struct StarRoundResult {
  Vector estimate;
  std::vector<double> coefficient_sums;
};

/// One centralized round: every machine sends its m sketch coefficients up,
/// the center broadcasts the summed coefficients back, and every machine
/// (here: the caller) rebuilds (1/(n m)) sum_i sum_j p_ij xi_j.
template <typename Objective>
StarRoundResult star_round_detailed(const Objective& obj, const Vector& x,
                                    std::uint64_t seed, std::uint64_t round,
                                    std::uint32_t m, CommLedger& ledger) {
  const std::uint32_t n = obj.machines();
  const auto dim = static_cast<std::uint32_t>(x.size());
  const auto basis = round_basis(seed, round, m, dim);

  std::vector<double> coeff(m, 0.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Vector g = obj.local_grad(i, x);
    if (g.size() != x.size())
      throw Error("invalid-dimension: machine gradient size mismatch");
    for (std::uint32_t j = 0; j < m; ++j) coeff[j] += seq_dot(g, basis[j]);
  }

  ledger.begin_round(round);
  ledger.charge_uplink(static_cast<std::uint64_t>(n) * m);
  ledger.charge_downlink(static_cast<std::uint64_t>(n) * m);

  Vector out = Vector::Zero(dim);
  for (std::uint32_t j = 0; j < m; ++j) out += coeff[j] * basis[j];
  return {out / (static_cast<double>(n) * static_cast<double>(m)),
          std::move(coeff)};
}

template <typename Objective>
Vector star_round(const Objective& obj, const Vector& x, std::uint64_t seed,
                  std::uint64_t round, std::uint32_t m, CommLedger& ledger) {
  return star_round_detailed(obj, x, seed, round, m, ledger).estimate;
}

enum class GossipMethod { plain, chebyshev };

/// ceil((1/sqrt(gamma)) ln(1/tol)) mixing iterations; the Chebyshev solver
/// reaches tol well before that, the plain solver needs roughly 1/gamma.
inline std::uint32_t gossip_iterations(const Topology& topo, double tol) {
  if (topo.kind != Topology::Kind::graph)
    throw Error("invalid-input: gossip needs a graph topology");
  if (topo.n == 1) return 0;
  if (!(tol > 0.0 && tol < 1.0))
    throw Error("invalid-input: gossip tolerance must lie in (0, 1)");
  if (topo.eigengap <= 0.0)
    throw Error(
        "non-convergence: disconnected graph cannot reach consensus");
  return static_cast<std::uint32_t>(
      std::ceil(std::log(1.0 / tol) / std::sqrt(topo.eigengap)));
}

/// Runs `iterations` mixing steps v <- W v on each coordinate.  The plain
/// method applies W directly; the Chebyshev method applies the degree-k
/// Chebyshev polynomial q_k(W) with q_k(1) = 1, which contracts the
/// non-consensus spectrum [0, 1-gamma] at the optimal rate.  Either way each
/// iteration moves m floats across every edge in both directions.
inline std::vector<Vector> gossip_average(
    const std::vector<Vector>& values, const Topology& topo,
    std::uint32_t iterations, CommLedger& ledger,
    GossipMethod method = GossipMethod::plain) {
  if (topo.kind != Topology::Kind::graph)
    throw Error("invalid-input: gossip needs a graph topology");
  if (values.size() != topo.n)
    throw Error("invalid-input: one value vector per machine required");
  const Eigen::Index m = values.empty() ? 0 : values[0].size();
  for (const auto& v : values)
    if (v.size() != m)
      throw Error("invalid-dimension: gossip vectors must share a length");

  Matrix p(topo.n, m);
  for (std::uint32_t i = 0; i < topo.n; ++i) p.row(i) = values[i].transpose();

  const auto per_iteration = static_cast<std::uint64_t>(m) *
                             (static_cast<std::uint64_t>(topo.edges.size()) *
                              2);
  const Matrix& w = topo.gossip_matrix;

  if (method == GossipMethod::plain || topo.n == 1 || iterations == 0 ||
      topo.eigengap >= 1.0) {
    for (std::uint32_t it = 0; it < iterations; ++it) {
      p = w * p;
      ledger.charge_gossip(per_iteration);
    }
  } else {
    const double beta = 1.0 - topo.eigengap;
    const double t1 = (2.0 - beta) / beta;
    auto shift = [&](const Matrix& v) -> Matrix {
      return (2.0 / beta) * (w * v) - v;
    };
    Matrix prev = p;
    double y_prev = 1.0;
    p = shift(p) / t1;
    ledger.charge_gossip(per_iteration);
    double y_cur = t1;
    for (std::uint32_t it = 1; it < iterations; ++it) {
      const double y_next = 2.0 * t1 * y_cur - y_prev;
      const Matrix next =
          (2.0 * y_cur * shift(p) - y_prev * prev) / y_next;
      prev = p;
      p = next;
      y_prev = y_cur;
      y_cur = y_next;
      ledger.charge_gossip(per_iteration);
    }
  }

  std::vector<Vector> out(topo.n);
  for (std::uint32_t i = 0; i < topo.n; ++i) out[i] = p.row(i).transpose();
  return out;
}

/// One decentralized round: machines sketch their local gradients, average
/// the m coefficients by gossip, and each rebuilds (1/m) sum_j pbar_j xi_j.
/// With pbar the average (1/n) sum_i p_ij this is exactly the centralized
/// estimator; the two scale factors are easy to misread as n/m.
template <typename Objective>
std::vector<Vector> decentralized_round(
    const Objective& obj, const Vector& x, std::uint64_t seed,
    std::uint64_t round, std::uint32_t m, const Topology& topo,
    std::uint32_t gossip_iters, CommLedger& ledger,
    GossipMethod method = GossipMethod::plain) {
  if (topo.kind != Topology::Kind::graph)
    throw Error("invalid-input: decentralized rounds need a graph topology");
  if (obj.machines() != topo.n)
    throw Error("invalid-input: objective machine count disagrees with "
                "topology");
  const auto dim = static_cast<std::uint32_t>(x.size());
  const auto basis = round_basis(seed, round, m, dim);

  ledger.begin_round(round);
  std::vector<Vector> coeff(topo.n);
  for (std::uint32_t i = 0; i < topo.n; ++i) {
    const Vector g = obj.local_grad(i, x);
    Vector p(m);
    for (std::uint32_t j = 0; j < m; ++j) p[j] = seq_dot(g, basis[j]);
    coeff[i] = std::move(p);
  }

  const auto averaged =
      gossip_average(coeff, topo, gossip_iters, ledger, method);

  std::vector<Vector> out(topo.n);
  for (std::uint32_t i = 0; i < topo.n; ++i) {
    Vector est = Vector::Zero(dim);
    for (std::uint32_t j = 0; j < m; ++j) est += averaged[i][j] * basis[j];
    out[i] = est / static_cast<double>(m);
  }
  return out;
}

}  // namespace core

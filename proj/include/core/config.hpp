#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "core/error.hpp"
#include "core/objectives.hpp"
#include "core/optimizers.hpp"
#include "core/shared_randomness.hpp"
#include "core/simnet.hpp"
#include "core/types.hpp"

namespace core {

using Json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

/// Strict object check: every present key must be declared, every required
/// key must be present.  Unknown keys are errors, not warnings.
inline void check_object(const Json& j, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional) {
  if (!j.is_object())
    throw Error("invalid-config: " + (where.empty() ? "document" : where) +
                " must be an object");
  std::set<std::string> allowed;
  for (const char* k : required) allowed.insert(k);
  for (const char* k : optional) allowed.insert(k);
  for (const auto& item : j.items())
    if (allowed.count(item.key()) == 0)
      throw Error("invalid-config: unknown key '" +
                  join_path(where, item.key()) + "'");
  for (const char* k : required)
    if (!j.contains(k))
      throw Error("invalid-config: missing key '" + join_path(where, k) +
                  "'");
}

inline double number_at(const Json& j, const std::string& where,
                        const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number())
    throw Error("invalid-config: '" + join_path(where, key) +
                "' must be a number");
  return v.get<double>();
}

inline std::uint64_t uint_at(const Json& j, const std::string& where,
                             const char* key) {
  const Json& v = j.at(key);
  if (!v.is_number_unsigned())
    throw Error("invalid-config: '" + join_path(where, key) +
                "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline bool bool_at(const Json& j, const std::string& where,
                    const char* key) {
  const Json& v = j.at(key);
  if (!v.is_boolean())
    throw Error("invalid-config: '" + join_path(where, key) +
                "' must be true or false");
  return v.get<bool>();
}

inline std::string string_at(const Json& j, const std::string& where,
                             const char* key) {
  const Json& v = j.at(key);
  if (!v.is_string())
    throw Error("invalid-config: '" + join_path(where, key) +
                "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

struct InitialPoint {
  enum class Kind { zero, ones, gaussian };
  Kind kind = Kind::ones;
  std::uint64_t seed = 0;
  double scale = 1.0;

  Vector build(Eigen::Index dim) const {
    switch (kind) {
      case Kind::zero:
        return Vector::Zero(dim);
      case Kind::ones:
        return Vector::Ones(dim);
      case Kind::gaussian:
        return scale * gaussian_vector(
                           {seed, 0, 1, static_cast<std::uint32_t>(dim)});
    }
    throw Error("invalid-config: unknown initial point kind");
  }
};

struct QuadraticConfig {
  std::uint32_t dimension = 0;
  std::optional<double> power;
  double floor = 0.0;
  std::vector<double> eigenvalues;
  std::optional<std::uint64_t> rotation_seed;

  SpectrumSpec spectrum() const {
    Vector lam(dimension);
    if (power) {
      const double d = static_cast<double>(dimension);
      for (std::uint32_t i = 0; i < dimension; ++i) {
        const double base = std::pow(static_cast<double>(i) + 1.0, -*power);
        lam[i] =
            floor > 0.0 ? base - std::pow(d, -*power) + floor : base;
      }
    } else {
      for (std::uint32_t i = 0; i < dimension; ++i) lam[i] = eigenvalues[i];
    }
    return {lam, rotation_seed};
  }
};

struct RidgeConfig {
  std::string dataset;
  std::filesystem::path resolved_dataset;
  Link link = Link::square_loss;
  double alpha = 0.0;
  bool normalize = false;
  std::uint64_t shard_seed = 0;
};

struct ObjectiveConfig {
  enum class Family { quadratic, ridge_separable };
  Family family = Family::quadratic;
  QuadraticConfig quadratic;
  RidgeConfig ridge;
};

struct AlgorithmSpec {
  std::string name;
  std::string label;
  std::uint32_t m = 1;
  bool allow_large_m = false;
  NcOption option = NcOption::option_ii;
  double epsilon = 0.0;
  double hessian_lipschitz = 0.0;
  double delta_f = 0.0;
  double confidence_delta = 0.01;
  bool grad_norm_proxy = false;
  std::optional<std::uint64_t> max_rounds;
};

struct ExperimentConfig {
  ObjectiveConfig objective;
  Topology topology = Topology::star(1);
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> seeds;
  double target_gap = 0.0;
  std::uint64_t max_rounds = 0;
  InitialPoint initial_point;
  std::string output_dir;
  std::string raw_text;
  std::string source_name;
};

namespace detail {

inline ObjectiveConfig parse_objective(const Json& j,
                                       const std::filesystem::path& base) {
  ObjectiveConfig out;
  if (!j.is_object() || !j.contains("family"))
    throw Error("invalid-config: 'objective.family' is required");
  const std::string family = string_at(j, "objective", "family");
  if (family == "quadratic") {
    out.family = ObjectiveConfig::Family::quadratic;
    check_object(j, "objective", {"family", "dimension", "spectrum"},
                 {"rotation_seed"});
    out.quadratic.dimension =
        static_cast<std::uint32_t>(uint_at(j, "objective", "dimension"));
    if (out.quadratic.dimension == 0)
      throw Error("invalid-config: 'objective.dimension' must be >= 1");
    const Json& spec = j.at("spectrum");
    if (spec.contains("power")) {
      check_object(spec, "objective.spectrum", {"power"}, {"floor"});
      out.quadratic.power = number_at(spec, "objective.spectrum", "power");
      if (spec.contains("floor"))
        out.quadratic.floor = number_at(spec, "objective.spectrum", "floor");
      if (!(*out.quadratic.power > 0.0) || out.quadratic.floor < 0.0)
        throw Error(
            "invalid-config: 'objective.spectrum' needs power > 0 and "
            "floor >= 0");
    } else {
      check_object(spec, "objective.spectrum", {"eigenvalues"}, {});
      const Json& vals = spec.at("eigenvalues");
      if (!vals.is_array() || vals.empty())
        throw Error(
            "invalid-config: 'objective.spectrum.eigenvalues' must be a "
            "non-empty array");
      for (const Json& v : vals) {
        if (!v.is_number())
          throw Error(
              "invalid-config: 'objective.spectrum.eigenvalues' must hold "
              "numbers");
        out.quadratic.eigenvalues.push_back(v.get<double>());
      }
      if (out.quadratic.eigenvalues.size() != out.quadratic.dimension)
        throw Error(
            "invalid-config: 'objective.dimension' disagrees with the "
            "eigenvalue count");
    }
    if (j.contains("rotation_seed"))
      out.quadratic.rotation_seed = uint_at(j, "objective", "rotation_seed");
  } else if (family == "ridge_separable") {
    out.family = ObjectiveConfig::Family::ridge_separable;
    check_object(j, "objective", {"family", "dataset", "link", "alpha"},
                 {"normalize", "shard_seed"});
    out.ridge.dataset = string_at(j, "objective", "dataset");
    out.ridge.resolved_dataset = base / out.ridge.dataset;
    const std::string link = string_at(j, "objective", "link");
    if (link == "square")
      out.ridge.link = Link::square_loss;
    else if (link == "logistic")
      out.ridge.link = Link::logistic;
    else if (link == "bounded_nonconvex")
      out.ridge.link = Link::bounded_nonconvex;
    else
      throw Error("invalid-config: 'objective.link' must be one of square, "
                  "logistic, bounded_nonconvex");
    out.ridge.alpha = number_at(j, "objective", "alpha");
    if (!(out.ridge.alpha >= 0.0))
      throw Error("invalid-config: 'objective.alpha' must be >= 0");
    if (j.contains("normalize"))
      out.ridge.normalize = bool_at(j, "objective", "normalize");
    if (j.contains("shard_seed"))
      out.ridge.shard_seed = uint_at(j, "objective", "shard_seed");
    if (!std::filesystem::exists(out.ridge.resolved_dataset))
      throw Error("invalid-config: 'objective.dataset' not found: " +
                  out.ridge.resolved_dataset.string());
  } else {
    throw Error("invalid-config: 'objective.family' must be quadratic or "
                "ridge_separable");
  }
  return out;
}

inline Topology parse_topology(const Json& j) {
  check_object(j, "topology", {}, {"star", "ring", "complete", "graph"});
  if (j.size() != 1)
    throw Error(
        "invalid-config: 'topology' must contain exactly one of star, "
        "ring, complete, graph");
  if (j.contains("star"))
    return Topology::star(
        static_cast<std::uint32_t>(uint_at(j, "topology", "star")));
  if (j.contains("ring"))
    return Topology::ring(
        static_cast<std::uint32_t>(uint_at(j, "topology", "ring")));
  if (j.contains("complete"))
    return Topology::complete(
        static_cast<std::uint32_t>(uint_at(j, "topology", "complete")));
  const Json& g = j.at("graph");
  check_object(g, "topology.graph", {"nodes", "edges"}, {});
  const auto nodes =
      static_cast<std::uint32_t>(uint_at(g, "topology.graph", "nodes"));
  const Json& edges = g.at("edges");
  if (!edges.is_array())
    throw Error("invalid-config: 'topology.graph.edges' must be an array");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
  for (const Json& pair : edges) {
    if (!pair.is_array() || pair.size() != 2 ||
        !pair[0].is_number_unsigned() || !pair[1].is_number_unsigned())
      throw Error(
          "invalid-config: 'topology.graph.edges' entries must be "
          "[u, v] index pairs");
    e.emplace_back(pair[0].get<std::uint32_t>(),
                   pair[1].get<std::uint32_t>());
  }
  return Topology::graph(nodes, e);
}

inline AlgorithmSpec parse_algorithm(const Json& j, std::size_t index) {
  const std::string where = "algorithms[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("name"))
    throw Error("invalid-config: '" + where + "' needs a name");
  AlgorithmSpec out;
  out.name = string_at(j, where, "name");
  out.label = out.name;
  if (out.name == "core_gd") {
    check_object(j, where, {"name", "m"},
                 {"label", "max_rounds", "allow_large_m"});
  } else if (out.name == "core_agd") {
    check_object(j, where, {"name", "m"}, {"label", "max_rounds"});
  } else if (out.name == "core_gd_nonconvex") {
    check_object(j, where,
                 {"name", "m", "option", "epsilon", "hessian_lipschitz",
                  "delta_f"},
                 {"label", "max_rounds", "confidence_delta",
                  "grad_norm_proxy"});
    const std::string option = string_at(j, where, "option");
    if (option == "i")
      out.option = NcOption::option_i;
    else if (option == "ii")
      out.option = NcOption::option_ii;
    else
      throw Error("invalid-config: '" + where +
                  ".option' must be \"i\" or \"ii\"");
    out.epsilon = number_at(j, where, "epsilon");
    out.hessian_lipschitz = number_at(j, where, "hessian_lipschitz");
    out.delta_f = number_at(j, where, "delta_f");
    if (j.contains("confidence_delta"))
      out.confidence_delta = number_at(j, where, "confidence_delta");
    if (j.contains("grad_norm_proxy"))
      out.grad_norm_proxy = bool_at(j, where, "grad_norm_proxy");
  } else if (out.name == "cgd" || out.name == "cagd") {
    check_object(j, where, {"name"}, {"label", "max_rounds"});
  } else {
    throw Error("invalid-config: '" + where + ".name' unknown algorithm '" +
                out.name + "'");
  }
  if (j.contains("m"))
    out.m = static_cast<std::uint32_t>(uint_at(j, where, "m"));
  if (j.contains("allow_large_m"))
    out.allow_large_m = bool_at(j, where, "allow_large_m");
  if (j.contains("label")) out.label = string_at(j, where, "label");
  if (j.contains("max_rounds")) out.max_rounds = uint_at(j, where,
                                                         "max_rounds");
  return out;
}

inline InitialPoint parse_initial_point(const Json& j) {
  InitialPoint out;
  if (!j.is_object() || !j.contains("kind"))
    throw Error("invalid-config: 'initial_point.kind' is required");
  const std::string kind = string_at(j, "initial_point", "kind");
  if (kind == "zero") {
    check_object(j, "initial_point", {"kind"}, {});
    out.kind = InitialPoint::Kind::zero;
  } else if (kind == "ones") {
    check_object(j, "initial_point", {"kind"}, {});
    out.kind = InitialPoint::Kind::ones;
  } else if (kind == "gaussian") {
    check_object(j, "initial_point", {"kind", "seed"}, {"scale"});
    out.kind = InitialPoint::Kind::gaussian;
    out.seed = uint_at(j, "initial_point", "seed");
    if (j.contains("scale"))
      out.scale = number_at(j, "initial_point", "scale");
  } else {
    throw Error(
        "invalid-config: 'initial_point.kind' must be zero, ones, or "
        "gaussian");
  }
  return out;
}

}  // namespace detail

/// Parses and fully validates a config document.  Referenced dataset paths
/// resolve relative to base (the config file's directory) and must exist.
/// Algorithm and family combinations that a run would reject are rejected
/// here, before any run starts.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::filesystem::path& base = ".",
                                     const std::string& source = "<string>") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(std::string("invalid-config: ") + e.what());
  }
  detail::check_object(j, "",
                       {"objective", "topology", "algorithms", "seeds",
                        "max_rounds", "output_dir"},
                       {"target_gap", "initial_point"});

  ExperimentConfig cfg;
  cfg.raw_text = text;
  cfg.source_name = source;
  cfg.objective = detail::parse_objective(j.at("objective"), base);
  cfg.topology = detail::parse_topology(j.at("topology"));

  const Json& algos = j.at("algorithms");
  if (!algos.is_array())
    throw Error("invalid-config: 'algorithms' must be an array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < algos.size(); ++i) {
    cfg.algorithms.push_back(detail::parse_algorithm(algos[i], i));
    if (!labels.insert(cfg.algorithms.back().label).second)
      throw Error("invalid-config: duplicate algorithm label '" +
                  cfg.algorithms.back().label + "'");
  }

  const Json& seeds = j.at("seeds");
  if (!seeds.is_array() || seeds.empty())
    throw Error("invalid-config: 'seeds' must be a non-empty array");
  for (const Json& s : seeds) {
    if (!s.is_number_unsigned())
      throw Error("invalid-config: 'seeds' must hold non-negative integers");
    cfg.seeds.push_back(s.get<std::uint64_t>());
  }

  cfg.max_rounds = detail::uint_at(j, "", "max_rounds");
  if (cfg.max_rounds == 0)
    throw Error("invalid-config: 'max_rounds' must be >= 1");
  if (j.contains("target_gap")) {
    cfg.target_gap = detail::number_at(j, "", "target_gap");
    if (!(cfg.target_gap >= 0.0))
      throw Error("invalid-config: 'target_gap' must be >= 0");
  }
  if (j.contains("initial_point"))
    cfg.initial_point = detail::parse_initial_point(j.at("initial_point"));
  cfg.output_dir = detail::string_at(j, "", "output_dir");
  if (cfg.output_dir.empty())
    throw Error("invalid-config: 'output_dir' must be non-empty");

  const bool quadratic =
      cfg.objective.family == ObjectiveConfig::Family::quadratic;
  const bool bounded_link =
      !quadratic && cfg.objective.ridge.link == Link::bounded_nonconvex;
  for (const auto& alg : cfg.algorithms) {
    if (alg.name == "core_agd" && !quadratic)
      throw Error("invalid-config: core_agd needs the quadratic family");
    if (alg.name == "core_gd_nonconvex" && quadratic)
      throw Error(
          "invalid-config: core_gd_nonconvex needs the ridge_separable "
          "family");
    if (bounded_link && alg.name != "core_gd_nonconvex")
      throw Error("invalid-config: the bounded_nonconvex link has no global "
                  "gap reference; use core_gd_nonconvex");
    if (!bounded_link && alg.name == "core_gd_nonconvex")
      throw Error(
          "invalid-config: core_gd_nonconvex needs the bounded_nonconvex "
          "link");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("invalid-config: cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path(),
                      path.filename().string());
}

}  // namespace core

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "core/datasets.hpp"
#include "core/error.hpp"
#include "core/runner.hpp"
#include "core/verify.hpp"

namespace {

int run_command(const std::string& config_path,
                const std::optional<std::uint64_t>& seed_override,
                unsigned jobs) {
  try {
    const auto cfg = core::load_config(config_path);
    core::RunOptions opts;
    opts.seed_override = seed_override;
    opts.jobs = jobs;
    if (const char* root = std::getenv("BENCH_OUTPUT_ROOT"))
      opts.output_root = std::filesystem::path(root);
    core::run_experiment(cfg, opts);
    return 0;
  } catch (const core::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

int verify_command(const std::string& suite) {
  std::vector<core::ClaimResult> results;
  try {
    results = core::verify_suite(suite);
  } catch (const core::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << r.line() << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int parse_libsvm_command(const std::string& path, bool normalize,
                         const std::string& output) {
  try {
    std::ifstream in(path);
    if (!in) throw core::Error("io-error: cannot open " + path);
    core::LabeledDataset ds = core::parse_libsvm(in);
    if (normalize) ds = core::normalize_rows(std::move(ds));
    std::size_t nnz = 0;
    for (const auto& row : ds.rows) nnz += row.indices.size();
    std::cout << "rows=" << ds.rows.size() << " dim=" << ds.dim
              << " nnz=" << nnz << "\n";
    if (!output.empty()) {
      std::ofstream out(output);
      if (!out) throw core::Error("io-error: cannot write " + output);
      out << core::serialize_libsvm(ds);
    }
    return 0;
  } catch (const core::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Benchmark harness for sketch-compressed distributed optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  unsigned jobs = 1;
  auto* run = app.add_subcommand(
      "run", "Run the (algorithm, seed) grid described by a config file");
  run->add_option("--config", config_path, "Path to the experiment config")
      ->required();
  run->add_option("--seed-override", seed_override,
                  "Replace the config's seed list with this single seed");
  run->add_option("--jobs", jobs, "Worker threads for the grid")
      ->check(CLI::PositiveNumber);

  std::string suite;
  auto* verify = app.add_subcommand(
      "verify", "Measure a claim suite and print one verdict per claim");
  verify->add_option("suite", suite, "Suite name, or 'all'")->required();

  std::string data_path;
  std::string output_path;
  bool normalize = false;
  auto* parse = app.add_subcommand(
      "parse-libsvm", "Parse a LibSVM file and print rows, dim, nnz");
  parse->add_option("path", data_path, "LibSVM file to parse")->required();
  parse->add_flag("--normalize", normalize,
                  "Scale every row to unit Euclidean norm");
  parse->add_option("--output", output_path,
                    "Write the parsed rows back out in LibSVM format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (run->parsed()) return run_command(config_path, seed_override, jobs);
  if (verify->parsed()) return verify_command(suite);
  return parse_libsvm_command(data_path, normalize, output_path);
}

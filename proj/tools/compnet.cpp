// compnet: benchmark, train, synthesize, analyze and verify compositional
// ReLU networks. Exit codes: 0 success, 1 suite failure, 2 usage or I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "compnet/analysis.hpp"
#include "compnet/bench.hpp"
#include "compnet/diagnostics.hpp"
#include "compnet/io.hpp"
#include "compnet/manifold.hpp"
#include "compnet/synthesis.hpp"
#include "compnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace compnet;

namespace {

constexpr int kOk = 0;
constexpr int kSuiteFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int cmd_bench(const std::string& config_path, const std::string& out, std::size_t jobs) {
  const auto cfg = bench_config_from_json(read_json_file(config_path));
  ensure_dir(out);
  const auto runs = run_bench(cfg, jobs, [](const RunResult& r, std::size_t n, std::size_t total) {
    std::fprintf(stderr, "[%zu/%zu] %s %s seed %llu: mse %.3g segments %zu%s\n", n, total,
                 std::string(to_string(r.regime)).c_str(),
                 std::string(to_string(r.target)).c_str(),
                 static_cast<unsigned long long>(r.seed), r.final_mse, r.final_segments,
                 r.diverged ? " (diverged)" : "");
  });
  const auto rows = write_bench_outputs(cfg, runs, out);
  std::cout << table_csv(rows);
  for (const auto& w : ordering_warnings(rows)) std::cout << "warning: " << w << '\n';
  return kOk;
}

int cmd_train(const std::string& regime, const std::string& target, std::uint64_t seed,
              const std::string& config_path, const std::string& out) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = train_config_from_json(read_json_file(config_path));
  Regime r;
  Target t;
  try {
    r = regime_from_string(regime);
    t = target_from_string(target);
    cfg.regime = r;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ensure_dir(out);
  const auto result = run_pipeline(r, TargetFunction(t), seed, cfg);
  write_json_file(fs::path(out) / "result.json", to_json(result));
  if (!result.model.layers().empty()) {
    write_json_file(fs::path(out) / "model.json",
                    to_json(result.model, {{"regime", regime}, {"target", target},
                                           {"seed", seed}, {"train", to_json(cfg)}}));
  }
  std::printf("%s %s seed %llu: final mse %.6g, best %.6g, segments %zu%s (%.2fs)\n",
              regime.c_str(), target.c_str(), static_cast<unsigned long long>(seed),
              result.final_mse, result.best_mse, result.final_segments,
              result.diverged ? ", diverged" : "", result.wall_time_s);
  if (result.diverged) std::printf("%s\n", result.abort_reason.c_str());
  return kOk;
}

int cmd_synth(const std::string& params_path, const std::string& out) {
  const auto p = params_from_json(read_json_file(params_path));
  const auto net = synthesize_compositional(p);
  ensure_dir(out);
  write_json_file(fs::path(out) / "model.json", to_json(net, {{"params", to_json(p)}}));
  const auto f = exact_output_pwl(net);
  write_pwl_csv(fs::path(out) / "output_pwl.csv", f);
  std::printf("depth %zu, %s mode: %zu segments, %zu breakpoints\n", p.depth(),
              std::string(to_string(p.mode)).c_str(), segment_count(f), f.size());
  return kOk;
}

int cmd_analyze(const std::string& model_path, const std::string& out) {
  const auto net = model_from_json(read_json_file(model_path));
  ensure_dir(out);
  const auto r = write_analysis(net, out);
  std::printf("segments %zu, structure depth %zu\n", r.segments, r.structure_depth);
  for (std::size_t k = 0; k < r.zero_crossings.size(); ++k) {
    std::printf("layer %zu%s zero crossings:", k, r.dead_layers[k] ? " (dead)" : "");
    for (auto z : r.zero_crossings[k]) std::printf(" %zu", z);
    std::printf("\n");
  }
  return kOk;
}

int cmd_verify(const std::string& suite) {
  std::vector<std::string_view> names;
  if (suite == "all") {
    names = suite_names();
  } else {
    const auto& known = suite_names();
    if (std::find(known.begin(), known.end(), suite) == known.end()) {
      throw UsageError("unknown suite '" + suite + "'");
    }
    names.push_back(suite);
  }
  bool all_passed = true;
  for (auto name : names) {
    const auto r = run_suite(name);
    std::printf("[%s] %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str());
    for (const auto& line : r.lines) std::printf("  %s\n", line.c_str());
    all_passed = all_passed && r.passed;
  }
  return all_passed ? kOk : kSuiteFailed;
}

int cmd_oracle(const std::string& params_path, const std::string& out,
               std::size_t samples, const std::string& target) {
  const auto p = params_from_json(read_json_file(params_path));
  const auto f = ideal_function(p);
  if (samples == 0) {
    write_pwl_csv(out, f);
  } else {
    std::optional<TargetFunction> t;
    if (!target.empty()) {
      try {
        t.emplace(target_from_string(target));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    std::string text = t ? "x,y,target\n" : "x,y\n";
    char buf[96];
    for (double x : uniform_grid(samples)) {
      if (t) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, f(x), (*t)(x));
      } else {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, f(x));
      }
      text += buf;
    }
    write_text_file(out, text);
  }
  std::printf("depth %zu: %zu segments\n", p.depth(), segment_count(f));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional ReLU networks: synthesis, training and benchmarks"};
  app.require_subcommand(1);

  std::string config, out, regime, target, params, model, suite = "all";
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 0;
  std::size_t samples = 0;

  auto* bench = app.add_subcommand("bench", "run the regime x target x seed benchmark");
  bench->add_option("--config", config, "benchmark config JSON")->required();
  bench->add_option("--out", out, "output directory")->required();
  bench->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "run one training pipeline");
  train->add_option("--regime", regime, "default|raai|no_optimization|manifold_free|manifold_enforced")
      ->required();
  train->add_option("--target", target, "cube|pow11|tanh3x|quarter_sine|square")->required();
  train->add_option("--seed", seed, "run seed")->required();
  train->add_option("--config", config, "train config JSON");
  train->add_option("--out", out, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "synthesize a network from manifold parameters");
  synth->add_option("--params", params, "parameter JSON")->required();
  synth->add_option("--out", out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "layer-wise analysis of a model");
  analyze->add_option("--model", model, "model JSON")->required();
  analyze->add_option("--out", out, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  verify->add_option("--suite", suite,
                     "series|convexity|ratio|decay|secondderiv|oracle|gradcheck|all");

  auto* oracle = app.add_subcommand("oracle", "write the ideal function as CSV");
  oracle->add_option("--params", params, "parameter JSON")->required();
  oracle->add_option("--out", out, "output CSV file")->required();
  oracle->add_option("--samples", samples, "sample on a uniform grid instead of breakpoints");
  oracle->add_option("--target", target, "add a target column (with --samples)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*bench) return cmd_bench(config, out, jobs);
    if (*train) return cmd_train(regime, target, seed, config, out);
    if (*synth) return cmd_synth(params, out);
    if (*analyze) return cmd_analyze(model, out);
    if (*verify) return cmd_verify(suite);
    if (*oracle) return cmd_oracle(params, out, samples, target);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

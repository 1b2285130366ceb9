#pragma once

// Regime x target x seed experiment runner with order-independent
// aggregation into min/mean tables.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "compnet/io.hpp"
#include "compnet/trainer.hpp"

namespace compnet {

inline constexpr const char* kVersion = "0.1.0";

struct BenchConfig {
  std::vector<Regime> regimes{std::begin(kAllRegimes), std::end(kAllRegimes)};
  std::vector<Target> targets{Target::Cube, Target::Pow11, Target::QuarterSine,
                              Target::Tanh3x};
  std::vector<std::uint64_t> seeds;
  TrainConfig train;

  BenchConfig() {
    for (std::uint64_t s = 0; s < 30; ++s) seeds.push_back(s);
  }
};

inline json to_json(const BenchConfig& c) {
  json regimes = json::array();
  for (auto r : c.regimes) regimes.push_back(to_string(r));
  json targets = json::array();
  for (auto t : c.targets) targets.push_back(to_string(t));
  auto train = to_json(c.train);
  train.erase("regime");
  train.erase("seed");
  return {{"regimes", regimes}, {"targets", targets}, {"seeds", c.seeds},
          {"train", train}};
}

/// "seeds" may be a count (0..n-1) or an explicit list.
inline BenchConfig bench_config_from_json(const json& j) {
  if (!j.is_object()) throw IoError("bench config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "regimes" && key != "targets" && key != "seeds" && key != "train") {
      throw IoError("bench config: unknown key '" + key + "'");
    }
  }
  BenchConfig c;
  try {
    if (j.contains("regimes")) {
      c.regimes.clear();
      for (const auto& r : j["regimes"]) c.regimes.push_back(regime_from_string(r.get<std::string>()));
    }
    if (j.contains("targets")) {
      c.targets.clear();
      for (const auto& t : j["targets"]) c.targets.push_back(target_from_string(t.get<std::string>()));
    }
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      c.seeds.clear();
      if (s.is_number_unsigned()) {
        for (std::uint64_t k = 0; k < s.get<std::uint64_t>(); ++k) c.seeds.push_back(k);
      } else {
        c.seeds = s.get<std::vector<std::uint64_t>>();
      }
    }
    if (j.contains("train")) {
      if (j["train"].contains("regime") || j["train"].contains("seed")) {
        throw IoError("bench config: regime and seed are set per run, not in train");
      }
      c.train = train_config_from_json(j["train"]);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bench config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("bench config: ") + e.what());
  }
  if (c.regimes.empty() || c.targets.empty() || c.seeds.empty()) {
    throw IoError("bench config: regimes, targets and seeds must be non-empty");
  }
  auto probe = c.train;
  for (auto r : c.regimes) {
    probe.regime = r;
    try {
      probe.validate();
    } catch (const std::invalid_argument& e) {
      throw IoError(std::string("bench config: ") + e.what());
    }
  }
  return c;
}

struct RunKey {
  Regime regime;
  Target target;
  std::uint64_t seed;
  auto operator<=>(const RunKey&) const = default;
};

inline RunKey key_of(const RunResult& r) { return {r.regime, r.target, r.seed}; }

/// Runs every (regime, target, seed) on `jobs` worker threads. The result is
/// sorted by (regime, target, seed) whatever the completion order.
inline std::vector<RunResult> run_bench(
    const BenchConfig& c, std::size_t jobs,
    const std::function<void(const RunResult&, std::size_t, std::size_t)>& progress = {}) {
  std::vector<RunKey> keys;
  for (auto r : c.regimes) {
    for (auto t : c.targets) {
      for (auto s : c.seeds) keys.push_back({r, t, s});
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<RunResult> results(keys.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < keys.size(); k = next++) {
      results[k] = run_pipeline(keys[k].regime, TargetFunction(keys[k].target),
                                keys[k].seed, c.train);
      results[k].model = DenseNet();
      const std::size_t n = ++finished;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(results[k], n, keys.size());
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(keys.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return results;
}

struct ReportRow {
  Regime regime = Regime::Default;
  Target target = Target::Cube;
  double min_mse = 0.0;
  double mean_mse = 0.0;
  std::size_t collapse_count = 0;
  std::size_t diverged_count = 0;
  double mean_segments = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// Rows in (regime, target) order. Means include collapsed and diverged
/// runs; sums run in seed order so the result does not depend on threads.
inline std::vector<ReportRow> aggregate(const std::vector<RunResult>& runs) {
  std::map<std::pair<Regime, Target>, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{r.regime, r.target}].push_back(&r);
  std::vector<ReportRow> rows;
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(),
              [](const RunResult* a, const RunResult* b) { return a->seed < b->seed; });
    ReportRow row;
    row.regime = key.first;
    row.target = key.second;
    row.min_mse = INFINITY;
    double sum = 0.0;
    double seg_sum = 0.0;
    for (const auto* r : group) {
      const double v = r->reported_mse();
      row.min_mse = std::min(row.min_mse, v);
      sum += v;
      seg_sum += static_cast<double>(r->final_segments);
      row.collapse_count += r->collapsed;
      row.diverged_count += r->diverged;
      row.seeds.push_back(r->seed);
    }
    const double n = static_cast<double>(group.size());
    row.mean_mse = sum / n;
    row.mean_segments = seg_sum / n;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Regime mean-MSE ordering Default >= NoOptimization >= ManifoldFree >=
/// ManifoldEnforced, per target. Returns one message per broken link.
inline std::vector<std::string> ordering_warnings(const std::vector<ReportRow>& rows) {
  const Regime chain[] = {Regime::Default, Regime::NoOptimization,
                          Regime::ManifoldFree, Regime::ManifoldEnforced};
  std::map<std::pair<Target, Regime>, double> mean;
  std::vector<Target> targets;
  for (const auto& r : rows) {
    mean[{r.target, r.regime}] = r.mean_mse;
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end()) {
      targets.push_back(r.target);
    }
  }
  std::vector<std::string> out;
  for (auto t : targets) {
    for (std::size_t k = 0; k + 1 < std::size(chain); ++k) {
      const auto hi = mean.find({t, chain[k]});
      const auto lo = mean.find({t, chain[k + 1]});
      if (hi == mean.end() || lo == mean.end()) continue;
      if (!(hi->second >= lo->second)) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s: mean %s %.3g < %s %.3g",
                      std::string(to_string(t)).c_str(),
                      std::string(to_string(chain[k])).c_str(), hi->second,
                      std::string(to_string(chain[k + 1])).c_str(), lo->second);
        out.emplace_back(buf);
      }
    }
  }
  return out;
}

inline std::string table_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "regime,target,min_mse,mean_mse,collapse_count,mean_segments\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,%.17g", r.min_mse, r.mean_mse,
                  r.collapse_count, r.mean_segments);
    os << to_string(r.regime) << ',' << to_string(r.target) << ',' << buf << '\n';
  }
  return os.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json report_json(const BenchConfig& c, const std::vector<ReportRow>& rows,
                        const std::vector<RunResult>& runs) {
  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"regime", to_string(r.regime)},
                  {"target", to_string(r.target)},
                  {"min_mse", r.min_mse},
                  {"mean_mse", r.mean_mse},
                  {"collapse_count", r.collapse_count},
                  {"diverged_count", r.diverged_count},
                  {"mean_segments", r.mean_segments},
                  {"seeds", r.seeds}});
  }
  double wall = 0.0;
  for (const auto& r : runs) wall += r.wall_time_s;
  return {{"rows", jr},
          {"ordering_warnings", ordering_warnings(rows)},
          {"meta",
           {{"config_hash", fnv1a_hex(to_json(c).dump())},
            {"timestamp", utc_timestamp()},
            {"version", kVersion},
            {"runs", runs.size()},
            {"total_run_seconds", wall}}},
          {"config", to_json(c)}};
}

/// Writes report.json, runs.jsonl and table.csv into dir.
inline std::vector<ReportRow> write_bench_outputs(const BenchConfig& c,
                                                  const std::vector<RunResult>& runs,
                                                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto rows = aggregate(runs);
  std::string lines;
  for (const auto& r : runs) lines += to_json(r).dump() + "\n";
  write_text_file(dir / "runs.jsonl", lines);
  write_text_file(dir / "table.csv", table_csv(rows));
  write_json_file(dir / "report.json", report_json(c, rows, runs));
  return rows;
}

}  // namespace compnet

#pragma once

// JSON and CSV serialization for parameters, models, configs and results.
// Reals go through nlohmann/json, which prints the shortest decimal that
// reads back to the same double.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "compnet/dense_net.hpp"
#include "compnet/manifold.hpp"
#include "compnet/pwl.hpp"
#include "compnet/trainer.hpp"

namespace compnet {

using json = nlohmann::json;

/// File could not be read, written or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline void write_pwl_csv(const std::filesystem::path& path, const PwlFunction& f) {
  std::ostringstream os;
  write_csv(os, f);
  write_text_file(path, os.str());
}

// ---------------------------------------------------------------- params

inline json to_json(const ManifoldParams& p) {
  return {{"peaks", p.peaks}, {"scales", p.scales}, {"mode", to_string(p.mode)}};
}

/// Scales may be omitted, in which case they are derived from the peaks
/// (optionally with "base_scale" and "tail_peak").
inline ManifoldParams params_from_json(const json& j) {
  try {
    ManifoldParams p;
    p.peaks = j.at("peaks").get<std::vector<double>>();
    p.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("scales")) {
      p.scales = j.at("scales").get<std::vector<double>>();
    } else {
      p.scales = derive_scales(p.peaks, p.mode, j.value("base_scale", 1.0),
                               j.value("tail_peak", kDefaultTailPeak));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("parameter file: ") + e.what());
  }
}

// ---------------------------------------------------------------- models

inline json to_json(const DenseNet& net, const json& meta = json::object()) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json rows = json::array();
    for (std::size_t r = 0; r < l.out; ++r) {
      rows.push_back(std::vector<double>(l.w.begin() + static_cast<std::ptrdiff_t>(r * l.in),
                                         l.w.begin() + static_cast<std::ptrdiff_t>((r + 1) * l.in)));
    }
    layers.push_back({{"w", rows}, {"b", l.b}});
  }
  return {{"widths", net.widths()}, {"layers", layers}, {"meta", meta}};
}

inline DenseNet model_from_json(const json& j) {
  try {
    const auto widths = j.at("widths").get<std::vector<std::size_t>>();
    std::vector<Layer> layers;
    const auto& jl = j.at("layers");
    if (!jl.is_array()) throw IoError("model file: layers must be an array");
    for (std::size_t k = 0; k < jl.size(); ++k) {
      const auto rows = jl[k].at("w").get<std::vector<std::vector<double>>>();
      Layer l;
      l.b = jl[k].at("b").get<std::vector<double>>();
      l.out = rows.size();
      l.in = rows.empty() ? 0 : rows.front().size();
      for (const auto& row : rows) {
        if (row.size() != l.in) throw IoError("model file: ragged weight matrix");
        l.w.insert(l.w.end(), row.begin(), row.end());
      }
      layers.push_back(std::move(l));
    }
    return DenseNet(widths, std::move(layers));
  } catch (const json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
}

// ---------------------------------------------------------------- configs

inline json to_json(const TrainConfig& c) {
  return {{"regime", to_string(c.regime)},
          {"depth", c.depth},
          {"epochs_stage1", c.epochs_stage1},
          {"epochs_stage2", c.epochs_stage2},
          {"lr", c.lr},
          {"lr_manifold", c.lr_manifold},
          {"seed", c.seed},
          {"clamp_eps", c.clamp_eps},
          {"tail_peak", c.tail_peak},
          {"p0_lo", c.p0_lo},
          {"p0_hi", c.p0_hi},
          {"segment_log_every", c.segment_log_every},
          {"stage1_segment_log_every", c.stage1_segment_log_every},
          {"divergence_threshold", c.divergence_threshold}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
  if (!j.is_object()) throw IoError("train config must be an object");
  const json known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw IoError("train config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("regime")) c.regime = regime_from_string(j["regime"].get<std::string>());
    c.depth = j.value("depth", c.depth);
    c.epochs_stage1 = j.value("epochs_stage1", c.epochs_stage1);
    c.epochs_stage2 = j.value("epochs_stage2", c.epochs_stage2);
    c.lr = j.value("lr", c.lr);
    c.lr_manifold = j.value("lr_manifold", c.lr_manifold);
    c.seed = j.value("seed", c.seed);
    c.clamp_eps = j.value("clamp_eps", c.clamp_eps);
    c.tail_peak = j.value("tail_peak", c.tail_peak);
    c.p0_lo = j.value("p0_lo", c.p0_lo);
    c.p0_hi = j.value("p0_hi", c.p0_hi);
    c.segment_log_every = j.value("segment_log_every", c.segment_log_every);
    c.stage1_segment_log_every =
        j.value("stage1_segment_log_every", c.stage1_segment_log_every);
    c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
  } catch (const json::exception& e) {
    throw IoError(std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- results

inline json to_json(const std::vector<SegmentLog>& log) {
  json a = json::array();
  for (const auto& s : log) a.push_back({s.epoch, s.segments});
  return a;
}

/// Wall time is left out unless asked for, so results of identical runs
/// serialize to identical bytes.
inline json to_json(const RunResult& r, bool with_wall_time = false) {
  json j = {{"regime", to_string(r.regime)},
            {"target", to_string(r.target)},
            {"seed", r.seed},
            {"depth", r.depth},
            {"initial_mse", r.initial_mse},
            {"final_mse", r.final_mse},
            {"best_mse", r.best_mse},
            {"final_segments", r.final_segments},
            {"collapsed", r.collapsed},
            {"diverged", r.diverged},
            {"abort_reason", r.abort_reason},
            {"stage_transition_epoch", r.stage_transition_epoch},
            {"off_manifold_epochs", r.off_manifold_epochs},
            {"dead_layers", r.dead_layers},
            {"stage1_segments", to_json(r.stage1_segments)},
            {"stage2_segments", to_json(r.stage2_segments)},
            {"trace", r.trace}};
  // Non-finite losses have no JSON number form.
  for (const char* key : {"initial_mse", "final_mse", "best_mse"}) {
    if (!std::isfinite(j[key].get<double>())) j[key] = nullptr;
  }
  for (auto& v : j["trace"]) {
    if (!std::isfinite(v.get<double>())) v = nullptr;
  }
  j["p0"] = r.p0 ? to_json(*r.p0) : json(nullptr);
  j["stage1_params"] = r.stage1_params ? to_json(*r.stage1_params) : json(nullptr);
  if (with_wall_time) j["wall_time_s"] = r.wall_time_s;
  return j;
}

}  // namespace compnet

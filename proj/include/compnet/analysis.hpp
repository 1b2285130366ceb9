#pragma once

// Layer-by-layer inspection of a trained or synthesized network: sampled
// pre-activations, exact output segments, dead layers and how many times
// each neuron crosses zero (its bend budget).

#include <cstddef>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "compnet/dense_net.hpp"
#include "compnet/io.hpp"
#include "compnet/pwl.hpp"

namespace compnet {

inline constexpr std::size_t kAnalysisSamples = 1001;

struct AnalysisReport {
  std::size_t segments = 0;
  std::vector<bool> dead_layers;
  /// zero_crossings[k][n]: sign changes of neuron n's pre-activation in
  /// hidden layer k over [0,1], from the exact PWL.
  std::vector<std::vector<std::size_t>> zero_crossings;
  /// Leading hidden layers whose busiest neuron crosses zero at least 2^k
  /// times, i.e. the depth to which triangle structure survives.
  std::size_t structure_depth = 0;
};

inline AnalysisReport analyze_net(const DenseNet& net) {
  AnalysisReport r;
  const auto pre = layer_pwls(net);
  r.segments = segment_count(pre.back().front());
  r.dead_layers = dying_relu_report(net, uniform_grid(kAnalysisSamples));
  bool intact = true;
  for (std::size_t k = 0; k + 1 < pre.size(); ++k) {
    std::vector<std::size_t> zc;
    std::size_t busiest = 0;
    for (const auto& f : pre[k]) {
      zc.push_back(zero_crossings(f));
      busiest = std::max(busiest, zc.back());
    }
    intact = intact && busiest >= (std::size_t{1} << k);
    if (intact) ++r.structure_depth;
    r.zero_crossings.push_back(std::move(zc));
  }
  return r;
}

inline nlohmann::json to_json(const AnalysisReport& r) {
  return {{"segments", r.segments},
          {"dead_layers", r.dead_layers},
          {"zero_crossings", r.zero_crossings},
          {"structure_depth", r.structure_depth}};
}

/// Pre-activation samples of one layer: header x,n0,n1,...
inline std::string layer_csv(const DenseNet& net, std::size_t layer,
                             std::size_t samples = kAnalysisSamples) {
  std::ostringstream os;
  os << "x";
  const std::size_t width = net.layers()[layer].out;
  for (std::size_t n = 0; n < width; ++n) os << ",n" << n;
  os << '\n';
  char buf[32];
  for (double x : uniform_grid(samples)) {
    const auto act = forward(net, x);
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf;
    const auto& z = layer < act.pre.size() ? act.pre[layer]
                                           : std::vector<double>{act.output};
    for (double v : z) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

/// Writes layer_<k>.csv for every layer (the last one is the output),
/// output_pwl.csv and analysis.json into dir.
inline AnalysisReport write_analysis(const DenseNet& net,
                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto report = analyze_net(net);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    write_text_file(dir / ("layer_" + std::to_string(k) + ".csv"), layer_csv(net, k));
  }
  write_pwl_csv(dir / "output_pwl.csv", exact_output_pwl(net));
  write_json_file(dir / "analysis.json", to_json(report));
  return report;
}

}  // namespace compnet

#include "vhd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vhd {

std::vector<float> upsample_linear(std::span<const float> values, std::int64_t target) {
  if (values.empty() || target < 1) throw std::invalid_argument("upsample_linear: empty input");
  const std::int64_t n = static_cast<std::int64_t>(values.size());
  std::vector<float> out(static_cast<std::size_t>(target));
  if (n == 1 || target == 1) {
    std::fill(out.begin(), out.end(), values[0]);
    if (target >= 1) out[static_cast<std::size_t>(target - 1)] = values[static_cast<std::size_t>(n - 1)];
    return out;
  }
  const double scale = static_cast<double>(n - 1) / static_cast<double>(target - 1);
  for (std::int64_t j = 0; j < target; ++j) {
    const double x = static_cast<double>(j) * scale;
    const std::int64_t lo = std::min<std::int64_t>(static_cast<std::int64_t>(x), n - 2);
    const double frac = x - static_cast<double>(lo);
    out[static_cast<std::size_t>(j)] =
        static_cast<float>((1.0 - frac) * values[static_cast<std::size_t>(lo)] +
                           frac * values[static_cast<std::size_t>(lo + 1)]);
  }
  return out;
}

void minmax_normalize(std::span<float> values) {
  if (values.empty()) return;
  float lo = values[0], hi = values[0];
  for (float v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi <= lo) {
    std::fill(values.begin(), values.end(), 0.0f);
    return;
  }
  const float inv = 1.0f / (hi - lo);
  for (auto& v : values) v = (v - lo) * inv;
}

std::vector<float> score_window(std::span<const float> window_data, std::int64_t window_len,
                                const BranchParams<float>& branch, const TrainConfig& cfg) {
  Tensor<float> input = Tensor<float>::from(
      {window_len, static_cast<std::int64_t>(window_data.size()) / window_len},
      std::vector<float>(window_data.begin(), window_data.end()));
  auto scored = encode_with_activations(input, branch, cfg);
  auto acts = scored.activations.data();
  return upsample_linear({acts.data(), acts.size()}, window_len);
}

HighlightResult infer(const FeatureVectorSequence& visual, const ModelState<float>& model,
                      const InferOptions& opts) {
  const TrainConfig& cfg = model.cfg;
  if (visual.d != cfg.model_dim())
    throw DataError("infer: input width " + std::to_string(visual.d) +
                    " does not match the model's feature width " + std::to_string(cfg.model_dim()));
  const BranchParams<float>& branch = model.scoring_branch();

  HighlightResult result;
  result.id = visual.source_id;
  result.scores.assign(static_cast<std::size_t>(visual.n), 0.0f);
  std::vector<std::uint8_t> assigned(static_cast<std::size_t>(visual.n), 0);

  for (const auto& window : window_clip(visual, cfg.window)) {
    const auto scores = score_window(window.data, window.len(), branch, cfg);
    for (std::size_t i = 0; i < window.provenance.size(); ++i) {
      const std::int64_t t = window.provenance[i];
      // Only the portion corresponding to the original video counts; the
      // repeat-padded tail revisits earlier timesteps and is discarded.
      if (!assigned[static_cast<std::size_t>(t)]) {
        result.scores[static_cast<std::size_t>(t)] = scores[i];
        assigned[static_cast<std::size_t>(t)] = 1;
      }
    }
  }
  minmax_normalize(result.scores);
  result.segments = threshold_segments(result.scores, opts.threshold, opts.min_segment_len);
  return result;
}

void write_scores_csv(std::span<const float> scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "timestep,score\n";
  out.precision(9);
  for (std::size_t t = 0; t < scores.size(); ++t) out << t << ',' << scores[t] << '\n';
  if (!out) throw DataError("short write to " + path);
}

std::vector<float> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores file " + path);
  std::string line;
  if (!std::getline(in, line) || line != "timestep,score")
    throw DataError(path + ": missing 'timestep,score' header");
  std::vector<float> scores;
  std::int64_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path + ": malformed row '" + line + "'");
    std::int64_t t;
    float v;
    try {
      t = std::stoll(line.substr(0, comma));
      v = std::stof(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(path + ": malformed row '" + line + "'");
    }
    if (t != expected) throw DataError(path + ": non-contiguous timestep " + std::to_string(t));
    ++expected;
    scores.push_back(v);
  }
  if (scores.empty()) throw DataError(path + ": no score rows");
  return scores;
}

void write_scores_svg(std::span<const float> scores, float threshold, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  const int width = 800, height = 200, margin = 10;
  const std::size_t n = scores.size();
  auto x_of = [&](std::size_t i) {
    return margin + static_cast<double>(i) * (width - 2 * margin) / std::max<std::size_t>(1, n - 1);
  };
  auto y_of = [&](float v) { return height - margin - static_cast<double>(v) * (height - 2 * margin); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << y_of(threshold) << "\" x2=\"" << width - margin
      << "\" y2=\"" << y_of(threshold) << "\" stroke=\"#cc3333\" stroke-dasharray=\"4 3\"/>\n";
  out << "  <polyline fill=\"none\" stroke=\"#2266aa\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << x_of(i) << ',' << y_of(scores[i]);
  }
  out << "\"/>\n</svg>\n";
  if (!out) throw DataError("short write to " + path);
}

}  // namespace vhd

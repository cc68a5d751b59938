#include "vhd/synth.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

namespace vhd {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller pair per call; one draw discarded for simplicity.
double gauss(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<double> gauss_vec(std::mt19937_64& rng, std::int64_t n, double scale) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = scale * gauss(rng);
  return v;
}

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Plants non-overlapping highlight runs totaling about fraction * n steps.
std::vector<std::uint8_t> plant_segments(std::mt19937_64& rng, std::int64_t n,
                                         const SynthSpec& spec) {
  std::vector<std::uint8_t> label(static_cast<std::size_t>(n), 0);
  std::int64_t remaining =
      static_cast<std::int64_t>(std::llround(spec.highlight_fraction * static_cast<double>(n)));
  while (remaining > 0) {
    std::int64_t len = std::min<std::int64_t>(
        remaining, uniform_int(rng, spec.min_segment, spec.max_segment));
    if (remaining - len < spec.min_segment) len = remaining;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const std::int64_t start = uniform_int(rng, 0, n - len);
      bool free = true;
      const std::int64_t lo = std::max<std::int64_t>(0, start - 2);
      const std::int64_t hi = std::min(n, start + len + 2);
      for (std::int64_t i = lo; i < hi; ++i)
        if (label[static_cast<std::size_t>(i)]) {
          free = false;
          break;
        }
      if (!free) continue;
      for (std::int64_t i = start; i < start + len; ++i) label[static_cast<std::size_t>(i)] = 1;
      placed = true;
    }
    if (!placed) break;  // video too crowded to place more
    remaining -= len;
  }
  return label;
}

}  // namespace

DatasetManifest synth_generate(const SynthSpec& spec, const std::string& out_dir) {
  if (!(spec.highlight_fraction > 0.0 && spec.highlight_fraction <= 0.5))
    throw std::invalid_argument("synth: highlight_fraction must lie in (0, 0.5]");
  if (spec.clusters < 1) throw std::invalid_argument("synth: cluster count must be >= 1");
  if (spec.highlight_fraction * static_cast<double>(spec.min_timesteps) < 1.0)
    throw std::invalid_argument("synth: fraction*N < 1, no highlight fits");
  if (spec.videos < 1 || spec.min_timesteps < 1 || spec.min_timesteps > spec.max_timesteps)
    throw std::invalid_argument("synth: bad video/timestep counts");
  if (!(spec.coupling >= 0.0 && spec.coupling <= 1.0))
    throw std::invalid_argument("synth: coupling must lie in [0, 1]");

  std::filesystem::create_directories(out_dir);
  std::mt19937_64 rng(spec.seed);
  const std::int64_t dz = spec.latent_dim;
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(dz));

  // Fixed random linear maps from latent space to each modality.
  const std::vector<double> map_v = gauss_vec(rng, spec.d_v * dz, map_scale);
  const std::vector<double> map_a = gauss_vec(rng, spec.d_a * dz, map_scale);

  auto project = [dz](const std::vector<double>& map, const std::vector<double>& latent,
                      float* out, std::int64_t d) {
    for (std::int64_t i = 0; i < d; ++i) {
      double acc = 0.0;
      const double* row = map.data() + i * dz;
      for (std::int64_t j = 0; j < dz; ++j) acc += row[j] * latent[static_cast<std::size_t>(j)];
      out[i] = static_cast<float>(acc);
    }
  };

  DatasetManifest manifest;
  manifest.split = "synth";
  for (std::int64_t v = 0; v < spec.videos; ++v) {
    const std::int64_t n = uniform_int(rng, spec.min_timesteps, spec.max_timesteps);
    std::vector<std::uint8_t> labels = plant_segments(rng, n, spec);

    // Isolated outlier steps in background territory, labeled background.
    std::vector<std::uint8_t> outlier(static_cast<std::size_t>(n), 0);
    for (std::int64_t o = 0; o < spec.outliers_per_video; ++o) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const std::int64_t t = uniform_int(rng, 0, n - 1);
        bool clear = true;
        for (std::int64_t i = std::max<std::int64_t>(0, t - 3);
             i < std::min(n, t + 4) && clear; ++i)
          clear = !labels[static_cast<std::size_t>(i)] && !outlier[static_cast<std::size_t>(i)];
        if (clear) {
          outlier[static_cast<std::size_t>(t)] = 1;
          break;
        }
      }
    }

    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(spec.clusters));
    for (std::int64_t c = 0; c < spec.clusters; ++c) centers.push_back(gauss_vec(rng, dz, 1.0));

    FeatureVectorSequence visual, audio;
    visual.modality = FvsModality::visual;
    visual.n = n;
    visual.d = spec.d_v;
    visual.timestep_seconds = spec.timestep_seconds;
    visual.data.resize(static_cast<std::size_t>(n * spec.d_v));
    audio.modality = FvsModality::audio;
    audio.n = n;
    audio.d = spec.d_a;
    audio.timestep_seconds = spec.timestep_seconds;
    audio.data.resize(static_cast<std::size_t>(n * spec.d_a));

    std::size_t cluster = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(spec.clusters));
    std::vector<double> base(static_cast<std::size_t>(dz));
    std::vector<double> latent_v(static_cast<std::size_t>(dz)), latent_a(static_cast<std::size_t>(dz));
    for (std::int64_t t = 0; t < n; ++t) {
      // Background scene changes occasionally, like cuts between shots.
      if (unit_uniform(rng) < 1.0 / 30.0)
        cluster = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(spec.clusters));
      for (std::int64_t j = 0; j < dz; ++j)
        base[static_cast<std::size_t>(j)] = centers[cluster][static_cast<std::size_t>(j)] +
                                            spec.background_jitter * gauss(rng);
      std::vector<double> signal(static_cast<std::size_t>(dz), 0.0);
      if (labels[static_cast<std::size_t>(t)]) signal = gauss_vec(rng, dz, 1.0);
      if (outlier[static_cast<std::size_t>(t)]) signal = gauss_vec(rng, dz, spec.outlier_gain);

      for (std::int64_t j = 0; j < dz; ++j) {
        latent_v[static_cast<std::size_t>(j)] =
            base[static_cast<std::size_t>(j)] + spec.visual_gain * signal[static_cast<std::size_t>(j)];
        latent_a[static_cast<std::size_t>(j)] =
            base[static_cast<std::size_t>(j)] + spec.audio_gain * signal[static_cast<std::size_t>(j)];
      }
      if (spec.coupling < 1.0) {
        const std::vector<double> indep = gauss_vec(rng, dz, 1.0);
        for (std::int64_t j = 0; j < dz; ++j)
          latent_a[static_cast<std::size_t>(j)] =
              spec.coupling * latent_a[static_cast<std::size_t>(j)] +
              (1.0 - spec.coupling) * indep[static_cast<std::size_t>(j)];
      }
      project(map_v, latent_v, visual.row(t).data(), spec.d_v);
      project(map_a, latent_a, audio.row(t).data(), spec.d_a);
      if (spec.audio_noise > 0.0)
        for (std::int64_t j = 0; j < spec.d_a; ++j)
          audio.row(t)[j] += static_cast<float>(spec.audio_noise * gauss(rng));
    }

    char stem[32];
    std::snprintf(stem, sizeof stem, "v%03lld", static_cast<long long>(v));
    const std::string visual_name = std::string(stem) + "_visual.fvs";
    const std::string audio_name = std::string(stem) + "_audio.fvs";
    const std::string label_name = std::string(stem) + "_labels.fvs";
    const auto dir = std::filesystem::path(out_dir);
    save_fvs(visual, (dir / visual_name).string());
    save_fvs(audio, (dir / audio_name).string());
    std::vector<float> label_f(labels.begin(), labels.end());
    save_labels(label_f, spec.timestep_seconds, (dir / label_name).string());
    manifest.entries.push_back({stem, visual_name, audio_name, label_name});
  }

  const std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.tsv").string();
  save_manifest(manifest, manifest_path);
  return load_manifest(manifest_path);
}

}  // namespace vhd

#include "vhd/fvs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace vhd {

namespace {

constexpr char kMagic[4] = {'F', 'V', 'S', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(path + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in, const std::string& path) {
  const std::uint32_t bits = read_u32(in, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_payload(std::ostream& out, std::span<const float> values) {
  // Little-endian hosts can write the buffer as-is.
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) write_f32(out, v);
  }
}

void read_payload(std::istream& in, std::span<float> values, const std::string& path) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float))))
      throw DataError(path + ": truncated payload");
  } else {
    for (auto& v : values) v = read_f32(in, path);
  }
}

}  // namespace

void save_fvs(const FeatureVectorSequence& fvs, const std::string& path) {
  if (fvs.n < 1 || fvs.d < 1 ||
      fvs.data.size() != static_cast<std::size_t>(fvs.n * fvs.d))
    throw std::invalid_argument("save_fvs: inconsistent dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  out.put(static_cast<char>(fvs.modality));
  write_u32(out, static_cast<std::uint32_t>(fvs.n));
  write_u32(out, static_cast<std::uint32_t>(fvs.d));
  write_f32(out, fvs.timestep_seconds);
  write_payload(out, fvs.data);
  if (!out) throw DataError("short write to " + path);
}

FeatureVectorSequence load_fvs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path + ": bad magic, not an FVS file");
  const int modality = in.get();
  if (modality < 0 || modality > 2) throw DataError(path + ": unknown modality code");
  FeatureVectorSequence fvs;
  fvs.modality = static_cast<FvsModality>(modality);
  fvs.n = read_u32(in, path);
  fvs.d = read_u32(in, path);
  if (fvs.n < 1 || fvs.d < 1) throw DataError(path + ": empty dimensions");
  fvs.timestep_seconds = read_f32(in, path);
  fvs.data.resize(static_cast<std::size_t>(fvs.n * fvs.d));
  read_payload(in, fvs.data, path);
  for (std::size_t i = 0; i < fvs.data.size(); ++i) {
    if (!std::isfinite(fvs.data[i]))
      throw DataError(path + ": non-finite entry at row " +
                      std::to_string(static_cast<std::int64_t>(i) / fvs.d) + ", column " +
                      std::to_string(static_cast<std::int64_t>(i) % fvs.d));
  }
  fvs.source_id = std::filesystem::path(path).stem().string();
  return fvs;
}

void save_labels(std::span<const float> labels, float timestep_seconds, const std::string& path) {
  FeatureVectorSequence fvs;
  fvs.modality = FvsModality::label;
  fvs.n = static_cast<std::int64_t>(labels.size());
  fvs.d = 1;
  fvs.data.assign(labels.begin(), labels.end());
  fvs.timestep_seconds = timestep_seconds;
  save_fvs(fvs, path);
}

std::vector<float> load_labels(const std::string& path) {
  FeatureVectorSequence fvs = load_fvs(path);
  if (fvs.modality != FvsModality::label || fvs.d != 1)
    throw DataError(path + ": not a label sidecar file");
  return std::move(fvs.data);
}

std::vector<FvsWindow> window_clip(const FeatureVectorSequence& fvs, std::int64_t window_len) {
  if (window_len < 1) throw std::invalid_argument("window_clip: window_len must be >= 1");
  if (fvs.n < 1) throw std::invalid_argument("window_clip: empty input");
  std::vector<FvsWindow> windows;
  std::int64_t start = 0;
  while (start < fvs.n) {
    const std::int64_t remaining = fvs.n - start;
    FvsWindow w;
    w.d = fvs.d;
    w.data.resize(static_cast<std::size_t>(window_len * fvs.d));
    w.provenance.resize(static_cast<std::size_t>(window_len));
    if (remaining >= window_len) {
      std::copy_n(fvs.data.data() + start * fvs.d, window_len * fvs.d, w.data.data());
      for (std::int64_t i = 0; i < window_len; ++i) w.provenance[static_cast<std::size_t>(i)] = start + i;
    } else {
      // Short remainder: repeat it until the window is full.
      for (std::int64_t i = 0; i < window_len; ++i) {
        const std::int64_t src = start + (i % remaining);
        std::copy_n(fvs.data.data() + src * fvs.d, fvs.d, w.data.data() + i * fvs.d);
        w.provenance[static_cast<std::size_t>(i)] = src;
      }
    }
    windows.push_back(std::move(w));
    start += window_len;
  }
  return windows;
}

std::vector<float> scatter_average(const std::vector<FvsWindow>& windows,
                                   const std::vector<std::vector<float>>& window_scores,
                                   std::int64_t n) {
  if (windows.size() != window_scores.size())
    throw std::invalid_argument("scatter_average: window/score count mismatch");
  std::vector<float> sums(static_cast<std::size_t>(n), 0.0f);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n), 0);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& prov = windows[w].provenance;
    const auto& scores = window_scores[w];
    if (scores.size() != prov.size())
      throw std::invalid_argument("scatter_average: score length mismatch in window " + std::to_string(w));
    for (std::size_t i = 0; i < prov.size(); ++i) {
      const std::int64_t t = prov[i];
      if (t < 0 || t >= n) throw std::invalid_argument("scatter_average: provenance outside [0, n)");
      sums[static_cast<std::size_t>(t)] += scores[i];
      counts[static_cast<std::size_t>(t)] += 1;
    }
  }
  for (std::size_t t = 0; t < sums.size(); ++t) {
    if (counts[t] == 0) throw std::invalid_argument("scatter_average: timestep " + std::to_string(t) + " uncovered");
    sums[t] /= static_cast<float>(counts[t]);
  }
  return sums;
}

FeatureVectorSequence pool_audio_temporal(const FeatureVectorSequence& fvs, std::int64_t target) {
  if (target < 1) throw std::invalid_argument("pool_audio_temporal: target must be >= 1");
  if (fvs.n < target)
    throw std::invalid_argument("pool_audio_temporal: input length " + std::to_string(fvs.n) +
                                " shorter than target " + std::to_string(target));
  FeatureVectorSequence out;
  out.modality = fvs.modality;
  out.n = target;
  out.d = fvs.d;
  out.source_id = fvs.source_id;
  out.timestep_seconds = fvs.timestep_seconds * static_cast<float>(fvs.n) / static_cast<float>(target);
  out.data.assign(static_cast<std::size_t>(target * fvs.d), 0.0f);
  const std::int64_t width = fvs.n / target;
  for (std::int64_t b = 0; b < target; ++b) {
    const std::int64_t lo = b * width;
    const std::int64_t hi = (b + 1 == target) ? fvs.n : lo + width;
    float* dst = out.data.data() + b * fvs.d;
    for (std::int64_t i = lo; i < hi; ++i) {
      const float* src = fvs.data.data() + i * fvs.d;
      for (std::int64_t j = 0; j < fvs.d; ++j) dst[j] += src[j];
    }
    const float inv = 1.0f / static_cast<float>(hi - lo);
    for (std::int64_t j = 0; j < fvs.d; ++j) dst[j] *= inv;
  }
  return out;
}

FeatureVectorSequence resample_vector_length(const FeatureVectorSequence& fvs, std::int64_t target) {
  if (fvs.d < 2) throw std::invalid_argument("resample_vector_length: source width must be >= 2");
  if (target < 2) throw std::invalid_argument("resample_vector_length: target width must be >= 2");
  FeatureVectorSequence out;
  out.modality = fvs.modality;
  out.n = fvs.n;
  out.d = target;
  out.source_id = fvs.source_id;
  out.timestep_seconds = fvs.timestep_seconds;
  out.data.resize(static_cast<std::size_t>(fvs.n * target));
  const double scale = static_cast<double>(fvs.d - 1) / static_cast<double>(target - 1);
  for (std::int64_t i = 0; i < fvs.n; ++i) {
    const float* src = fvs.data.data() + i * fvs.d;
    float* dst = out.data.data() + i * target;
    for (std::int64_t j = 0; j < target; ++j) {
      const double x = static_cast<double>(j) * scale;
      const std::int64_t lo = std::min<std::int64_t>(static_cast<std::int64_t>(x), fvs.d - 2);
      const double frac = x - static_cast<double>(lo);
      dst[j] = static_cast<float>((1.0 - frac) * src[lo] + frac * src[lo + 1]);
    }
  }
  return out;
}

std::int64_t BitMask::count() const {
  std::int64_t c = 0;
  for (auto b : bits) c += b != 0;
  return c;
}

BitMask generate_mask(std::int64_t n, double ratio, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_mask: n must be >= 1");
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw std::invalid_argument("generate_mask: ratio must lie in [0, 1)");
  const auto want = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(n)));
  BitMask mask;
  mask.bits.assign(static_cast<std::size_t>(n), 0);
  if (want == 0) return mask;
  // Partial Fisher-Yates over the index range.
  std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (std::int64_t i = 0; i < want; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    mask.bits[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])] = 1;
  }
  return mask;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  DatasetManifest manifest;
  manifest.split = std::filesystem::path(path).stem().string();
  const auto dir = std::filesystem::path(path).parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() < 3 || fields.size() > 4)
      throw DataError(path + " line " + std::to_string(lineno) + ": expected 3 or 4 tab-separated fields");
    auto resolve = [&](const std::string& p) {
      if (p.empty()) return p;
      std::filesystem::path fp(p);
      return fp.is_absolute() ? p : (dir / fp).string();
    };
    ManifestEntry entry;
    entry.id = fields[0];
    entry.visual_path = resolve(fields[1]);
    entry.audio_path = resolve(fields[2]);
    entry.label_path = fields.size() == 4 ? resolve(fields[3]) : "";
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open manifest " + path + " for writing");
  for (const auto& e : manifest.entries) {
    out << e.id << '\t' << e.visual_path << '\t' << e.audio_path;
    if (!e.label_path.empty()) out << '\t' << e.label_path;
    out << '\n';
  }
}

}  // namespace vhd

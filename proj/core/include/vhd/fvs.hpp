#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vhd {

/// File-format or data-content problem (bad magic, truncation, non-finite
/// payload, mismatched pairing). The CLI maps these to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FvsModality : std::uint8_t { visual = 0, audio = 1, label = 2 };

/// One modality of one video: N per-timestep feature vectors of width d,
/// stored row-major. The binary format is:
///   magic "FVS1" | u8 modality | u32 N | u32 d | f32 timestep seconds |
///   N*d little-endian f32, row-major.
struct FeatureVectorSequence {
  FvsModality modality = FvsModality::visual;
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::vector<float> data;
  std::string source_id;
  float timestep_seconds = 0.2f;

  std::span<const float> row(std::int64_t i) const {
    return {data.data() + i * d, static_cast<std::size_t>(d)};
  }
  std::span<float> row(std::int64_t i) {
    return {data.data() + i * d, static_cast<std::size_t>(d)};
  }
};

void save_fvs(const FeatureVectorSequence& fvs, const std::string& path);
/// Throws DataError on bad magic, truncation, or a non-finite entry (the
/// message reports the first offending position).
FeatureVectorSequence load_fvs(const std::string& path);

/// Per-timestep labels in a d=1 FVS file with the label modality code.
void save_labels(std::span<const float> labels, float timestep_seconds, const std::string& path);
std::vector<float> load_labels(const std::string& path);

/// One fixed-length window plus the original timestep index of each of its
/// rows. A repeat-padded window's provenance wraps modulo the source length.
struct FvsWindow {
  std::vector<float> data;  // window_len x d
  std::int64_t d = 0;
  std::vector<std::int64_t> provenance;

  std::int64_t len() const { return static_cast<std::int64_t>(provenance.size()); }
};

/// Consecutive non-overlapping windows of exactly window_len timesteps. A
/// final short remainder (or a whole short input) is concatenated with
/// itself until it reaches window_len, then clipped.
std::vector<FvsWindow> window_clip(const FeatureVectorSequence& fvs, std::int64_t window_len);

/// Scatters per-window values back onto the original timeline via
/// provenance, averaging duplicate contributions. Returns length n.
std::vector<float> scatter_average(const std::vector<FvsWindow>& windows,
                                   const std::vector<std::vector<float>>& window_scores,
                                   std::int64_t n);

/// Non-overlapping temporal mean pooling down to exactly target timesteps.
/// Bins have width floor(N/target); the last bin absorbs the remainder and
/// is averaged over its actual width. Requires N >= target.
FeatureVectorSequence pool_audio_temporal(const FeatureVectorSequence& fvs, std::int64_t target);

/// Each row linearly interpolated (endpoints aligned) from d to target
/// entries. Requires d >= 2 and target >= 2.
FeatureVectorSequence resample_vector_length(const FeatureVectorSequence& fvs, std::int64_t target);

struct BitMask {
  std::vector<std::uint8_t> bits;  // 1 = masked (row zeroed)

  std::int64_t size() const { return static_cast<std::int64_t>(bits.size()); }
  std::int64_t count() const;
  bool masked(std::int64_t i) const { return bits[static_cast<std::size_t>(i)] != 0; }
};

/// Exactly round(ratio * n) positions masked, drawn uniformly without
/// replacement; deterministic per seed.
BitMask generate_mask(std::int64_t n, double ratio, std::uint64_t seed);

struct ManifestEntry {
  std::string id;
  std::string visual_path;
  std::string audio_path;
  std::string label_path;  // empty when unlabeled
};

/// Ordered entries of a dataset split. On disk: one
/// "id<TAB>visual_path<TAB>audio_path<TAB>label_path?" line per video.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string split;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace vhd

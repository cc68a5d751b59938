#include "vhd/trainer.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vhd {

template <typename T>
RmsPropState<T> RmsPropState<T>::init(const std::vector<std::pair<std::string, Tensor<T>>>& registry,
                                      const TrainConfig& cfg) {
  RmsPropState<T> s;
  s.alpha = static_cast<T>(cfg.rms_alpha);
  s.eps = static_cast<T>(cfg.rms_eps);
  s.lr = static_cast<T>(cfg.lr);
  s.accum.reserve(registry.size());
  for (const auto& [name, tensor] : registry)
    s.accum.emplace_back(static_cast<std::size_t>(tensor.numel()), T(0));
  return s;
}

template <typename T>
void RmsPropState<T>::step(const std::vector<std::pair<std::string, Tensor<T>>>& registry) {
  if (registry.size() != accum.size())
    throw std::runtime_error("rmsprop: optimizer state does not match the parameter registry");
  for (std::size_t p = 0; p < registry.size(); ++p) {
    Tensor<T> tensor = registry[p].second;
    if (static_cast<std::int64_t>(accum[p].size()) != tensor.numel())
      throw std::runtime_error("rmsprop: accumulator shape drift for " + registry[p].first);
    auto grad = tensor.grad_mut();  // zeros when the parameter was untouched
    auto data = tensor.data();
    auto& v = accum[p];
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T g = grad[i];
      v[i] = alpha * v[i] + (T(1) - alpha) * g * g;
      data[i] -= lr * g / (std::sqrt(v[i]) + eps);
    }
  }
}

template struct RmsPropState<float>;
template struct RmsPropState<double>;

// ---------------------------------------------------------------------------
// Data preparation

std::vector<TrainingClip> prepare_clips(const DatasetManifest& manifest, const TrainConfig& cfg) {
  if (manifest.entries.empty()) throw std::invalid_argument("pretrain: empty manifest");
  const bool want_visual = cfg.modality != Modality::audio_only;
  const bool want_audio = cfg.modality != Modality::visual_only;

  std::vector<TrainingClip> clips;
  for (const auto& entry : manifest.entries) {
    FeatureVectorSequence visual, audio;
    if (want_visual) {
      if (entry.visual_path.empty()) throw DataError("entry " + entry.id + ": no visual file");
      visual = load_fvs(entry.visual_path);
      if (visual.d != cfg.d_v)
        throw DataError("entry " + entry.id + ": visual width " + std::to_string(visual.d) +
                        " does not match configured d_v " + std::to_string(cfg.d_v));
    }
    if (want_audio) {
      if (entry.audio_path.empty()) throw DataError("entry " + entry.id + ": unpaired, no audio file");
      audio = load_fvs(entry.audio_path);
      if (audio.d != cfg.d_a)
        throw DataError("entry " + entry.id + ": audio width " + std::to_string(audio.d) +
                        " does not match configured d_a " + std::to_string(cfg.d_a));
      if (want_visual && audio.n > visual.n) audio = pool_audio_temporal(audio, visual.n);
      if (want_visual && audio.n != visual.n)
        throw DataError("entry " + entry.id + ": audio has fewer timesteps than visual");
      if (audio.d != cfg.model_dim()) audio = resample_vector_length(audio, cfg.model_dim());
    }

    auto visual_windows = want_visual ? window_clip(visual, cfg.window) : std::vector<FvsWindow>{};
    auto audio_windows = want_audio ? window_clip(audio, cfg.window) : std::vector<FvsWindow>{};
    const std::size_t count = want_visual ? visual_windows.size() : audio_windows.size();
    if (want_visual && want_audio && visual_windows.size() != audio_windows.size())
      throw DataError("entry " + entry.id + ": window counts diverge across modalities");

    for (std::size_t w = 0; w < count; ++w) {
      TrainingClip clip;
      clip.video_id = entry.id;
      clip.window_index = static_cast<std::int64_t>(w);
      clip.window_len = cfg.window;
      clip.dim = cfg.model_dim();
      if (want_visual) clip.visual = std::move(visual_windows[w].data);
      if (want_audio) clip.audio = std::move(audio_windows[w].data);
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// SplitMix64 over (seed, step) so every step draws from an independent,
// stateless stream; resuming needs no generator state.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (step + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ClipLosses {
  LossTerms<float> terms;
  Tensor<float> rep_v, rep_a;  // main-pass representations for pooled SCL
};

ClipLosses clip_losses(const TrainingClip& clip, const ModelState<float>& model,
                       std::uint64_t mask_seed, bool defer_scl) {
  const TrainConfig& cfg = model.cfg;
  ClipLosses out;
  const Shape fvs_shape{clip.window_len, clip.dim};
  BitMask mask;
  if (cfg.use_auxiliary) mask = generate_mask(clip.window_len, cfg.mask_ratio, mask_seed);

  Tensor<float> visual_in, audio_in;
  if (model.visual) {
    visual_in = Tensor<float>::from(fvs_shape, clip.visual);
    auto fwd = branch_forward(visual_in, visual_in, *model.visual, cfg);
    out.terms.recon_v = fwd.recon_loss;
    out.terms.kpoint_v = fwd.activation_loss;
    out.rep_v = fwd.rep;
    if (cfg.use_auxiliary)
      out.terms.aux_v = masked_auxiliary_loss(visual_in, mask, *model.visual, cfg);
  }
  if (model.audio) {
    audio_in = Tensor<float>::from(fvs_shape, clip.audio);
    auto fwd = branch_forward(audio_in, audio_in, *model.audio, cfg);
    out.terms.recon_a = fwd.recon_loss;
    out.terms.kpoint_a = fwd.activation_loss;
    out.rep_a = fwd.rep;
    if (cfg.use_auxiliary)
      out.terms.aux_a = masked_auxiliary_loss(audio_in, mask, *model.audio, cfg);
  }
  if (model.temperature && !defer_scl) {
    Tensor<float> ra = out.rep_a, rv = out.rep_v;
    if (cfg.scl_variant == SclVariant::clip_infonce) {
      ra = l2_normalize_rows(ra, 1e-12f);
      rv = l2_normalize_rows(rv, 1e-12f);
    }
    out.terms.scl = scl_loss(pairwise_similarity(ra, rv), *model.temperature, cfg.scl_variant);
  }
  return out;
}

float term_value(const Tensor<float>& t) { return t.defined() ? t.item() : 0.0f; }

TraceRow run_one_step(std::int64_t step, const std::vector<TrainingClip>& clips,
                      ModelState<float>& model, RmsPropState<float>& opt,
                      const std::vector<std::pair<std::string, Tensor<float>>>& registry) {
  const TrainConfig& cfg = model.cfg;
  std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
  std::vector<std::size_t> batch_indices(static_cast<std::size_t>(cfg.batch));
  for (auto& idx : batch_indices) idx = static_cast<std::size_t>(rng() % clips.size());
  std::vector<std::uint64_t> mask_seeds(static_cast<std::size_t>(cfg.batch));
  for (auto& s : mask_seeds) s = rng();

  for (const auto& [name, tensor] : registry) const_cast<Tensor<float>&>(tensor).zero_grad();

  TraceRow row;
  row.step = step;
  const float inv_batch = 1.0f / static_cast<float>(cfg.batch);

  if (!cfg.scl_pool_batch) {
    for (std::size_t b = 0; b < batch_indices.size(); ++b) {
      Graph<float> graph;
      ClipLosses losses = clip_losses(clips[batch_indices[b]], model, mask_seeds[b], false);
      Tensor<float> total = scalar_mul(total_loss(losses.terms), inv_batch);
      row.total += total.item();
      row.recon_v += inv_batch * term_value(losses.terms.recon_v);
      row.kpoint_v += inv_batch * term_value(losses.terms.kpoint_v);
      row.aux_v += inv_batch * term_value(losses.terms.aux_v);
      row.recon_a += inv_batch * term_value(losses.terms.recon_a);
      row.kpoint_a += inv_batch * term_value(losses.terms.kpoint_a);
      row.aux_a += inv_batch * term_value(losses.terms.aux_a);
      row.scl += inv_batch * term_value(losses.terms.scl);
      graph.backward(total);
    }
  } else {
    // Pooled variant: per-clip reconstruction terms averaged, one contrastive
    // term over the batch-stacked representation pairs.
    Graph<float> graph;
    std::vector<Tensor<float>> reps_a, reps_v;
    Tensor<float> batch_sum;
    for (std::size_t b = 0; b < batch_indices.size(); ++b) {
      ClipLosses losses = clip_losses(clips[batch_indices[b]], model, mask_seeds[b], true);
      Tensor<float> clip_total = scalar_mul(total_loss(losses.terms), inv_batch);
      batch_sum = batch_sum.defined() ? add(batch_sum, clip_total) : clip_total;
      row.recon_v += inv_batch * term_value(losses.terms.recon_v);
      row.kpoint_v += inv_batch * term_value(losses.terms.kpoint_v);
      row.aux_v += inv_batch * term_value(losses.terms.aux_v);
      row.recon_a += inv_batch * term_value(losses.terms.recon_a);
      row.kpoint_a += inv_batch * term_value(losses.terms.kpoint_a);
      row.aux_a += inv_batch * term_value(losses.terms.aux_a);
      if (losses.rep_a.defined()) reps_a.push_back(losses.rep_a);
      if (losses.rep_v.defined()) reps_v.push_back(losses.rep_v);
    }
    if (model.temperature) {
      Tensor<float> ra = concat_rows(reps_a), rv = concat_rows(reps_v);
      if (cfg.scl_variant == SclVariant::clip_infonce) {
        ra = l2_normalize_rows(ra, 1e-12f);
        rv = l2_normalize_rows(rv, 1e-12f);
      }
      Tensor<float> scl = scl_loss(pairwise_similarity(ra, rv), *model.temperature, cfg.scl_variant);
      row.scl = scl.item();
      batch_sum = add(batch_sum, scl);
    }
    row.total = batch_sum.item();
    graph.backward(batch_sum);
  }

  opt.step(registry);
  return row;
}

bool should_stop_early(const std::vector<TraceRow>& trace) {
  constexpr std::size_t kWindow = 200;
  if (trace.size() < 2 * kWindow || trace.size() % kWindow != 0) return false;
  double prev = 0, cur = 0;
  for (std::size_t i = trace.size() - 2 * kWindow; i < trace.size() - kWindow; ++i)
    prev += trace[i].total;
  for (std::size_t i = trace.size() - kWindow; i < trace.size(); ++i) cur += trace[i].total;
  prev /= kWindow;
  cur /= kWindow;
  return prev > 0 && (prev - cur) / prev < 1e-3;
}

PretrainResult run_pretrain(ModelState<float> model, RmsPropState<float> opt,
                            std::int64_t start_step, const DatasetManifest& manifest,
                            const std::function<void(const TraceRow&)>& on_step) {
  const TrainConfig& cfg = model.cfg;
  auto clips = prepare_clips(manifest, cfg);
  auto registry = model.registry();
  PretrainResult result{std::move(model), std::move(opt), {}, start_step};
  for (std::int64_t step = start_step; step < cfg.steps; ++step) {
    TraceRow row = run_one_step(step, clips, result.model, result.optimizer, registry);
    result.trace.push_back(row);
    result.next_step = step + 1;
    if (on_step) on_step(row);
    if (cfg.early_stop && should_stop_early(result.trace)) break;
  }
  return result;
}

}  // namespace

PretrainResult pretrain(const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::function<void(const TraceRow&)>& on_step) {
  auto model = ModelState<float>::init(cfg);
  auto opt = RmsPropState<float>::init(model.registry(), cfg);
  return run_pretrain(std::move(model), std::move(opt), 0, manifest, on_step);
}

PretrainResult pretrain_resume(ModelState<float> model, RmsPropState<float> optimizer,
                               std::int64_t start_step, const DatasetManifest& manifest,
                               const std::function<void(const TraceRow&)>& on_step) {
  return run_pretrain(std::move(model), std::move(optimizer), start_step, manifest, on_step);
}

std::string trace_csv_header() {
  return "step,total,recon_v,kpoint_v,aux_v,recon_a,kpoint_a,aux_a,scl";
}

std::string trace_csv_row(const TraceRow& row) {
  std::ostringstream out;
  out.precision(9);
  out << row.step << ',' << row.total << ',' << row.recon_v << ',' << row.kpoint_v << ','
      << row.aux_v << ',' << row.recon_a << ',' << row.kpoint_a << ',' << row.aux_a << ','
      << row.scl;
  return out.str();
}

}  // namespace vhd

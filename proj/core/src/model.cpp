#include "vhd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace vhd {

template <typename T>
BranchParams<T> BranchParams<T>::init(const TrainConfig& cfg, std::mt19937_64& rng) {
  BranchParams<T> p;
  const std::int64_t d = cfg.model_dim();
  if (cfg.use_sa) p.sa = SelfAttentionParams<T>::init(d, rng);
  p.autoencoder = AutoencoderParams<T>::init(d, cfg.hidden1, cfg.hidden2, cfg.channels,
                                             cfg.kernel, rng);
  if (cfg.rasl_mode != RaslMode::off)
    p.rasl = RaslParams<T>::init(cfg.channels, cfg.rasl_channels, cfg.proj_dim, cfg.k, rng);
  return p;
}

template <typename T>
ModelState<T> ModelState<T>::init(const TrainConfig& cfg) {
  cfg.validate();
  ModelState<T> m;
  m.cfg = cfg;
  std::mt19937_64 rng(cfg.seed);
  if (cfg.modality != Modality::audio_only) m.visual = BranchParams<T>::init(cfg, rng);
  if (cfg.modality != Modality::visual_only) m.audio = BranchParams<T>::init(cfg, rng);
  if (cfg.modality == Modality::both)
    m.temperature = TemperatureParam<T>::init(static_cast<T>(cfg.gamma0));
  return m;
}

namespace {

template <typename T>
void register_branch(const std::string& prefix, const BranchParams<T>& b,
                     std::vector<std::pair<std::string, Tensor<T>>>& out) {
  if (b.sa) {
    out.emplace_back(prefix + ".sa.query", b.sa->query);
    out.emplace_back(prefix + ".sa.key", b.sa->key);
    out.emplace_back(prefix + ".sa.value", b.sa->value);
    out.emplace_back(prefix + ".sa.out", b.sa->out);
  }
  for (int i = 0; i < 3; ++i) {
    const std::string base = prefix + ".encoder" + std::to_string(i);
    out.emplace_back(base + ".kernels", b.autoencoder.encoder[static_cast<std::size_t>(i)].kernels);
    out.emplace_back(base + ".bias", b.autoencoder.encoder[static_cast<std::size_t>(i)].bias);
  }
  for (int i = 0; i < 3; ++i) {
    const std::string base = prefix + ".decoder" + std::to_string(i);
    out.emplace_back(base + ".kernels", b.autoencoder.decoder[static_cast<std::size_t>(i)].kernels);
    out.emplace_back(base + ".bias", b.autoencoder.decoder[static_cast<std::size_t>(i)].bias);
  }
  if (b.rasl) {
    out.emplace_back(prefix + ".rasl.pointwise.kernels", b.rasl->pointwise.kernels);
    out.emplace_back(prefix + ".rasl.pointwise.bias", b.rasl->pointwise.bias);
    out.emplace_back(prefix + ".rasl.channel_weights", b.rasl->channel_weights);
    out.emplace_back(prefix + ".rasl.proj_top", b.rasl->proj_top);
    out.emplace_back(prefix + ".rasl.proj_bottom", b.rasl->proj_bottom);
    out.emplace_back(prefix + ".rasl.norm_gain", b.rasl->norm_gain);
    out.emplace_back(prefix + ".rasl.norm_bias", b.rasl->norm_bias);
  }
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> ModelState<T>::registry() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  if (visual) register_branch("visual", *visual, out);
  if (audio) register_branch("audio", *audio, out);
  if (temperature) out.emplace_back("temperature.log_gamma", temperature->log_value);
  return out;
}

template <typename T>
const BranchParams<T>& ModelState<T>::scoring_branch() const {
  if (visual) return *visual;
  if (audio) return *audio;
  throw std::runtime_error("model has no branches");
}

std::int64_t effective_k(std::int64_t configured_k, std::int64_t rep_len) {
  return std::max<std::int64_t>(1, std::min(configured_k, rep_len / 2));
}

template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& target, const Tensor<T>& recon) {
  if (target.shape() != recon.shape())
    throw std::invalid_argument("reconstruction_loss: shape mismatch " + shape_str(target.shape()) +
                                " vs " + shape_str(recon.shape()));
  return reduce_mean(vhd::abs(sub(target, recon)));
}

template <typename T>
BranchOutputs<T> branch_forward(const Tensor<T>& input, const Tensor<T>& target,
                                const BranchParams<T>& params, const TrainConfig& cfg) {
  BranchOutputs<T> out;
  Tensor<T> attended = (cfg.use_sa && params.sa) ? self_attention(input, *params.sa) : input;
  out.rep = encode(attended, params.autoencoder);
  const std::int64_t rep_len = out.rep.shape()[0];

  Tensor<T> weighted;
  if (cfg.rasl_mode != RaslMode::off && params.rasl) {
    auto acts = compute_activations(out.rep, *params.rasl);
    out.processed = acts.processed;
    out.activations = acts.activations;
    const std::int64_t k = effective_k(params.rasl->k, rep_len);
    out.top = select_topk<T>(out.activations.data(), k);
    out.bottom = select_bottomk<T>(out.activations.data(), k);
    out.activation_loss =
        cfg.rasl_mode == RaslMode::kpoint
            ? kpoint_contrastive_loss(out.activations, out.processed, out.top, out.bottom, *params.rasl)
            : mean_topk_loss(out.activations, out.top);
    weighted = weight_representations(out.activations, out.rep);
  } else {
    out.activations = Tensor<T>::constant({rep_len}, T(1));
    weighted = out.rep;
  }

  out.recon = decode(weighted, params.autoencoder, input.shape()[0]);
  out.recon_loss = reconstruction_loss(target, out.recon);
  return out;
}

template <typename T>
Tensor<T> apply_mask_rows(const Tensor<T>& fvs, const BitMask& mask) {
  if (fvs.rank() != 2 || fvs.shape()[0] != mask.size())
    throw std::invalid_argument("apply_mask_rows: mask length " + std::to_string(mask.size()) +
                                " does not match " + shape_str(fvs.shape()));
  std::vector<T> keep(static_cast<std::size_t>(mask.size()));
  for (std::int64_t i = 0; i < mask.size(); ++i)
    keep[static_cast<std::size_t>(i)] = mask.masked(i) ? T(0) : T(1);
  return scale_rows(fvs, Tensor<T>::from({mask.size()}, std::move(keep)));
}

template <typename T>
Tensor<T> masked_auxiliary_loss(const Tensor<T>& fvs, const BitMask& mask,
                                const BranchParams<T>& params, const TrainConfig& cfg) {
  if (mask.count() == mask.size())
    throw std::invalid_argument("masked_auxiliary_loss: every row is masked");
  Tensor<T> masked = apply_mask_rows(fvs, mask);
  return branch_forward(masked, fvs, params, cfg).recon_loss;
}

template <typename T>
Tensor<T> total_loss(const LossTerms<T>& terms) {
  const std::pair<const char*, const Tensor<T>*> ordered[] = {
      {"recon_v", &terms.recon_v}, {"kpoint_v", &terms.kpoint_v}, {"aux_v", &terms.aux_v},
      {"recon_a", &terms.recon_a}, {"kpoint_a", &terms.kpoint_a}, {"aux_a", &terms.aux_a},
      {"scl", &terms.scl},
  };
  Tensor<T> sum;
  for (const auto& [name, t] : ordered) {
    if (!t->defined()) continue;
    if (!std::isfinite(static_cast<double>(t->item())))
      throw std::domain_error(std::string("total_loss: non-finite term ") + name);
    sum = sum.defined() ? add(sum, *t) : *t;
  }
  if (!sum.defined()) throw std::invalid_argument("total_loss: no loss terms");
  return sum;
}

template <typename T>
EncodeScores<T> encode_with_activations(const Tensor<T>& window, const BranchParams<T>& params,
                                        const TrainConfig& cfg) {
  EncodeScores<T> out;
  Tensor<T> attended = (cfg.use_sa && params.sa) ? self_attention(window, *params.sa) : window;
  out.rep = encode(attended, params.autoencoder);
  if (cfg.rasl_mode != RaslMode::off && params.rasl)
    out.activations = compute_activations(out.rep, *params.rasl).activations;
  else
    out.activations = Tensor<T>::constant({out.rep.shape()[0]}, T(1));
  return out;
}

namespace {

// Multiply-adds for one branch forward at window length n.
std::int64_t branch_macs(const TrainConfig& cfg, std::int64_t n) {
  const std::int64_t d = cfg.model_dim();
  const auto lens = encoder_lengths(n);
  std::int64_t macs = 0;
  if (cfg.use_sa) macs += 4 * n * d * d + 2 * n * n * d;
  const std::int64_t enc_widths[4] = {d, cfg.hidden1, cfg.hidden2, cfg.channels};
  for (int i = 0; i < 3; ++i)
    macs += enc_widths[i + 1] * enc_widths[i] * cfg.kernel * lens[static_cast<std::size_t>(i + 1)];
  if (cfg.rasl_mode != RaslMode::off) {
    const std::int64_t rep_len = lens[3];
    macs += rep_len * cfg.channels * cfg.rasl_channels;  // pointwise conv
    macs += rep_len * cfg.rasl_channels;                 // channel weighting
    macs += 2 * effective_k(cfg.k, rep_len) * cfg.proj_dim * cfg.rasl_channels;
  }
  for (int i = 0; i < 3; ++i)  // transposed convs, mirrored widths
    macs += enc_widths[3 - i] * enc_widths[2 - i] * cfg.kernel * lens[static_cast<std::size_t>(3 - i)];
  return macs;
}

}  // namespace

template <typename T>
ModelStats count_params_flops(const ModelState<T>& model, std::int64_t n) {
  ModelStats stats;
  for (const auto& [name, tensor] : model.registry()) stats.parameters += tensor.numel();
  stats.branch_forward_macs = branch_macs(model.cfg, n);
  const int branches = (model.visual ? 1 : 0) + (model.audio ? 1 : 0);
  const int passes = model.cfg.use_auxiliary ? 2 : 1;  // main + masked
  stats.pretrain_clip_macs = branches * passes * stats.branch_forward_macs;
  if (model.temperature) {
    const std::int64_t rep_len = encoder_lengths(n)[3];
    stats.pretrain_clip_macs += rep_len * rep_len * model.cfg.channels;  // similarity matrix
  }
  return stats;
}

#define VHD_INSTANTIATE_MODEL(T)                                                             \
  template struct BranchParams<T>;                                                           \
  template struct ModelState<T>;                                                             \
  template Tensor<T> reconstruction_loss(const Tensor<T>&, const Tensor<T>&);                \
  template BranchOutputs<T> branch_forward(const Tensor<T>&, const Tensor<T>&,               \
                                           const BranchParams<T>&, const TrainConfig&);      \
  template Tensor<T> apply_mask_rows(const Tensor<T>&, const BitMask&);                      \
  template Tensor<T> masked_auxiliary_loss(const Tensor<T>&, const BitMask&,                 \
                                           const BranchParams<T>&, const TrainConfig&);      \
  template Tensor<T> total_loss(const LossTerms<T>&);                                        \
  template EncodeScores<T> encode_with_activations(const Tensor<T>&, const BranchParams<T>&, \
                                                   const TrainConfig&);                      \
  template ModelStats count_params_flops(const ModelState<T>&, std::int64_t);

VHD_INSTANTIATE_MODEL(float)
VHD_INSTANTIATE_MODEL(double)

#undef VHD_INSTANTIATE_MODEL

}  // namespace vhd

#include "vhd/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vhd/gradcheck.hpp"
#include "vhd/synth.hpp"

using namespace vhd;

namespace {

using F = Tensor<float>;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("vhd_trainer_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Small architecture + tiny dataset for fast loop tests.
TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.d_v = 12;
  cfg.d_a = 12;
  cfg.hidden1 = 8;
  cfg.hidden2 = 8;
  cfg.channels = 8;
  cfg.rasl_channels = 8;
  cfg.proj_dim = 8;
  cfg.window = 24;
  cfg.k = 3;
  cfg.batch = 2;
  cfg.steps = 6;
  cfg.seed = 5;
  return cfg;
}

SynthSpec tiny_synth(std::uint64_t seed) {
  SynthSpec spec;
  spec.videos = 3;
  spec.min_timesteps = 40;
  spec.max_timesteps = 70;
  spec.d_v = 12;
  spec.d_a = 12;
  spec.latent_dim = 8;
  spec.min_segment = 6;
  spec.max_segment = 10;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(ReconstructionLoss, SpecExamples) {
  auto x = F::from({1, 2}, {1.0f, 2.0f});
  EXPECT_FLOAT_EQ(reconstruction_loss(x, x).item(), 0.0f);

  auto shifted = F::from({1, 2}, {1.5f, 2.5f});
  EXPECT_FLOAT_EQ(reconstruction_loss(x, shifted).item(), 0.5f);

  auto other = F::from({1, 2}, {0.0f, 4.0f});
  EXPECT_FLOAT_EQ(reconstruction_loss(x, other).item(), 1.5f);

  EXPECT_THROW(reconstruction_loss(x, F::zeros({2, 2})), std::invalid_argument);
}

TEST(BranchForward, DegenerateNetworkReconstructsBias) {
  TrainConfig cfg = tiny_config();
  auto model = ModelState<float>::init(cfg);
  auto& branch = *model.visual;
  for (auto& [name, tensor] : model.registry())
    std::fill(tensor.data().begin(), tensor.data().end(), 0.0f);
  branch.autoencoder.decoder[2].bias = F::from({12}, std::vector<float>(12, 0.25f), true);

  auto input = F::uniform({static_cast<std::int64_t>(cfg.window), 12}, -1.0f, 1.0f, 1);
  auto out = branch_forward(input, input, branch, cfg);
  for (std::int64_t t = 0; t < cfg.window; ++t)
    for (std::int64_t j = 0; j < 12; ++j) EXPECT_FLOAT_EQ(out.recon.at(t, j), 0.25f);

  // L_e = mean |x - 0.25| is computable in closed form.
  double expect = 0;
  for (float v : input.data()) expect += std::abs(v - 0.25f);
  expect /= static_cast<double>(input.numel());
  EXPECT_NEAR(out.recon_loss.item(), expect, 1e-6);
}

TEST(BranchForward, DeterministicGivenSeed) {
  TrainConfig cfg = tiny_config();
  auto run = [&] {
    auto model = ModelState<float>::init(cfg);
    auto input = F::uniform({cfg.window, 12}, -1.0f, 1.0f, 7);
    auto out = branch_forward(input, input, *model.visual, cfg);
    return std::make_pair(out.recon_loss.item(), out.activation_loss.item());
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(BranchForward, EffectiveKRespectsRepresentationLength) {
  // window 24 -> rep length 3; configured k=3 must clamp to 1 so the top and
  // bottom sets cannot be forced to overlap.
  TrainConfig cfg = tiny_config();
  auto model = ModelState<float>::init(cfg);
  auto input = F::uniform({cfg.window, 12}, -1.0f, 1.0f, 9);
  auto out = branch_forward(input, input, *model.visual, cfg);
  EXPECT_EQ(encoder_lengths(cfg.window)[3], 3);
  EXPECT_EQ(out.top.size(), 1u);
  EXPECT_EQ(out.bottom.size(), 1u);
  EXPECT_NE(out.top[0], out.bottom[0]);
}

TEST(MaskedAuxiliary, MaskSemantics) {
  TrainConfig cfg = tiny_config();
  auto input = F::uniform({10, 12}, -1.0f, 1.0f, 11);
  BitMask mask;
  mask.bits = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  auto masked = apply_mask_rows(input, mask);
  for (std::int64_t t = 0; t < 10; ++t)
    for (std::int64_t j = 0; j < 12; ++j) {
      if (mask.masked(t))
        EXPECT_EQ(masked.at(t, j), 0.0f);
      else
        EXPECT_EQ(masked.at(t, j), input.at(t, j));  // bit-identical
    }

  BitMask all;
  all.bits.assign(10, 1);
  auto model = ModelState<float>::init(cfg);
  EXPECT_THROW(masked_auxiliary_loss(input, all, *model.visual, cfg), std::invalid_argument);
}

TEST(MaskedAuxiliary, EmptyMaskEqualsPlainReconstructionExactly) {
  TrainConfig cfg = tiny_config();
  auto model = ModelState<float>::init(cfg);
  auto input = F::uniform({cfg.window, 12}, -1.0f, 1.0f, 13);
  auto mask = generate_mask(cfg.window, 0.0, 1);
  const float aux = masked_auxiliary_loss(input, mask, *model.visual, cfg).item();
  const float plain = branch_forward(input, input, *model.visual, cfg).recon_loss.item();
  EXPECT_EQ(aux, plain);  // identical op sequence, bitwise equal
}

TEST(MaskedAuxiliary, HalfMaskZeroesExactlyHalf) {
  auto mask = generate_mask(150, 0.5, 17);
  EXPECT_EQ(mask.count(), 75);
}

TEST(TotalLoss, FixedOrderAndFlags) {
  LossTerms<float> terms;
  terms.recon_v = F::scalar(1.0f);
  terms.kpoint_v = F::scalar(2.0f);
  terms.aux_v = F::scalar(3.0f);
  terms.recon_a = F::scalar(4.0f);
  terms.kpoint_a = F::scalar(5.0f);
  terms.aux_a = F::scalar(6.0f);
  terms.scl = F::scalar(7.0f);
  EXPECT_FLOAT_EQ(total_loss(terms).item(), 28.0f);

  // Exact float addition order: ((((((v_e + v_r) + v_au) + a_e) + a_r) + a_au) + s)
  const float expect = ((((((1.0f + 2.0f) + 3.0f) + 4.0f) + 5.0f) + 6.0f) + 7.0f);
  EXPECT_EQ(total_loss(terms).item(), expect);

  // Dropping the auxiliary terms removes them exactly.
  LossTerms<float> no_aux = terms;
  no_aux.aux_v = F();
  no_aux.aux_a = F();
  EXPECT_FLOAT_EQ(total_loss(no_aux).item(), 19.0f);

  LossTerms<float> zeros;
  zeros.recon_v = F::scalar(0.0f);
  zeros.scl = F::scalar(0.0f);
  EXPECT_FLOAT_EQ(total_loss(zeros).item(), 0.0f);

  LossTerms<float> bad = terms;
  bad.kpoint_a = F::scalar(std::numeric_limits<float>::quiet_NaN());
  try {
    total_loss(bad);
    FAIL() << "non-finite term must be rejected";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("kpoint_a"), std::string::npos);
  }
}

TEST(RmsProp, HandComputedStep) {
  TrainConfig cfg;
  cfg.lr = 0.001;
  cfg.rms_alpha = 0.9;
  cfg.rms_eps = 1e-8;
  auto theta = F::scalar(1.0f, true);
  std::vector<std::pair<std::string, Tensor<float>>> registry{{"theta", theta}};
  auto opt = RmsPropState<float>::init(registry, cfg);
  theta.grad_mut()[0] = 1.0f;
  opt.step(registry);
  EXPECT_NEAR(opt.accum[0][0], 0.1f, 1e-7);
  EXPECT_NEAR(theta.item(), 0.9968377f, 1e-6);
}

TEST(RmsProp, ZeroGradientIsFixedPointOfParameters) {
  TrainConfig cfg;
  auto theta = F::from({3}, {1.0f, -2.0f, 0.5f}, true);
  std::vector<std::pair<std::string, Tensor<float>>> registry{{"theta", theta}};
  auto opt = RmsPropState<float>::init(registry, cfg);
  opt.accum[0] = {0.4f, 0.1f, 0.0f};
  theta.zero_grad();
  opt.step(registry);
  EXPECT_FLOAT_EQ(theta.data()[0], 1.0f);
  EXPECT_FLOAT_EQ(theta.data()[1], -2.0f);
  EXPECT_FLOAT_EQ(theta.data()[2], 0.5f);
  EXPECT_NEAR(opt.accum[0][0], 0.36f, 1e-7);  // decayed by alpha
}

TEST(Pretrain, DeterministicTraceAndResume) {
  TempDir dir;
  auto manifest = synth_generate(tiny_synth(31), dir.file("data"));
  TrainConfig cfg = tiny_config();
  cfg.steps = 8;

  auto full_a = pretrain(manifest, cfg);
  auto full_b = pretrain(manifest, cfg);
  ASSERT_EQ(full_a.trace.size(), 8u);
  for (std::size_t i = 0; i < full_a.trace.size(); ++i) {
    EXPECT_EQ(full_a.trace[i].total, full_b.trace[i].total) << "step " << i;
    EXPECT_EQ(full_a.trace[i].recon_v, full_b.trace[i].recon_v);
    EXPECT_EQ(full_a.trace[i].scl, full_b.trace[i].scl);
  }

  // Interrupt at step 4, checkpoint, reload, resume: identical trace tail
  // and identical final parameters.
  TrainConfig half = cfg;
  half.steps = 4;
  auto first = pretrain(manifest, half);
  checkpoint_save(first.model, first.optimizer, first.next_step, dir.file("mid.ckpt"));
  auto loaded = checkpoint_load(dir.file("mid.ckpt"));
  EXPECT_EQ(loaded.step, 4);
  loaded.model.cfg.steps = 8;
  auto resumed = pretrain_resume(std::move(loaded.model), std::move(loaded.optimizer),
                                 loaded.step, manifest);
  ASSERT_EQ(resumed.trace.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(resumed.trace[i].total, full_a.trace[4 + i].total) << "resumed step " << i;
    EXPECT_EQ(resumed.trace[i].recon_a, full_a.trace[4 + i].recon_a);
  }
  auto ra = resumed.model.registry();
  auto fa = full_a.model.registry();
  ASSERT_EQ(ra.size(), fa.size());
  for (std::size_t p = 0; p < ra.size(); ++p) {
    auto x = ra[p].second.data();
    auto y = fa[p].second.data();
    for (std::size_t i = 0; i < x.size(); ++i)
      ASSERT_EQ(x[i], y[i]) << ra[p].first << "[" << i << "]";
  }
}

TEST(Pretrain, AblationConfigsTrainWithoutError) {
  TempDir dir;
  auto manifest = synth_generate(tiny_synth(37), dir.file("data"));
  for (auto mode : {RaslMode::off, RaslMode::mean_topk}) {
    TrainConfig cfg = tiny_config();
    cfg.steps = 2;
    cfg.rasl_mode = mode;
    auto result = pretrain(manifest, cfg);
    EXPECT_EQ(result.trace.size(), 2u);
    EXPECT_EQ(result.trace[0].kpoint_v, mode == RaslMode::off ? 0.0f : result.trace[0].kpoint_v);
    EXPECT_TRUE(std::isfinite(result.trace[1].total));
  }
  for (auto modality : {Modality::visual_only, Modality::audio_only}) {
    TrainConfig cfg = tiny_config();
    cfg.steps = 2;
    cfg.modality = modality;
    auto result = pretrain(manifest, cfg);
    EXPECT_TRUE(std::isfinite(result.trace[1].total));
    EXPECT_EQ(result.trace[1].scl, 0.0f);  // no cross-modal term
  }
  {
    TrainConfig cfg = tiny_config();
    cfg.steps = 2;
    cfg.use_sa = false;
    cfg.use_auxiliary = false;
    auto result = pretrain(manifest, cfg);
    EXPECT_EQ(result.trace[0].aux_v, 0.0f);
    EXPECT_TRUE(std::isfinite(result.trace[1].total));
  }
  {
    TrainConfig cfg = tiny_config();
    cfg.steps = 2;
    cfg.scl_pool_batch = true;
    auto result = pretrain(manifest, cfg);
    EXPECT_TRUE(std::isfinite(result.trace[1].total));
    EXPECT_NE(result.trace[1].scl, 0.0f);
  }
}

TEST(Pretrain, EmptyManifestRejected) {
  DatasetManifest empty;
  EXPECT_THROW(pretrain(empty, tiny_config()), std::invalid_argument);
}

TEST(Checkpoint, RoundTripBitwiseAndCorruption) {
  TempDir dir;
  TrainConfig cfg = tiny_config();
  auto model = ModelState<float>::init(cfg);
  auto opt = RmsPropState<float>::init(model.registry(), cfg);
  opt.accum[0][0] = 0.125f;
  const std::string path = dir.file("model.ckpt");
  checkpoint_save(model, opt, 17, path);

  auto loaded = checkpoint_load(path);
  EXPECT_EQ(loaded.step, 17);
  auto a = model.registry();
  auto b = loaded.model.registry();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a[p].first, b[p].first);
    auto x = a[p].second.data();
    auto y = b[p].second.data();
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(x[i], y[i]);
  }
  ASSERT_EQ(loaded.optimizer.accum.size(), opt.accum.size());
  EXPECT_EQ(loaded.optimizer.accum[0][0], 0.125f);

  // Flipped magic byte -> clean format error.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes[3] ^= 0x01;
    std::ofstream out(dir.file("bad.ckpt"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(checkpoint_load(dir.file("bad.ckpt")), DataError);

  // Truncation -> clean error.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() / 2);
    std::ofstream out(dir.file("trunc.ckpt"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(checkpoint_load(dir.file("trunc.ckpt")), DataError);
}

TEST(CountParams, HandTallyOnToyConfig) {
  TrainConfig cfg = tiny_config();
  auto model = ModelState<float>::init(cfg);
  // Hand tally: per branch, SA 4*d^2; encoder convs 8*12*3+8, 8*8*3+8,
  // 8*8*3+8; decoder mirrors; pointwise 8*8+8; weights 8; projections 2*64;
  // norm affine 2*8; temperature 1.
  const std::int64_t d = 12;
  const std::int64_t sa = 4 * d * d;
  const std::int64_t enc = (8 * 12 * 3 + 8) + (8 * 8 * 3 + 8) + (8 * 8 * 3 + 8);
  const std::int64_t dec = (8 * 8 * 3 + 8) + (8 * 8 * 3 + 8) + (8 * 12 * 3 + 12);
  const std::int64_t rasl = (8 * 8 * 1 + 8) + 8 + 2 * (8 * 8) + 2 * 8;
  const std::int64_t branch = sa + enc + dec + rasl;
  auto stats = count_params_flops(model, cfg.window);
  EXPECT_EQ(stats.parameters, 2 * branch + 1);
}

TEST(CountParams, ConvParamsScaleRoughlyQuadratically) {
  TrainConfig narrow = tiny_config();
  narrow.use_sa = false;
  narrow.rasl_mode = RaslMode::off;
  TrainConfig wide = narrow;
  wide.hidden1 *= 2;
  wide.hidden2 *= 2;
  wide.channels *= 2;
  auto a = count_params_flops(ModelState<float>::init(narrow), narrow.window);
  auto b = count_params_flops(ModelState<float>::init(wide), wide.window);
  const double ratio = static_cast<double>(b.parameters) / static_cast<double>(a.parameters);
  EXPECT_GT(ratio, 2.9);
  EXPECT_LT(ratio, 4.1);
}

TEST(GradCheck, FullTotalLossOnToyBatch) {
  // Gradient of L_total w.r.t. every registered parameter, f64, 1e-6.
  TrainConfig cfg;
  cfg.d_v = 6;
  cfg.d_a = 6;
  cfg.hidden1 = 5;
  cfg.hidden2 = 5;
  cfg.channels = 5;
  cfg.rasl_channels = 5;
  cfg.proj_dim = 5;
  cfg.window = 16;
  cfg.k = 2;
  cfg.seed = 3;
  cfg.validate();

  auto model = ModelState<double>::init(cfg);
  auto visual = Tensor<double>::uniform({cfg.window, 6}, -1.0, 1.0, 41);
  auto audio = Tensor<double>::uniform({cfg.window, 6}, -1.0, 1.0, 42);
  auto mask = generate_mask(cfg.window, 0.5, 43);

  std::vector<Tensor<double>> params;
  for (auto& [name, tensor] : model.registry()) params.push_back(tensor);

  auto loss_fn = [&] {
    LossTerms<double> terms;
    auto v = branch_forward(visual, visual, *model.visual, cfg);
    terms.recon_v = v.recon_loss;
    terms.kpoint_v = v.activation_loss;
    terms.aux_v = masked_auxiliary_loss(visual, mask, *model.visual, cfg);
    auto a = branch_forward(audio, audio, *model.audio, cfg);
    terms.recon_a = a.recon_loss;
    terms.kpoint_a = a.activation_loss;
    terms.aux_a = masked_auxiliary_loss(audio, mask, *model.audio, cfg);
    auto na = l2_normalize_rows(a.rep, 1e-12);
    auto nv = l2_normalize_rows(v.rep, 1e-12);
    terms.scl = scl_loss(pairwise_similarity(na, nv), *model.temperature, cfg.scl_variant);
    return total_loss(terms);
  };
  // probe step 3e-5 balances roundoff against truncation at f64
  const double err = grad_check<double>(loss_fn, params, 3e-5);
  EXPECT_LT(err, 1e-6);
}

// Command-line front end: synthetic dataset generation, pretraining,
// visual-only inference, evaluation, the window-MSE distinctiveness
// analyzer, and the ablation runner.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "vhd/config.hpp"
#include "vhd/metrics.hpp"
#include "vhd/pipeline.hpp"
#include "vhd/synth.hpp"
#include "vhd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

vhd::TrainConfig resolve_config(const GlobalOptions& g) {
  vhd::TrainConfig cfg;
  if (!g.config_path.empty()) cfg = vhd::load_config_file(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

// Ordered parallel map over video indices; results land in their slot, so
// the merged output is independent of the thread count.
void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// --- gen-synth ---------------------------------------------------------

int run_gen_synth(const GlobalOptions& g, const vhd::SynthSpec& spec) {
  ensure_dir(g.out_dir);
  auto manifest = vhd::synth_generate(spec, g.out_dir);
  std::cout << "wrote " << manifest.entries.size() << " videos to " << g.out_dir << "\n";
  return 0;
}

// --- pretrain ----------------------------------------------------------

int run_pretrain(const GlobalOptions& g, const std::string& manifest_path,
                 const std::string& resume_path, std::int64_t steps_override,
                 bool quiet) {
  ensure_dir(g.out_dir);
  auto manifest = vhd::load_manifest(manifest_path);

  vhd::PretrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  auto progress = [&](const vhd::TraceRow& row) {
    if (quiet || row.step % 100 != 0) return;
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "step " << row.step << "  total " << row.total << "  recon_v " << row.recon_v
              << "  (" << dt << "s)\n";
  };

  if (!resume_path.empty()) {
    auto ckpt = vhd::checkpoint_load(resume_path);
    if (steps_override >= 0) ckpt.model.cfg.steps = steps_override;
    if (g.seed_set) throw std::invalid_argument("--seed cannot override a resumed checkpoint");
    result = vhd::pretrain_resume(std::move(ckpt.model), std::move(ckpt.optimizer), ckpt.step,
                                  manifest, progress);
  } else {
    vhd::TrainConfig cfg = resolve_config(g);
    if (steps_override >= 0) cfg.steps = steps_override;
    result = vhd::pretrain(manifest, cfg, progress);
  }

  const std::string ckpt_path = (fs::path(g.out_dir) / "checkpoint.ckpt").string();
  vhd::checkpoint_save(result.model, result.optimizer, result.next_step, ckpt_path);

  const std::string trace_path = (fs::path(g.out_dir) / "loss_trace.csv").string();
  const bool append = !resume_path.empty() && fs::exists(trace_path);
  std::ofstream trace(trace_path, append ? std::ios::app : std::ios::trunc);
  if (!append) trace << vhd::trace_csv_header() << "\n";
  for (const auto& row : result.trace) trace << vhd::trace_csv_row(row) << "\n";

  std::cout << "checkpoint: " << ckpt_path << "\n";
  std::cout << "loss trace: " << trace_path << " (" << result.trace.size() << " steps)\n";
  const auto stats = vhd::count_params_flops(result.model, result.model.cfg.window);
  std::cout << "parameters: " << stats.parameters
            << "  branch-forward MACs/window: " << stats.branch_forward_macs
            << "  pretrain MACs/clip: " << stats.pretrain_clip_macs << "\n";
  std::cout << "(reference full-scale network: 8.53M parameters, 0.82G FLOPs)\n";
  return 0;
}

// --- infer -------------------------------------------------------------

int run_infer(const GlobalOptions& g, const std::string& ckpt_path, const std::string& fvs_path,
              float threshold, std::int64_t min_len, bool emit_svg) {
  ensure_dir(g.out_dir);
  auto ckpt = vhd::checkpoint_load(ckpt_path);
  auto fvs = vhd::load_fvs(fvs_path);
  vhd::InferOptions opts;
  opts.threshold = threshold;
  opts.min_segment_len = min_len;
  auto result = vhd::infer(fvs, ckpt.model, opts);

  const fs::path base = fs::path(g.out_dir) / result.id;
  vhd::write_scores_csv(result.scores, base.string() + "_scores.csv");
  json j;
  j["id"] = result.id;
  j["timesteps"] = result.scores.size();
  j["threshold"] = threshold;
  j["segments"] = json::array();
  for (const auto& seg : result.segments)
    j["segments"].push_back({{"start", seg.start}, {"end", seg.end}, {"peak", seg.peak}});
  std::ofstream(base.string() + "_result.json") << j.dump(2) << "\n";
  if (emit_svg) vhd::write_scores_svg(result.scores, threshold, base.string() + "_scores.svg");

  std::cout << result.id << ": " << result.scores.size() << " scores, " << result.segments.size()
            << " segments above " << threshold << "\n";
  return 0;
}

// --- eval --------------------------------------------------------------

std::string find_scores_file(const std::string& scores_dir, const std::string& id) {
  for (const char* suffix : {"_scores.csv", ".csv"}) {
    const fs::path p = fs::path(scores_dir) / (id + suffix);
    if (fs::exists(p)) return p.string();
  }
  throw vhd::DataError("no scores file for video '" + id + "' in " + scores_dir);
}

int run_eval(const GlobalOptions& g, const std::string& manifest_path,
             const std::string& scores_dir, const vhd::EvalOptions& opts,
             const std::string& report_path) {
  auto manifest = vhd::load_manifest(manifest_path);
  std::vector<vhd::ScoredVideo> videos;
  for (const auto& entry : manifest.entries) {
    if (entry.label_path.empty()) {
      std::cerr << "warning: skipping '" << entry.id << "' (no labels)\n";
      continue;
    }
    vhd::ScoredVideo sv;
    sv.id = entry.id;
    sv.scores = vhd::read_scores_csv(find_scores_file(scores_dir, entry.id));
    sv.labels = vhd::load_labels(entry.label_path);
    if (sv.scores.size() != sv.labels.size())
      throw vhd::DataError("video '" + entry.id + "': " + std::to_string(sv.scores.size()) +
                           " scores vs " + std::to_string(sv.labels.size()) + " labels");
    videos.push_back(std::move(sv));
  }
  auto report = vhd::map_and_topk(videos, opts);
  for (const auto& video : report.videos)
    if (!video.ap) std::cerr << "warning: video '" << video.id << "' has no positive labels\n";

  json j;
  j["map"] = report.map;
  j["top5_map"] = report.topk_map;
  j["evaluated"] = report.evaluated;
  j["skipped"] = report.skipped;
  j["segment_len"] = opts.segment_len;
  j["videos"] = json::array();
  for (const auto& video : report.videos) {
    json v;
    v["id"] = video.id;
    v["positives"] = video.positives;
    if (video.ap) v["ap"] = *video.ap;
    if (video.ap_topk) v["ap_top5"] = *video.ap_topk;
    j["videos"].push_back(std::move(v));
  }
  std::string out_path = report_path;
  if (out_path.empty()) {
    ensure_dir(g.out_dir);
    out_path = (fs::path(g.out_dir) / "eval_report.json").string();
  }
  std::ofstream(out_path) << j.dump(2) << "\n";
  std::cout.precision(4);
  std::cout << "mAP " << report.map << "  top-5 mAP " << report.topk_map << "  ("
            << report.evaluated << " evaluated, " << report.skipped << " skipped)\n";
  std::cout << "report: " << out_path << "\n";
  return 0;
}

// --- analyze -----------------------------------------------------------

int run_analyze(const GlobalOptions& g, const std::string& manifest_path,
                const std::string& fvs_path, const std::string& labels_path,
                double window_s, double threshold, double rate, const std::string& report_path) {
  struct Item {
    std::string id;
    vhd::DistinctivenessReport report;
  };
  std::vector<Item> items;
  if (!manifest_path.empty()) {
    auto manifest = vhd::load_manifest(manifest_path);
    for (const auto& entry : manifest.entries) {
      if (entry.label_path.empty()) {
        std::cerr << "warning: skipping '" << entry.id << "' (no labels)\n";
        continue;
      }
      auto fvs = vhd::load_fvs(entry.visual_path);
      auto labels = vhd::load_labels(entry.label_path);
      items.push_back({entry.id, vhd::distinctiveness_analysis(fvs, labels, window_s, threshold, rate)});
    }
  } else {
    auto fvs = vhd::load_fvs(fvs_path);
    auto labels = vhd::load_labels(labels_path);
    items.push_back({fvs.source_id, vhd::distinctiveness_analysis(fvs, labels, window_s, threshold, rate)});
  }
  if (items.empty()) throw vhd::DataError("analyze: nothing to analyze");

  double hl = 0, bg = 0;
  json j;
  j["videos"] = json::array();
  for (const auto& item : items) {
    hl += item.report.highlight_mean_neighbors;
    bg += item.report.background_mean_neighbors;
    j["videos"].push_back({{"id", item.id},
                           {"highlight_mean_neighbors", item.report.highlight_mean_neighbors},
                           {"background_mean_neighbors", item.report.background_mean_neighbors},
                           {"ratio", item.report.ratio},
                           {"threshold", item.report.threshold},
                           {"window_steps", item.report.window_steps}});
  }
  hl /= static_cast<double>(items.size());
  bg /= static_cast<double>(items.size());
  j["highlight_mean_neighbors"] = hl;
  j["background_mean_neighbors"] = bg;
  std::cout.precision(4);
  std::cout << "similar-neighbor counts: highlights " << hl << "  background " << bg << "\n";
  if (!report_path.empty()) {
    std::ofstream(report_path) << j.dump(2) << "\n";
    std::cout << "report: " << report_path << "\n";
  } else {
    ensure_dir(g.out_dir);
    const std::string p = (fs::path(g.out_dir) / "distinctiveness.json").string();
    std::ofstream(p) << j.dump(2) << "\n";
    std::cout << "report: " << p << "\n";
  }
  return 0;
}

// --- ablate ------------------------------------------------------------

vhd::TrainConfig variant_config(vhd::TrainConfig base, const std::string& variant) {
  if (variant == "full") return base;
  if (variant == "no-rasl") {
    base.rasl_mode = vhd::RaslMode::off;
    return base;
  }
  if (variant == "mean-topk") {
    base.rasl_mode = vhd::RaslMode::mean_topk;
    return base;
  }
  if (variant == "no-sa") {
    base.use_sa = false;
    return base;
  }
  if (variant == "no-auxiliary") {
    base.use_auxiliary = false;
    return base;
  }
  if (variant == "vision-only") {
    base.modality = vhd::Modality::visual_only;
    return base;
  }
  if (variant == "audio-only") {
    base.modality = vhd::Modality::audio_only;
    return base;
  }
  throw CLI::ValidationError("--variants", "unknown variant '" + variant + "'");
}

double eval_model_map(const vhd::ModelState<float>& model, const vhd::DatasetManifest& manifest,
                      int threads) {
  std::vector<vhd::ScoredVideo> videos(manifest.entries.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  parallel_for(static_cast<std::int64_t>(manifest.entries.size()), threads, [&](std::int64_t i) {
    try {
      const auto& entry = manifest.entries[static_cast<std::size_t>(i)];
      const bool audio_branch = !model.visual.has_value();
      auto fvs = vhd::load_fvs(audio_branch ? entry.audio_path : entry.visual_path);
      if (audio_branch && fvs.d != model.cfg.model_dim())
        fvs = vhd::resample_vector_length(fvs, model.cfg.model_dim());
      auto result = vhd::infer(fvs, model, vhd::InferOptions{});
      vhd::ScoredVideo sv;
      sv.id = entry.id;
      sv.scores = std::move(result.scores);
      sv.labels = vhd::load_labels(entry.label_path);
      videos[static_cast<std::size_t>(i)] = std::move(sv);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  return vhd::map_and_topk(videos, vhd::EvalOptions{}).map;
}

int run_ablate(const GlobalOptions& g, const std::string& train_manifest_path,
               const std::string& eval_manifest_path, const std::vector<std::string>& variants,
               std::int64_t steps_override) {
  ensure_dir(g.out_dir);
  auto train_manifest = vhd::load_manifest(train_manifest_path);
  auto eval_manifest = vhd::load_manifest(eval_manifest_path);

  json rows = json::array();
  std::cout << "variant          mAP\n";
  for (const auto& variant : variants) {
    vhd::TrainConfig cfg = variant_config(resolve_config(g), variant);
    if (steps_override >= 0) cfg.steps = steps_override;
    auto result = vhd::pretrain(train_manifest, cfg);
    const double map = eval_model_map(result.model, eval_manifest, g.threads);
    std::cout.width(16);
    std::cout << std::left << variant;
    std::cout.precision(4);
    std::cout << map << "\n";
    rows.push_back({{"variant", variant}, {"map", map}, {"steps", cfg.steps}});
    const std::string ckpt = (fs::path(g.out_dir) / ("ablate_" + variant + ".ckpt")).string();
    vhd::checkpoint_save(result.model, result.optimizer, result.next_step, ckpt);
  }
  const std::string report_path = (fs::path(g.out_dir) / "ablation_report.json").string();
  std::ofstream(report_path) << rows.dump(2) << "\n";
  std::cout << "report: " << report_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised cross-modal video highlight detection over feature-vector sequences"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "training config file (key = value lines)");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "seed override");
  app.add_option("--threads", g.threads, "worker threads for per-video stages")
      ->capture_default_str();

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic paired-modality dataset");
  vhd::SynthSpec spec;
  gen->add_option("--videos", spec.videos)->capture_default_str();
  gen->add_option("--min-timesteps", spec.min_timesteps)->capture_default_str();
  gen->add_option("--max-timesteps", spec.max_timesteps)->capture_default_str();
  gen->add_option("--dv", spec.d_v)->capture_default_str();
  gen->add_option("--da", spec.d_a)->capture_default_str();
  gen->add_option("--latent-dim", spec.latent_dim)->capture_default_str();
  gen->add_option("--highlight-fraction", spec.highlight_fraction)->capture_default_str();
  gen->add_option("--clusters", spec.clusters)->capture_default_str();
  gen->add_option("--coupling", spec.coupling)->capture_default_str();
  gen->add_option("--audio-noise", spec.audio_noise)->capture_default_str();
  gen->add_option("--visual-gain", spec.visual_gain)->capture_default_str();
  gen->add_option("--audio-gain", spec.audio_gain)->capture_default_str();
  gen->add_option("--outliers", spec.outliers_per_video)->capture_default_str();
  gen->add_option("--outlier-gain", spec.outlier_gain)->capture_default_str();
  gen->add_option("--min-segment", spec.min_segment)->capture_default_str();
  gen->add_option("--max-segment", spec.max_segment)->capture_default_str();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pretrain on a manifest of paired FVS files");
  std::string manifest_path, resume_path;
  std::int64_t steps_override = -1;
  bool quiet = false;
  pre->add_option("--manifest", manifest_path, "dataset manifest")->required();
  pre->add_option("--resume", resume_path, "checkpoint to resume from");
  pre->add_option("--steps", steps_override, "override configured step budget");
  pre->add_flag("--quiet", quiet, "suppress progress lines");

  // infer
  auto* inf = app.add_subcommand("infer", "visual-only highlight scoring");
  std::string ckpt_path, fvs_path;
  float threshold = 0.5f;
  std::int64_t min_segment = 1;
  bool emit_svg = false;
  inf->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  inf->add_option("--fvs", fvs_path, "visual FVS file")->required();
  inf->add_option("--threshold", threshold, "segment threshold in [0,1]")->capture_default_str();
  inf->add_option("--min-segment", min_segment, "minimum segment length")->capture_default_str();
  inf->add_flag("--svg", emit_svg, "also emit an SVG score curve");

  // eval
  auto* ev = app.add_subcommand("eval", "score files + labels -> mAP / top-5 mAP report");
  std::string eval_manifest, scores_dir, report_path, binarize = "top-fraction";
  vhd::EvalOptions eval_opts;
  ev->add_option("--manifest", eval_manifest, "manifest with label sidecars")->required();
  ev->add_option("--scores", scores_dir, "directory of score CSV files")->required();
  ev->add_option("--report", report_path, "report JSON path");
  ev->add_option("--segment-len", eval_opts.segment_len)->capture_default_str();
  ev->add_option("--binarize", binarize, "top-fraction | threshold")->capture_default_str();
  ev->add_option("--binarize-value", eval_opts.binarize_value)->capture_default_str();
  ev->add_option("--top-k", eval_opts.top_k_segments)->capture_default_str();

  // analyze
  auto* an = app.add_subcommand("analyze", "window-MSE distinctiveness of highlights");
  std::string an_manifest, an_fvs, an_labels, an_report;
  double window_s = 30.0, an_threshold = -1.0, rate = 5.0;
  an->add_option("--manifest", an_manifest, "manifest with label sidecars");
  an->add_option("--fvs", an_fvs, "single FVS file");
  an->add_option("--labels", an_labels, "labels for --fvs");
  an->add_option("--window-s", window_s, "window span in seconds")->capture_default_str();
  an->add_option("--threshold", an_threshold, "MSE threshold (<=0 auto)")->capture_default_str();
  an->add_option("--rate", rate, "timesteps per second")->capture_default_str();
  an->add_option("--report", an_report, "report JSON path");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and compare named model variants");
  std::string ab_train, ab_eval;
  std::vector<std::string> variants{"full", "no-rasl", "no-sa", "no-auxiliary",
                                    "vision-only", "audio-only"};
  std::int64_t ab_steps = -1;
  ab->add_option("--train-manifest", ab_train)->required();
  ab->add_option("--eval-manifest", ab_eval)->required();
  ab->add_option("--variants", variants, "subset of: full no-rasl mean-topk no-sa no-auxiliary vision-only audio-only")
      ->delimiter(',');
  ab->add_option("--steps", ab_steps, "override configured step budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (gen->parsed()) {
      spec.seed = g.seed_set ? g.seed : spec.seed;
      return run_gen_synth(g, spec);
    }
    if (pre->parsed()) return run_pretrain(g, manifest_path, resume_path, steps_override, quiet);
    if (inf->parsed()) return run_infer(g, ckpt_path, fvs_path, threshold, min_segment, emit_svg);
    if (ev->parsed()) {
      if (binarize == "top-fraction")
        eval_opts.binarize = vhd::BinarizeRule::top_fraction;
      else if (binarize == "threshold")
        eval_opts.binarize = vhd::BinarizeRule::threshold;
      else
        throw CLI::ValidationError("--binarize", "expected top-fraction or threshold");
      return run_eval(g, eval_manifest, scores_dir, eval_opts, report_path);
    }
    if (an->parsed()) {
      if (an_manifest.empty() && (an_fvs.empty() || an_labels.empty()))
        throw CLI::ValidationError("analyze", "need --manifest or both --fvs and --labels");
      return run_analyze(g, an_manifest, an_fvs, an_labels, window_s, an_threshold, rate,
                         an_report);
    }
    if (ab->parsed()) return run_ablate(g, ab_train, ab_eval, variants, ab_steps);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const vhd::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

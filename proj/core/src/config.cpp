#include "vhd/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vhd {

void TrainConfig::validate() const {
  if (k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
    throw std::invalid_argument("config: mask_ratio must lie in [0, 1)");
  if (!(gamma0 > 0.0)) throw std::invalid_argument("config: gamma0 must be positive");
  if (d_v < 1 || d_a < 1) throw std::invalid_argument("config: feature dims must be >= 1");
  if (window < 8) throw std::invalid_argument("config: window must be >= 8");
  if (steps < 0) throw std::invalid_argument("config: steps must be >= 0");
}

std::string to_string(SclVariant v) {
  return v == SclVariant::clip_infonce ? "clip-infonce" : "literal-stabilized";
}

std::string to_string(RaslMode m) {
  switch (m) {
    case RaslMode::kpoint: return "kpoint";
    case RaslMode::mean_topk: return "mean-topk";
    case RaslMode::off: return "off";
  }
  return "kpoint";
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::both: return "both";
    case Modality::visual_only: return "visual-only";
    case Modality::audio_only: return "audio-only";
  }
  return "both";
}

namespace {

SclVariant parse_scl_variant(const std::string& s) {
  if (s == "clip-infonce") return SclVariant::clip_infonce;
  if (s == "literal-stabilized") return SclVariant::literal_stabilized;
  throw std::invalid_argument("config: unknown scl_variant '" + s + "'");
}

RaslMode parse_rasl_mode(const std::string& s) {
  if (s == "kpoint") return RaslMode::kpoint;
  if (s == "mean-topk") return RaslMode::mean_topk;
  if (s == "off") return RaslMode::off;
  throw std::invalid_argument("config: unknown rasl_mode '" + s + "'");
}

Modality parse_modality(const std::string& s) {
  if (s == "both") return Modality::both;
  if (s == "visual-only") return Modality::visual_only;
  if (s == "audio-only") return Modality::audio_only;
  throw std::invalid_argument("config: unknown modality '" + s + "'");
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: expected a boolean, got '" + s + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& s, const char* key) {
  std::istringstream in(s);
  V v;
  in >> v;
  if (in.fail() || !in.eof())
    throw std::invalid_argument(std::string("config: bad value '") + s + "' for key '" + key + "'");
  return v;
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"k", [](TrainConfig& c, const std::string& v) { c.k = parse_number<std::int64_t>(v, "k"); }},
      {"gamma0", [](TrainConfig& c, const std::string& v) { c.gamma0 = parse_number<double>(v, "gamma0"); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = parse_number<double>(v, "lr"); }},
      {"mask_ratio", [](TrainConfig& c, const std::string& v) { c.mask_ratio = parse_number<double>(v, "mask_ratio"); }},
      {"batch", [](TrainConfig& c, const std::string& v) { c.batch = parse_number<std::int64_t>(v, "batch"); }},
      {"steps", [](TrainConfig& c, const std::string& v) { c.steps = parse_number<std::int64_t>(v, "steps"); }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v, "seed"); }},
      {"scl_variant", [](TrainConfig& c, const std::string& v) { c.scl_variant = parse_scl_variant(v); }},
      {"d_v", [](TrainConfig& c, const std::string& v) { c.d_v = parse_number<std::int64_t>(v, "d_v"); }},
      {"d_a", [](TrainConfig& c, const std::string& v) { c.d_a = parse_number<std::int64_t>(v, "d_a"); }},
      {"hidden1", [](TrainConfig& c, const std::string& v) { c.hidden1 = parse_number<std::int64_t>(v, "hidden1"); }},
      {"hidden2", [](TrainConfig& c, const std::string& v) { c.hidden2 = parse_number<std::int64_t>(v, "hidden2"); }},
      {"channels", [](TrainConfig& c, const std::string& v) { c.channels = parse_number<std::int64_t>(v, "channels"); }},
      {"rasl_channels", [](TrainConfig& c, const std::string& v) { c.rasl_channels = parse_number<std::int64_t>(v, "rasl_channels"); }},
      {"proj_dim", [](TrainConfig& c, const std::string& v) { c.proj_dim = parse_number<std::int64_t>(v, "proj_dim"); }},
      {"kernel", [](TrainConfig& c, const std::string& v) { c.kernel = parse_number<std::int64_t>(v, "kernel"); }},
      {"window", [](TrainConfig& c, const std::string& v) { c.window = parse_number<std::int64_t>(v, "window"); }},
      {"use_sa", [](TrainConfig& c, const std::string& v) { c.use_sa = parse_bool(v); }},
      {"rasl_mode", [](TrainConfig& c, const std::string& v) { c.rasl_mode = parse_rasl_mode(v); }},
      {"use_auxiliary", [](TrainConfig& c, const std::string& v) { c.use_auxiliary = parse_bool(v); }},
      {"modality", [](TrainConfig& c, const std::string& v) { c.modality = parse_modality(v); }},
      {"scl_pool_batch", [](TrainConfig& c, const std::string& v) { c.scl_pool_batch = parse_bool(v); }},
      {"early_stop", [](TrainConfig& c, const std::string& v) { c.early_stop = parse_bool(v); }},
      {"rms_alpha", [](TrainConfig& c, const std::string& v) { c.rms_alpha = parse_number<double>(v, "rms_alpha"); }},
      {"rms_eps", [](TrainConfig& c, const std::string& v) { c.rms_eps = parse_number<double>(v, "rms_eps"); }},
  };
  return table;
}

}  // namespace

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "k = " << cfg.k << "\n"
      << "gamma0 = " << cfg.gamma0 << "\n"
      << "lr = " << cfg.lr << "\n"
      << "mask_ratio = " << cfg.mask_ratio << "\n"
      << "batch = " << cfg.batch << "\n"
      << "steps = " << cfg.steps << "\n"
      << "seed = " << cfg.seed << "\n"
      << "scl_variant = " << to_string(cfg.scl_variant) << "\n"
      << "d_v = " << cfg.d_v << "\n"
      << "d_a = " << cfg.d_a << "\n"
      << "hidden1 = " << cfg.hidden1 << "\n"
      << "hidden2 = " << cfg.hidden2 << "\n"
      << "channels = " << cfg.channels << "\n"
      << "rasl_channels = " << cfg.rasl_channels << "\n"
      << "proj_dim = " << cfg.proj_dim << "\n"
      << "kernel = " << cfg.kernel << "\n"
      << "window = " << cfg.window << "\n"
      << "use_sa = " << (cfg.use_sa ? "true" : "false") << "\n"
      << "rasl_mode = " << to_string(cfg.rasl_mode) << "\n"
      << "use_auxiliary = " << (cfg.use_auxiliary ? "true" : "false") << "\n"
      << "modality = " << to_string(cfg.modality) << "\n"
      << "scl_pool_batch = " << (cfg.scl_pool_batch ? "true" : "false") << "\n"
      << "early_stop = " << (cfg.early_stop ? "true" : "false") << "\n"
      << "rms_alpha = " << cfg.rms_alpha << "\n"
      << "rms_eps = " << cfg.rms_eps << "\n";
  return out.str();
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(cfg, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace vhd

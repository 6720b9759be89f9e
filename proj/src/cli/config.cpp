#include "odm/cli/config.hpp"

#include <set>

#include "odm/errors.hpp"
#include "odm/util/io.hpp"

namespace odm::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Strict section reader: every key must be consumed, leftovers are fatal.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigInvalid(path_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigInvalid(path_ + "." + key + " has the wrong type");
    }
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) {
        throw ConfigInvalid("unknown key: " + path_ + "." + key);
      }
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

attack::TriggerKind trigger_from_string(const std::string& s) {
  if (s == "stego") return attack::TriggerKind::Stego;
  if (s == "patch") return attack::TriggerKind::Patch;
  if (s == "noise") return attack::TriggerKind::Noise;
  throw ConfigInvalid("poison.trigger must be one of stego|patch|noise, got " + s);
}

attack::PatchCorner corner_from_string(const std::string& s) {
  if (s == "lower-right") return attack::PatchCorner::LowerRight;
  if (s == "lower-left") return attack::PatchCorner::LowerLeft;
  if (s == "upper-right") return attack::PatchCorner::UpperRight;
  if (s == "upper-left") return attack::PatchCorner::UpperLeft;
  throw ConfigInvalid("poison.patch_corner invalid: " + s);
}

void parse_paths(const json& j, ExperimentConfig& cfg) {
  Section s(j, "paths");
  auto read_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
    std::string tmp;
    s.opt(key, tmp);
    if (!tmp.empty()) out = std::filesystem::path(tmp);
  };
  read_path("corpus_dir", cfg.paths.corpus_dir);
  read_path("dataset_dir", cfg.paths.dataset_dir);
  read_path("testset_dir", cfg.paths.testset_dir);
  read_path("model_file", cfg.paths.model_file);
  read_path("generator_dir", cfg.paths.generator_dir);
  s.finish();
}

void parse_scan(const json& j, inventory::ScanConfig& scan) {
  Section s(j, "scan");
  s.opt("model_dirs", scan.model_dirs);
  s.opt("model_suffixes", scan.model_suffixes);
  s.opt("label_suffixes", scan.label_suffixes);
  s.opt("label_keywords", scan.label_keywords);
  s.opt("native_lib_dir", scan.native_lib_dir);
  s.opt("match_all_identifiers", scan.match_all_identifiers);
  if (s.has("signatures")) {
    scan.signatures.clear();
    for (const auto& js : s.sub("signatures")) {
      Section sig(js, "scan.signatures[]");
      inventory::FrameworkSignature fs;
      sig.opt("framework_id", fs.framework_id);
      sig.opt("identifier_strings", fs.identifier_strings);
      sig.finish();
      if (fs.framework_id.empty() || fs.identifier_strings.empty()) {
        throw ConfigInvalid("scan.signatures entries need framework_id and identifier_strings");
      }
      for (const auto& ident : fs.identifier_strings) {
        for (const char c : ident) {
          if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e) {
            throw ConfigInvalid("identifier strings must be plain ASCII: " + fs.framework_id);
          }
        }
      }
      scan.signatures.push_back(std::move(fs));
    }
  }
  s.finish();
}

void parse_generator(const json& j, stego::GeneratorTrainConfig& g) {
  Section s(j, "generator");
  s.opt("height", g.height);
  s.opt("width", g.width);
  s.opt("channels", g.channels);
  s.opt("message_length", g.message_length);
  s.opt("lambda_message", g.lambda_message);
  s.opt("lambda_perceptual", g.lambda_perceptual);
  s.opt("ramp_start", g.ramp_start);
  s.opt("ramp_end", g.ramp_end);
  s.opt("epochs", g.epochs);
  s.opt("batch_size", g.batch_size);
  s.opt("lr", g.lr);
  s.opt("holdout_fraction", g.holdout_fraction);
  s.opt("base_channels", g.base_channels);
  s.finish();
  g.validate();
}

void parse_poison(const json& j, attack::PoisonConfig& p) {
  Section s(j, "poison");
  s.opt("target_string", p.target_string);
  s.opt("target_label", p.target_label);
  s.opt("rate", p.rate);
  std::string trigger = to_string(p.trigger);
  s.opt("trigger", trigger);
  p.trigger = trigger_from_string(trigger);
  s.opt("patch_size", p.baseline.patch_size);
  std::string corner = attack::to_string(p.baseline.corner);
  s.opt("patch_corner", corner);
  p.baseline.corner = corner_from_string(corner);
  s.opt("patch_fill", p.baseline.fill);
  s.opt("noise_amplitude", p.baseline.amplitude);
  s.finish();
  if (!(p.rate > 0.0 && p.rate < 1.0)) {
    throw ConfigInvalid("poison.rate must lie in (0,1): the poisoned partition size "
                        "round(p*N) must be at least 1");
  }
  if (p.target_label < 0) throw ConfigInvalid("poison.target_label must be >= 0");
  if (p.baseline.patch_size < 1) throw ConfigInvalid("poison.patch_size must be >= 1");
  if (p.baseline.amplitude < 0) throw ConfigInvalid("poison.noise_amplitude must be >= 0");
}

void parse_train(const json& j, attack::TrainSchedule& t) {
  Section s(j, "train");
  s.opt("epochs", t.epochs);
  s.opt("batch_size", t.batch_size);
  s.opt("lr", t.lr);
  s.opt("probe_samples", t.probe_samples);
  s.finish();
  t.validate();
}

void parse_convert(const json& j, ExperimentConfig::ConvertOptions& c) {
  Section s(j, "convert");
  s.opt("samples", c.samples);
  double tol = -1.0;
  s.opt("tolerance", tol);
  if (tol > 0) c.tolerance = tol;
  s.finish();
  if (c.samples < 1) throw ConfigInvalid("convert.samples must be >= 1");
}

void parse_metrics(const json& j, eval::MetricsConfig& m) {
  Section s(j, "metrics");
  s.opt("max_value", m.max_value);
  s.opt("c1_k", m.c1_k);
  s.opt("c2_k", m.c2_k);
  s.opt("window", m.window);
  s.opt("sigma", m.sigma);
  bool scales_given = s.has("scales");
  s.opt("scales", m.scales);
  bool weights_given = s.has("scale_weights");
  s.opt("scale_weights", m.scale_weights);
  s.opt("downsample_sigma", m.downsample_sigma);
  s.opt("downsample_radius", m.downsample_radius);
  s.finish();
  if (scales_given && !weights_given && m.scales >= 1 && m.scales <= 5) {
    // Standard weights truncated and renormalized for the requested K.
    const std::vector<double> standard = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    m.scale_weights.assign(standard.begin(), standard.begin() + m.scales);
    double sum = 0.0;
    for (const double w : m.scale_weights) sum += w;
    for (auto& w : m.scale_weights) w /= sum;
  }
  m.validate();
}

ordered_json resolve_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  ordered_json paths;
  paths["corpus_dir"] = cfg.paths.corpus_dir ? cfg.paths.corpus_dir->string() : "";
  paths["dataset_dir"] = cfg.paths.dataset_dir ? cfg.paths.dataset_dir->string() : "";
  paths["testset_dir"] = cfg.paths.testset_dir ? cfg.paths.testset_dir->string() : "";
  paths["model_file"] = cfg.paths.model_file ? cfg.paths.model_file->string() : "";
  paths["generator_dir"] = cfg.paths.generator_dir ? cfg.paths.generator_dir->string() : "";
  j["paths"] = paths;

  ordered_json scan;
  scan["model_dirs"] = cfg.scan.model_dirs;
  scan["model_suffixes"] = cfg.scan.model_suffixes;
  scan["label_suffixes"] = cfg.scan.label_suffixes;
  scan["label_keywords"] = cfg.scan.label_keywords;
  scan["native_lib_dir"] = cfg.scan.native_lib_dir;
  scan["match_all_identifiers"] = cfg.scan.match_all_identifiers;
  scan["signatures"] = ordered_json::array();
  for (const auto& sig : cfg.scan.signatures) {
    ordered_json js;
    js["framework_id"] = sig.framework_id;
    js["identifier_strings"] = sig.identifier_strings;
    scan["signatures"].push_back(std::move(js));
  }
  j["scan"] = scan;

  ordered_json gen;
  gen["height"] = cfg.generator.height;
  gen["width"] = cfg.generator.width;
  gen["channels"] = cfg.generator.channels;
  gen["message_length"] = cfg.generator.message_length;
  gen["lambda_message"] = cfg.generator.lambda_message;
  gen["lambda_perceptual"] = cfg.generator.lambda_perceptual;
  gen["ramp_start"] = cfg.generator.ramp_start;
  gen["ramp_end"] = cfg.generator.ramp_end;
  gen["epochs"] = cfg.generator.epochs;
  gen["batch_size"] = cfg.generator.batch_size;
  gen["lr"] = cfg.generator.lr;
  gen["holdout_fraction"] = cfg.generator.holdout_fraction;
  gen["base_channels"] = cfg.generator.base_channels;
  j["generator"] = gen;

  ordered_json poison;
  poison["target_string"] = cfg.poison.target_string;
  poison["target_label"] = cfg.poison.target_label;
  poison["rate"] = cfg.poison.rate;
  poison["trigger"] = to_string(cfg.poison.trigger);
  poison["patch_size"] = cfg.poison.baseline.patch_size;
  poison["patch_corner"] = attack::to_string(cfg.poison.baseline.corner);
  poison["patch_fill"] = cfg.poison.baseline.fill;
  poison["noise_amplitude"] = cfg.poison.baseline.amplitude;
  j["poison"] = poison;

  ordered_json train;
  train["epochs"] = cfg.train.epochs;
  train["batch_size"] = cfg.train.batch_size;
  train["lr"] = cfg.train.lr;
  train["probe_samples"] = cfg.train.probe_samples;
  j["train"] = train;

  ordered_json convert;
  convert["samples"] = cfg.convert.samples;
  convert["tolerance"] = cfg.convert.tolerance ? ordered_json(*cfg.convert.tolerance)
                                               : ordered_json(nullptr);
  j["convert"] = convert;

  ordered_json metrics;
  metrics["max_value"] = cfg.metrics.max_value;
  metrics["c1_k"] = cfg.metrics.c1_k;
  metrics["c2_k"] = cfg.metrics.c2_k;
  metrics["window"] = cfg.metrics.window;
  metrics["sigma"] = cfg.metrics.sigma;
  metrics["scales"] = cfg.metrics.scales;
  metrics["scale_weights"] = cfg.metrics.scale_weights;
  metrics["downsample_sigma"] = cfg.metrics.downsample_sigma;
  metrics["downsample_radius"] = cfg.metrics.downsample_radius;
  j["metrics"] = metrics;

  j["stealth_pairs"] = cfg.stealth_pairs;
  j["model_id"] = cfg.model_id;
  return j;
}

}  // namespace

ExperimentConfig validate_config(const std::string& raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("configuration is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  // Generator and poison seeds are derived from the run seed; they stay in
  // the structs for full provenance.
  Section root(doc, "config");
  root.opt("seed", cfg.seed);
  std::string out_dir = cfg.output_dir.string();
  root.opt("output_dir", out_dir);
  cfg.output_dir = out_dir;
  root.opt("verbose", cfg.verbose);
  if (root.has("paths")) parse_paths(root.sub("paths"), cfg);
  if (root.has("scan")) parse_scan(root.sub("scan"), cfg.scan);
  if (root.has("generator")) parse_generator(root.sub("generator"), cfg.generator);
  if (root.has("poison")) parse_poison(root.sub("poison"), cfg.poison);
  if (root.has("train")) parse_train(root.sub("train"), cfg.train);
  if (root.has("convert")) parse_convert(root.sub("convert"), cfg.convert);
  if (root.has("metrics")) parse_metrics(root.sub("metrics"), cfg.metrics);
  root.opt("stealth_pairs", cfg.stealth_pairs);
  root.opt("model_id", cfg.model_id);
  root.finish();

  if (cfg.stealth_pairs < 1) throw ConfigInvalid("stealth_pairs must be >= 1");
  if (cfg.model_id.empty()) throw ConfigInvalid("model_id must be non-empty");
  cfg.generator.validate();
  cfg.train.validate();
  cfg.metrics.validate();

  cfg.generator.seed = rng::mix64(cfg.seed ^ 0x6E6E);
  cfg.poison.seed = rng::mix64(cfg.seed ^ 0x7015);
  cfg.poison.baseline.seed = rng::mix64(cfg.seed ^ 0xBA5E);
  cfg.train.seed = rng::mix64(cfg.seed ^ 0x7217);

  cfg.resolved = resolve_json(cfg);
  cfg.digest = util::sha256_hex(cfg.resolved.dump());
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigInvalid("config file does not exist: " + path.string());
  }
  return validate_config(util::read_text_file(path));
}

std::string default_config_text() {
  ExperimentConfig cfg;
  cfg.generator.seed = rng::mix64(cfg.seed ^ 0x6E6E);
  cfg.poison.seed = rng::mix64(cfg.seed ^ 0x7015);
  cfg.poison.baseline.seed = rng::mix64(cfg.seed ^ 0xBA5E);
  cfg.train.seed = rng::mix64(cfg.seed ^ 0x7217);
  return resolve_json(cfg).dump(2) + "\n";
}

}  // namespace odm::cli

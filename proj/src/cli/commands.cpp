#include "odm/cli/commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "odm/attack/backdoor.hpp"
#include "odm/convert/convert.hpp"
#include "odm/errors.hpp"
#include "odm/eval/classifier.hpp"
#include "odm/eval/plot.hpp"
#include "odm/eval/report.hpp"
#include "odm/model/analysis.hpp"
#include "odm/model/interp.hpp"
#include "odm/util/io.hpp"
#include "odm/util/parallel.hpp"

namespace odm::cli {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<Command> command_from_string(const std::string& name) {
  if (name == "scan") return Command::Scan;
  if (name == "analyze") return Command::Analyze;
  if (name == "convert") return Command::Convert;
  if (name == "train-gen") return Command::TrainGen;
  if (name == "attack") return Command::Attack;
  if (name == "evaluate") return Command::Evaluate;
  if (name == "report") return Command::Report;
  return std::nullopt;
}

const char* to_string(Command c) {
  switch (c) {
    case Command::Scan: return "scan";
    case Command::Analyze: return "analyze";
    case Command::Convert: return "convert";
    case Command::TrainGen: return "train-gen";
    case Command::Attack: return "attack";
    case Command::Evaluate: return "evaluate";
    case Command::Report: return "report";
  }
  return "?";
}

namespace {

namespace fs = std::filesystem;

fs::path stage_dir(const ExperimentConfig& cfg, const char* stage) {
  const fs::path dir = cfg.output_dir / stage;
  fs::create_directories(dir);
  return dir;
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw ConfigInvalid(std::string("paths.") + what + " is required for this command");
  return *p;
}

fs::path require_artifact(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p)) {
    throw MissingUpstreamArtifact(p.string() + " (run the '" + produced_by +
                                  "' command first)");
  }
  return p;
}

model::OnDeviceModel load_model_file(const fs::path& path) {
  const auto bytes = util::read_file(path);
  return model::load_model(bytes, model::ModelFormat::Auto);
}

stego::TriggerGenerator load_generator(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.paths.generator_dir
                           ? *cfg.paths.generator_dir
                           : cfg.output_dir / "train-gen" / "generator";
  require_artifact(dir / "manifest.json", "train-gen");
  return stego::TriggerGenerator::load(dir);
}

convert::TrainableModel rebuild(const model::OnDeviceModel& m) {
  auto trainable = convert::reconstruct_trainable(m);
  convert::map_parameters(m, trainable);
  return trainable;
}

int cmd_scan(const ExperimentConfig& cfg, std::ostream& log) {
  const auto& corpus = require_path(cfg.paths.corpus_dir, "corpus_dir");
  if (!fs::is_directory(corpus)) {
    throw MissingUpstreamArtifact("corpus directory not found: " + corpus.string());
  }
  const auto records = inventory::scan_corpus(corpus, cfg.scan);
  std::string out;
  {
    ordered_json head;
    head["record"] = "inventory_header";
    head["config_digest"] = cfg.digest;
    head["packages"] = records.size();
    out += head.dump() + "\n";
  }
  int dl = 0;
  for (const auto& rec : records) {
    out += inventory::to_jsonl(rec) + "\n";
    dl += rec.is_dl_app ? 1 : 0;
  }
  util::write_text_file(stage_dir(cfg, "scan") / "inventory.jsonl", out);
  log << "scan: " << records.size() << " packages, " << dl << " DL apps -> "
      << (cfg.output_dir / "scan" / "inventory.jsonl").string() << "\n";
  return 0;
}

int cmd_analyze(const ExperimentConfig& cfg, std::ostream& log) {
  std::string out;
  {
    ordered_json head;
    head["record"] = "model_info_header";
    head["config_digest"] = cfg.digest;
    out += head.dump() + "\n";
  }
  int analyzed = 0;

  if (cfg.paths.model_file) {
    const auto path = require_artifact(*cfg.paths.model_file, "scan");
    const auto m = load_model_file(path);
    auto info = analysis::analyze_model(m, path.string());
    const auto summary = analysis::summarize_graph(m);
    out += analysis::to_jsonl(info, &summary) + "\n";
    ++analyzed;
  } else {
    const auto inventory_path =
        require_artifact(cfg.output_dir / "scan" / "inventory.jsonl", "scan");
    const auto& corpus = require_path(cfg.paths.corpus_dir, "corpus_dir");
    std::ifstream in(inventory_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.find("\"inventory_header\"") != std::string::npos) continue;
      const auto rec = inventory::inventory_from_json(line);
      if (rec.model_candidates.empty()) continue;
      const auto apk_bytes = util::read_file(corpus / rec.package_id);
      inventory::ZipReader reader(apk_bytes);
      inventory::ZipFileTree tree(reader);
      for (const auto& candidate : rec.model_candidates) {
        if (candidate.validation != inventory::Validation::Valid) continue;
        const auto bytes = tree.read(candidate.archive_path);
        const auto m = model::load_model(bytes, model::ModelFormat::Auto);
        auto info =
            analysis::analyze_model(m, rec.package_id + "!" + candidate.archive_path);
        info = analysis::bind_labels(std::move(info), rec.label_files);
        const auto summary = analysis::summarize_graph(m);
        out += analysis::to_jsonl(info, &summary) + "\n";
        ++analyzed;
      }
    }
  }
  util::write_text_file(stage_dir(cfg, "analyze") / "model_info.jsonl", out);
  log << "analyze: " << analyzed << " models -> "
      << (cfg.output_dir / "analyze" / "model_info.jsonl").string() << "\n";
  return 0;
}

int cmd_convert(const ExperimentConfig& cfg, std::ostream& log) {
  const auto path = require_artifact(require_path(cfg.paths.model_file, "model_file"), "scan");
  const auto source = load_model_file(path);
  auto trainable = rebuild(source);
  const double tol = cfg.convert.tolerance
                         ? *cfg.convert.tolerance
                         : (convert::has_quantized_parameters(source)
                                ? convert::kQuantizedEquivalenceTol
                                : convert::kFloatEquivalenceTol);
  const auto report = convert::verify_equivalence(source, trainable, cfg.convert.samples, tol,
                                                  rng::mix64(cfg.seed ^ 0xE9111));
  ordered_json j = json::parse(convert::to_json(report));
  j["config_digest"] = cfg.digest;
  j["source_model"] = path.string();
  const auto dir = stage_dir(cfg, "convert");
  util::write_text_file(dir / "equivalence.json", j.dump(2) + "\n");

  if (!report.passed) {
    throw Error("equivalence verification failed: max_abs_diff=" +
                std::to_string(report.max_abs_diff) +
                ", argmax_agreement=" + std::to_string(report.argmax_agreement));
  }
  util::write_file(dir / "model.fsm", convert::export_deployable(trainable, cfg.digest));
  log << "convert: verified on " << report.samples_tested
      << " samples (max_abs_diff=" << report.max_abs_diff << ") -> "
      << (dir / "model.fsm").string() << "\n";
  return 0;
}

int cmd_train_gen(const ExperimentConfig& cfg, std::ostream& log) {
  const auto& dataset_dir = require_path(cfg.paths.dataset_dir, "dataset_dir");
  if (!fs::is_directory(dataset_dir)) {
    throw MissingUpstreamArtifact("dataset directory not found: " + dataset_dir.string());
  }
  const auto dataset = data::load_directory(dataset_dir);
  log << "train-gen: " << dataset.size() << " images, L=" << cfg.generator.message_length
      << ", epochs=" << cfg.generator.epochs << "\n";
  const auto generator = stego::train_generator(dataset, cfg.generator);
  const auto dir = stage_dir(cfg, "train-gen") / "generator";
  generator.save(dir, cfg.digest);
  const auto& last = generator.history().back();
  log << "train-gen: holdout bit accuracy " << last.holdout_bit_accuracy * 100.0
      << "%, holdout PSNR " << last.holdout_psnr << " dB -> " << dir.string() << "\n";
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, std::ostream& log) {
  const auto model_path =
      require_artifact(cfg.output_dir / "convert" / "model.fsm", "convert");
  const auto& dataset_dir = require_path(cfg.paths.dataset_dir, "dataset_dir");
  const auto dataset = data::load_directory(dataset_dir);

  std::optional<stego::TriggerGenerator> generator;
  if (cfg.poison.trigger == attack::TriggerKind::Stego) generator = load_generator(cfg);

  auto victim = rebuild(load_model_file(model_path));
  const auto poisoned =
      attack::poison_dataset(dataset, generator ? &*generator : nullptr, cfg.poison);

  const auto dir = stage_dir(cfg, "attack");
  util::write_text_file(dir / "poison_audit.jsonl",
                        attack::audit_manifest_jsonl(poisoned, cfg.digest));

  // A few poisoned/benign pairs for eyeballing.
  for (std::size_t i = 0; i < poisoned.poisoned.size() && i < 8; ++i) {
    const std::map<std::string, std::string> meta = {{"config_digest", cfg.digest}};
    char name[64];
    std::snprintf(name, sizeof(name), "pair%02zu_poisoned.png", i);
    img::write_png(dir / "samples" / name, poisoned.poisoned.images[i], meta);
    std::snprintf(name, sizeof(name), "pair%02zu_benign.png", i);
    img::write_png(dir / "samples" / name,
                   dataset.images[poisoned.audit[i].source_index], meta);
  }

  std::optional<data::Dataset> probe;
  if (cfg.paths.testset_dir && fs::is_directory(*cfg.paths.testset_dir)) {
    probe = data::load_directory(*cfg.paths.testset_dir);
  }
  log << "attack: " << poisoned.poisoned.size() << " poisoned / " << poisoned.benign.size()
      << " benign, trigger=" << to_string(cfg.poison.trigger) << "\n";
  auto backdoor =
      attack::train_backdoor(std::move(victim), poisoned, cfg.train,
                             generator ? &*generator : nullptr, probe ? &*probe : nullptr);

  std::string log_lines;
  {
    ordered_json head;
    head["record"] = "training_log_header";
    head["config_digest"] = cfg.digest;
    head["trigger"] = to_string(cfg.poison.trigger);
    log_lines += head.dump() + "\n";
  }
  for (const auto& e : backdoor.log) {
    ordered_json je;
    je["epoch"] = e.epoch;
    je["loss"] = e.loss;
    je["train_accuracy"] = e.train_accuracy;
    je["probe_asr"] = e.probe_asr;
    log_lines += je.dump() + "\n";
  }
  util::write_text_file(dir / "training_log.jsonl", log_lines);
  util::write_file(dir / "backdoor_model.fsm",
                   convert::export_deployable(backdoor.model, cfg.digest));
  log << "attack: final epoch loss " << backdoor.log.back().loss << ", probe ASR "
      << backdoor.log.back().probe_asr << "% -> " << (dir / "backdoor_model.fsm").string()
      << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto victim_path =
      require_artifact(cfg.output_dir / "convert" / "model.fsm", "convert");
  const auto backdoor_path =
      require_artifact(cfg.output_dir / "attack" / "backdoor_model.fsm", "attack");
  const fs::path test_dir = cfg.paths.testset_dir
                                ? *cfg.paths.testset_dir
                                : require_path(cfg.paths.dataset_dir, "testset_dir");
  const auto testset = data::load_directory(test_dir);
  if (testset.size() == 0) throw EmptyTestset(test_dir.string());

  std::optional<stego::TriggerGenerator> generator;
  if (cfg.poison.trigger == attack::TriggerKind::Stego) generator = load_generator(cfg);

  const auto victim = rebuild(load_model_file(victim_path));
  const auto backdoor = rebuild(load_model_file(backdoor_path));
  const auto clean_clf = eval::classifier_from_graph(victim.graph);
  const auto backdoor_clf = eval::classifier_from_graph(backdoor.graph);
  const auto trig = attack::trigger_fn(cfg.poison, generator ? &*generator : nullptr);

  const double ba_normal = eval::benign_accuracy(clean_clf, testset);
  const double ba_backdoor = eval::benign_accuracy(backdoor_clf, testset);
  const double asr =
      eval::attack_success_rate(backdoor_clf, testset, trig, cfg.poison.target_label);

  // Stealth pairs drawn from the ASR pool (true label != target).
  std::vector<Image> benign_pool, triggered_pool;
  for (std::size_t i = 0;
       i < testset.size() && benign_pool.size() < static_cast<std::size_t>(cfg.stealth_pairs);
       ++i) {
    if (testset.labels[i] == cfg.poison.target_label) continue;
    benign_pool.push_back(testset.images[i]);
    triggered_pool.push_back(trig(testset.images[i]));
  }
  const auto stealth = eval::stealth_stats(benign_pool, triggered_pool, cfg.metrics);

  eval::AttackRunRow normal_row;
  normal_row.model_id = cfg.model_id;
  normal_row.attack = "normal";
  normal_row.ba = ba_normal;
  normal_row.sample_count = static_cast<int>(testset.size());
  normal_row.config_digest = cfg.digest;

  eval::AttackRunRow row;
  row.model_id = cfg.model_id;
  row.attack = to_string(cfg.poison.trigger);
  row.ba = ba_backdoor;
  row.asr = asr;
  row.bac = ba_backdoor - ba_normal;
  row.psnr_mean = stealth.psnr_mean;
  row.psnr_min = stealth.psnr_min;
  row.psnr_infinite = stealth.psnr_infinite;
  row.msssim_mean = stealth.msssim_mean;
  row.msssim_min = stealth.msssim_min;
  row.sample_count = static_cast<int>(testset.size());
  row.stealth_pairs = stealth.pairs;
  row.config_digest = cfg.digest;
  row.extra["metrics_max"] = std::to_string(cfg.metrics.max_value);
  row.extra["metrics_scales"] = std::to_string(cfg.metrics.scales);
  row.extra["metrics_window"] = std::to_string(cfg.metrics.window);
  row.extra["asr_pool"] = "true label != target label";

  const auto dir = stage_dir(cfg, "evaluate");
  util::write_text_file(dir / "rows.jsonl",
                        eval::row_to_jsonl(normal_row) + "\n" + eval::row_to_jsonl(row) + "\n");

  std::string csv = "# config_digest=" + cfg.digest + "\npsnr,msssim\n";
  for (std::size_t i = 0; i < benign_pool.size(); ++i) {
    const double p = eval::psnr(benign_pool[i], triggered_pool[i], cfg.metrics.max_value);
    const double m = eval::ms_ssim(benign_pool[i], triggered_pool[i], cfg.metrics);
    csv += (std::isinf(p) ? "inf" : std::to_string(p)) + "," + std::to_string(m) + "\n";
  }
  util::write_text_file(dir / "stealth_values.csv", csv);

  log << "evaluate: BA_normal=" << ba_normal << "% BA_backdoor=" << ba_backdoor
      << "% ASR=" << asr << "% PSNR=" << stealth.psnr_mean
      << "dB MS-SSIM=" << stealth.msssim_mean << " -> " << (dir / "rows.jsonl").string()
      << "\n";
  return 0;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  const auto rows_path = require_artifact(cfg.output_dir / "evaluate" / "rows.jsonl", "evaluate");
  std::vector<eval::AttackRunRow> rows;
  {
    std::ifstream in(rows_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) rows.push_back(eval::row_from_jsonl(line));
    }
  }
  const auto tables = eval::build_report(rows);
  const auto dir = stage_dir(cfg, "report");
  util::write_text_file(dir / "report.txt",
                        tables.human_text + "\nconfig_digest: " + cfg.digest + "\n");
  util::write_text_file(dir / "report.csv", "# config_digest=" + cfg.digest + "\n" + tables.csv);
  util::write_text_file(dir / "report.jsonl", tables.jsonl);

  const std::map<std::string, std::string> meta = {{"config_digest", cfg.digest}};

  // Stealth histograms from the evaluate stage, when present.
  const auto stealth_path = cfg.output_dir / "evaluate" / "stealth_values.csv";
  if (fs::exists(stealth_path)) {
    std::vector<double> psnrs, msssims;
    std::ifstream in(stealth_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 'p') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const std::string p = line.substr(0, comma);
      if (p != "inf") psnrs.push_back(std::stod(p));
      msssims.push_back(std::stod(line.substr(comma + 1)));
    }
    if (!psnrs.empty()) {
      eval::render_histogram(dir / "psnr_hist.png", psnrs, 24, "PSNR (DB)", meta);
    }
    if (!msssims.empty()) {
      eval::render_histogram(dir / "msssim_hist.png", msssims, 24, "MS-SSIM", meta);
    }
  }

  // ASR-vs-epoch curve from the attack training log, when present.
  const auto log_path = cfg.output_dir / "attack" / "training_log.jsonl";
  if (fs::exists(log_path)) {
    std::vector<double> epochs, asrs;
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.find("training_log_header") != std::string::npos) continue;
      const auto j = json::parse(line);
      const double asr = j.at("probe_asr").get<double>();
      if (asr >= 0) {
        epochs.push_back(j.at("epoch").get<double>());
        asrs.push_back(asr);
      }
    }
    if (epochs.size() >= 2) {
      eval::render_curves(dir / "asr_curve.png", epochs, {asrs}, {"ASR"},
                          "ASR (%) VS EPOCH", meta);
    }
  }
  log << "report -> " << (dir / "report.txt").string() << "\n";
  return 0;
}

}  // namespace

int execute_command(Command cmd, const ExperimentConfig& cfg, std::ostream& log) {
  if (const char* device = std::getenv("ODMKIT_DEVICE")) {
    const std::string d = device;
    if (d != "cpu" && !d.empty()) {
      throw ConfigInvalid("ODMKIT_DEVICE=" + d + " is not available (only: cpu)");
    }
  }
  switch (cmd) {
    case Command::Scan: return cmd_scan(cfg, log);
    case Command::Analyze: return cmd_analyze(cfg, log);
    case Command::Convert: return cmd_convert(cfg, log);
    case Command::TrainGen: return cmd_train_gen(cfg, log);
    case Command::Attack: return cmd_attack(cfg, log);
    case Command::Evaluate: return cmd_evaluate(cfg, log);
    case Command::Report: return cmd_report(cfg, log);
  }
  throw ConfigInvalid("unknown command");
}

}  // namespace odm::cli

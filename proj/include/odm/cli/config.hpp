#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nlohmann/json.hpp"
#include "odm/attack/backdoor.hpp"
#include "odm/attack/poison.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/inventory/scan.hpp"
#include "odm/stego/generator.hpp"

namespace odm::cli {

// Fully resolved experiment configuration. Parsed strictly: unknown keys are
// fatal, defaults are applied, and the digest is the content hash of the
// resolved canonical form (so a config that spells out the defaults hashes
// identically to one that omits them).
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "out";
  bool verbose = false;

  struct Paths {
    std::optional<std::filesystem::path> corpus_dir;
    std::optional<std::filesystem::path> dataset_dir;   // training images
    std::optional<std::filesystem::path> testset_dir;   // evaluation images
    std::optional<std::filesystem::path> model_file;    // extracted victim model
    std::optional<std::filesystem::path> generator_dir; // trained generator checkpoint
  } paths;

  inventory::ScanConfig scan;
  stego::GeneratorTrainConfig generator;
  attack::PoisonConfig poison;
  attack::TrainSchedule train;

  struct ConvertOptions {
    int samples = 100;
    std::optional<double> tolerance;  // default picked from the source dtype
  } convert;

  // Desk-scale metric defaults: K=3 scales with a 7x7 window fit 32x32
  // images; widen via metrics.scales/window for larger inputs.
  eval::MetricsConfig metrics = eval::MetricsConfig::for_scales(3, 32);
  int stealth_pairs = 200;
  std::string model_id = "victim";

  std::string digest;            // sha256 of the resolved form
  nlohmann::ordered_json resolved;
};

// Parses + validates raw JSON text. Throws ConfigInvalid with field-level
// messages (unknown key, invariant violations).
ExperimentConfig validate_config(const std::string& raw);

ExperimentConfig load_config_file(const std::filesystem::path& path);

// The resolved canonical JSON for a default-constructed config (documentation
// and round-trip tests).
std::string default_config_text();

}  // namespace odm::cli

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odm/attack/trigger.hpp"
#include "odm/data/dataset.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/stego/generator.hpp"

namespace odm::attack {

enum class TriggerKind { Stego, Patch, Noise };
const char* to_string(TriggerKind k);

struct PoisonConfig {
  std::string target_string = "open";  // s_t
  int target_label = 0;                // c_t
  double rate = 0.10;                  // p in (0,1)
  TriggerKind trigger = TriggerKind::Stego;
  BaselineTriggerSpec baseline;  // used by patch/noise kinds
  std::uint64_t seed = 99;

  // Throws ConfigInvalid when c_t is out of range, p is outside (0,1), or
  // round(p*N) < 1 for the given dataset size.
  void validate(int num_classes, std::size_t dataset_size) const;
};

struct PoisonedSample {
  std::size_t source_index = 0;
  int original_label = 0;
};

struct PoisonedDataset {
  data::Dataset benign;    // untouched remainder
  data::Dataset poisoned;  // triggered images, labels all == c_t
  std::vector<PoisonedSample> audit;  // aligned with the poisoned partition
  PoisonConfig provenance;

  std::size_t total() const { return benign.size() + poisoned.size(); }
};

// Selects round(p*N) samples (seeded, uniform) among those whose true label
// differs from the target, applies the configured trigger, relabels them.
// Throws InsufficientEligibleSamples when too few candidates exist and
// ShapeMismatch when the stego kind lacks a generator.
PoisonedDataset poison_dataset(const data::Dataset& dataset,
                               const stego::TriggerGenerator* generator,
                               const PoisonConfig& config);

// The trigger application used at both poisoning and inference time.
eval::TriggerFn trigger_fn(const PoisonConfig& config, const stego::TriggerGenerator* generator);

// Audit manifest: one line per poisoned sample (id, original label, assigned
// label, trigger kind, seed) plus a header line with the config digest.
std::string audit_manifest_jsonl(const PoisonedDataset& pd, const std::string& config_digest);

}  // namespace odm::attack

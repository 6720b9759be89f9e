#include "odm/attack/poison.hpp"

#include <algorithm>
#include <cmath>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"
#include "odm/util/rng.hpp"

namespace odm::attack {

using nlohmann::ordered_json;

const char* to_string(TriggerKind k) {
  switch (k) {
    case TriggerKind::Stego: return "stego";
    case TriggerKind::Patch: return "patch";
    case TriggerKind::Noise: return "noise";
  }
  return "stego";
}

void PoisonConfig::validate(int num_classes, std::size_t dataset_size) const {
  if (target_label < 0 || target_label >= num_classes) {
    throw ConfigInvalid("poison.target_label must lie below the class count (" +
                        std::to_string(num_classes) + ")");
  }
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ConfigInvalid("poison.rate must lie in (0,1)");
  }
  if (std::lround(rate * static_cast<double>(dataset_size)) < 1) {
    throw ConfigInvalid("poison.rate * dataset size rounds to zero samples");
  }
  if (trigger == TriggerKind::Stego && target_string.empty()) {
    throw ConfigInvalid("poison.target_string must be non-empty for the stego trigger");
  }
}

eval::TriggerFn trigger_fn(const PoisonConfig& config,
                           const stego::TriggerGenerator* generator) {
  switch (config.trigger) {
    case TriggerKind::Stego: {
      if (generator == nullptr) {
        throw ShapeMismatch("stego trigger requires a trained generator");
      }
      const auto secret =
          stego::string_to_bits(config.target_string, generator->config().message_length);
      return [generator, secret](const Image& im) {
        return generator->encode(im, secret).poisoned_image;
      };
    }
    case TriggerKind::Patch: {
      BaselineTriggerSpec spec = config.baseline;
      spec.kind = BaselineTriggerSpec::Kind::Patch;
      return [spec](const Image& im) { return apply_baseline_trigger(im, spec); };
    }
    case TriggerKind::Noise: {
      BaselineTriggerSpec spec = config.baseline;
      spec.kind = BaselineTriggerSpec::Kind::Noise;
      return [spec](const Image& im) { return apply_baseline_trigger(im, spec); };
    }
  }
  throw ConfigInvalid("unknown trigger kind");
}

PoisonedDataset poison_dataset(const data::Dataset& dataset,
                               const stego::TriggerGenerator* generator,
                               const PoisonConfig& config) {
  config.validate(dataset.num_classes(), dataset.size());
  const std::size_t want =
      static_cast<std::size_t>(std::lround(config.rate * static_cast<double>(dataset.size())));

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.labels[i] != config.target_label) eligible.push_back(i);
  }
  if (eligible.size() < want) {
    throw InsufficientEligibleSamples(std::to_string(eligible.size()) + " candidates for " +
                                      std::to_string(want) + " poison slots");
  }

  auto gen_rng = rng::fork(config.seed, 0xB0150);
  auto chosen_pos = rng::sample_indices(eligible.size(), want, gen_rng);
  std::vector<std::size_t> chosen;
  chosen.reserve(want);
  for (const auto p : chosen_pos) chosen.push_back(eligible[p]);
  std::sort(chosen.begin(), chosen.end());

  PoisonedDataset out;
  out.provenance = config;
  out.benign.class_names = dataset.class_names;
  out.poisoned.class_names = dataset.class_names;

  std::vector<bool> is_poisoned(dataset.size(), false);
  for (const auto i : chosen) is_poisoned[i] = true;

  // Trigger application is pure per sample; the stego path batches through
  // the generator for speed.
  std::vector<Image> triggered(chosen.size());
  if (config.trigger == TriggerKind::Stego) {
    if (generator == nullptr) throw ShapeMismatch("stego trigger requires a trained generator");
    const auto secret =
        stego::string_to_bits(config.target_string, generator->config().message_length);
    std::vector<Image> sources;
    sources.reserve(chosen.size());
    for (const auto i : chosen) sources.push_back(dataset.images[i]);
    auto encoded = generator->encode_batch(sources, secret);
    for (std::size_t i = 0; i < encoded.size(); ++i) {
      triggered[i] = std::move(encoded[i].poisoned_image);
    }
  } else {
    const auto fn = trigger_fn(config, generator);
    for (std::size_t i = 0; i < chosen.size(); ++i) triggered[i] = fn(dataset.images[chosen[i]]);
  }

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const std::size_t src = chosen[i];
    out.poisoned.push(std::move(triggered[i]), config.target_label, dataset.ids[src]);
    out.audit.push_back(PoisonedSample{src, dataset.labels[src]});
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!is_poisoned[i]) out.benign.push(dataset.images[i], dataset.labels[i], dataset.ids[i]);
  }
  return out;
}

std::string audit_manifest_jsonl(const PoisonedDataset& pd, const std::string& config_digest) {
  std::string out;
  {
    ordered_json head;
    head["record"] = "poison_audit_header";
    head["trigger"] = to_string(pd.provenance.trigger);
    head["target_label"] = pd.provenance.target_label;
    head["target_string"] = pd.provenance.target_string;
    head["rate"] = pd.provenance.rate;
    head["seed"] = pd.provenance.seed;
    head["poisoned_count"] = pd.poisoned.size();
    head["benign_count"] = pd.benign.size();
    head["config_digest"] = config_digest;
    out += head.dump() + "\n";
  }
  for (std::size_t i = 0; i < pd.audit.size(); ++i) {
    ordered_json j;
    j["sample_id"] = pd.poisoned.ids[i];
    j["source_index"] = pd.audit[i].source_index;
    j["original_label"] = pd.audit[i].original_label;
    j["assigned_label"] = pd.provenance.target_label;
    j["trigger"] = to_string(pd.provenance.trigger);
    j["seed"] = pd.provenance.seed;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace odm::attack

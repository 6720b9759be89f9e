#pragma once

#include <optional>
#include <string>
#include <vector>

#include "odm/attack/poison.hpp"
#include "odm/convert/convert.hpp"
#include "odm/data/dataset.hpp"

namespace odm::attack {

struct TrainSchedule {
  int epochs = 12;
  int batch_size = 64;
  float lr = 5e-4f;
  std::uint64_t seed = 3;
  int probe_samples = 200;  // held-out samples for the per-epoch attack probe

  void validate() const;  // throws ConfigInvalid
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;  // over the mixed training set, assigned labels
  double probe_asr = -1.0;      // -1 when no probe set was supplied
};

struct BackdoorModel {
  convert::TrainableModel model;
  PoisonConfig provenance;
  TrainSchedule schedule;
  std::string generator_digest;  // stego provenance; empty for baselines
  std::vector<EpochLog> log;
};

// Fine-tunes the reconstructed victim on benign + poisoned partitions with
// seeded shuffling and a fused softmax cross-entropy at the logits node.
// probe_set (optional) drives the per-epoch attack-success curve.
BackdoorModel train_backdoor(convert::TrainableModel victim, const PoisonedDataset& data,
                             const TrainSchedule& schedule,
                             const stego::TriggerGenerator* generator,
                             const data::Dataset* probe_set = nullptr);

// Runs the model on the triggered image and returns the predicted class.
// When the supplied generator/secret do not match the training provenance the
// optional flag is set (robustness probes), never fatal.
int activate_backdoor(const BackdoorModel& model, const Image& image,
                      const stego::TriggerGenerator* generator, const std::string& target_string,
                      bool* provenance_warning = nullptr);

// Plain clean-data training of a reconstructed model (used for clean victims
// and zero-poison controls); same schedule contract as train_backdoor.
std::vector<EpochLog> train_clean(convert::TrainableModel& model, const data::Dataset& train_set,
                                  const TrainSchedule& schedule);

// Node carrying pre-softmax logits (the softmax input when the graph ends
// with one, else the primary output node).
int logits_node_of(const convert::TrainableModel& model);

}  // namespace odm::attack

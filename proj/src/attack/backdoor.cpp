#include "odm/attack/backdoor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "odm/errors.hpp"
#include "odm/eval/classifier.hpp"
#include "odm/nn/optim.hpp"
#include "odm/util/parallel.hpp"
#include "odm/util/rng.hpp"

namespace odm::attack {

void TrainSchedule::validate() const {
  if (epochs < 1) throw ConfigInvalid("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigInvalid("train.batch_size must be >= 1");
  if (!(lr > 0.f)) throw ConfigInvalid("train.lr must be positive");
  if (probe_samples < 0) throw ConfigInvalid("train.probe_samples must be >= 0");
}

int logits_node_of(const convert::TrainableModel& model) {
  const int out_node = model.output_nodes().front();
  const auto& node = model.graph.nodes()[static_cast<std::size_t>(out_node)];
  if (node.kind == nn::NodeKind::Softmax) return node.inputs.front();
  return out_node;
}

namespace {

struct FitResult {
  std::vector<EpochLog> log;
};

std::vector<EpochLog> fit(nn::Graph& g, int input_node, int logits_node,
                          const std::vector<const Image*>& images,
                          const std::vector<int>& labels, const TrainSchedule& schedule,
                          const std::vector<Image>* probe_triggered, int target_label) {
  (void)input_node;
  schedule.validate();
  const std::size_t n = images.size();
  if (n == 0) throw ConfigInvalid("training set is empty");
  const int batch = std::min<int>(schedule.batch_size, static_cast<int>(n));
  const long steps_per_epoch = static_cast<long>(n) / batch;

  const int workers = util::worker_count();
  std::vector<nn::Runner> runners;
  for (int t = 0; t < workers; ++t) runners.emplace_back(g);
  nn::Adam opt({schedule.lr});

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    auto shuffle_gen = rng::fork(schedule.seed, 300 + static_cast<std::uint64_t>(epoch));
    rng::shuffle(order, shuffle_gen);
    double ep_loss = 0.0;
    std::atomic<long> hits{0};

    for (long step = 0; step < steps_per_epoch; ++step) {
      const std::size_t lo = static_cast<std::size_t>(step) * batch;
      std::vector<double> slice_loss(static_cast<std::size_t>(workers), 0.0);

      util::parallel_blocks(
          static_cast<std::size_t>(batch),
          [&](int t, std::size_t b, std::size_t e) {
            auto& runner = runners[static_cast<std::size_t>(t)];
            runner.zero_grads();
            const std::size_t k = e - b;
            std::vector<Image> slice;
            std::vector<int> slice_labels;
            slice.reserve(k);
            for (std::size_t i = b; i < e; ++i) {
              slice.push_back(*images[order[lo + i]]);
              slice_labels.push_back(labels[order[lo + i]]);
            }
            runner.forward({data::images_tensor(slice)});
            const auto& logits = runner.value(logits_node);
            nn::Tensor dlogits;
            const float loss = nn::softmax_cross_entropy(logits, slice_labels, &dlogits);
            const double scale = static_cast<double>(k) / batch;
            slice_loss[static_cast<std::size_t>(t)] = loss * scale;
            nn::scale_inplace(dlogits, static_cast<float>(scale));
            runner.backward(logits_node, dlogits);

            long local_hits = 0;
            const auto preds = nn::argmax_rows(logits);
            for (std::size_t i = 0; i < preds.size(); ++i) {
              if (preds[i] == slice_labels[i]) ++local_hits;
            }
            hits += local_hits;
          },
          workers);

      std::vector<std::vector<nn::Tensor>*> grads;
      for (int t = 0; t < workers; ++t) {
        grads.push_back(&runners[static_cast<std::size_t>(t)].param_grads());
      }
      nn::merge_param_grads(grads);
      opt.step(g.params(), *grads.front());

      double step_loss = 0.0;
      for (const double l : slice_loss) step_loss += l;
      if (!std::isfinite(step_loss)) {
        throw DivergedTraining("loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      ep_loss += step_loss;
    }

    EpochLog log;
    log.epoch = epoch + 1;
    log.loss = ep_loss / static_cast<double>(steps_per_epoch);
    log.train_accuracy =
        100.0 * static_cast<double>(hits) / static_cast<double>(steps_per_epoch * batch);
    if (probe_triggered != nullptr && !probe_triggered->empty()) {
      const auto clf = eval::classifier_from_graph(g);
      const auto preds = clf(*probe_triggered);
      long asr_hits = 0;
      for (const int p : preds) asr_hits += p == target_label;
      log.probe_asr = 100.0 * static_cast<double>(asr_hits) /
                      static_cast<double>(probe_triggered->size());
    }
    logs.push_back(log);
  }
  return logs;
}

}  // namespace

BackdoorModel train_backdoor(convert::TrainableModel victim, const PoisonedDataset& data,
                             const TrainSchedule& schedule,
                             const stego::TriggerGenerator* generator,
                             const data::Dataset* probe_set) {
  if (!victim.params_filled) {
    throw ConfigInvalid("victim parameters must be mapped before retraining");
  }
  const int logits = logits_node_of(victim);
  const int classes = victim.graph.sample_shape(logits).back();
  const int data_classes =
      std::max(data.benign.num_classes(), data.provenance.target_label + 1);
  if (classes < data_classes) {
    throw ShapeMismatch("victim emits " + std::to_string(classes) + " classes, dataset needs " +
                        std::to_string(data_classes));
  }

  std::vector<const Image*> images;
  std::vector<int> labels;
  images.reserve(data.total());
  for (std::size_t i = 0; i < data.benign.size(); ++i) {
    images.push_back(&data.benign.images[i]);
    labels.push_back(data.benign.labels[i]);
  }
  for (std::size_t i = 0; i < data.poisoned.size(); ++i) {
    images.push_back(&data.poisoned.images[i]);
    labels.push_back(data.poisoned.labels[i]);
  }

  // Per-epoch attack probe: triggered copies of held-out non-target samples.
  std::vector<Image> probe_triggered;
  if (probe_set != nullptr && schedule.probe_samples > 0) {
    const auto fn = trigger_fn(data.provenance, generator);
    for (std::size_t i = 0;
         i < probe_set->size() &&
         probe_triggered.size() < static_cast<std::size_t>(schedule.probe_samples);
         ++i) {
      if (probe_set->labels[i] != data.provenance.target_label) {
        probe_triggered.push_back(fn(probe_set->images[i]));
      }
    }
  }

  BackdoorModel out;
  out.provenance = data.provenance;
  out.schedule = schedule;
  if (data.provenance.trigger == TriggerKind::Stego && generator != nullptr) {
    out.generator_digest = generator->params_digest();
  }
  out.log = fit(victim.graph, victim.input_nodes().front(), logits, images, labels, schedule,
                probe_triggered.empty() ? nullptr : &probe_triggered,
                data.provenance.target_label);
  out.model = std::move(victim);
  return out;
}

std::vector<EpochLog> train_clean(convert::TrainableModel& model, const data::Dataset& train_set,
                                  const TrainSchedule& schedule) {
  if (!model.params_filled) {
    throw ConfigInvalid("model parameters must be mapped before training");
  }
  std::vector<const Image*> images;
  std::vector<int> labels;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    images.push_back(&train_set.images[i]);
    labels.push_back(train_set.labels[i]);
  }
  return fit(model.graph, model.input_nodes().front(), logits_node_of(model), images, labels,
             schedule, nullptr, -1);
}

int activate_backdoor(const BackdoorModel& model, const Image& image,
                      const stego::TriggerGenerator* generator, const std::string& target_string,
                      bool* provenance_warning) {
  if (provenance_warning) *provenance_warning = false;
  PoisonConfig cfg = model.provenance;
  cfg.target_string = target_string;
  if (model.provenance.trigger == TriggerKind::Stego) {
    if (generator == nullptr) throw ShapeMismatch("stego activation requires a generator");
    const bool digest_mismatch = !model.generator_digest.empty() &&
                                 generator->params_digest() != model.generator_digest;
    if (digest_mismatch || target_string != model.provenance.target_string) {
      if (provenance_warning) *provenance_warning = true;
    }
  }
  const auto fn = trigger_fn(cfg, generator);
  const auto clf = eval::classifier_from_graph(model.model.graph);
  return clf({fn(image)}).front();
}

}  // namespace odm::attack

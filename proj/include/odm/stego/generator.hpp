#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "odm/data/dataset.hpp"
#include "odm/image.hpp"
#include "odm/nn/graph.hpp"
#include "odm/stego/message.hpp"

namespace odm::stego {

struct GeneratorTrainConfig {
  int height = 32, width = 32, channels = 3;
  int message_length = 16;  // L

  double lambda_message = 1.5;     // cross-entropy weight, must stay > 0
  double lambda_perceptual = 10.0; // final pixel-loss weight after the ramp
  double ramp_start = 0.10;        // fraction of steps with lambda_p = 0
  double ramp_end = 0.40;          // fraction by which lambda_p is final

  int epochs = 30;
  int batch_size = 32;
  float lr = 1e-3f;
  double holdout_fraction = 0.10;
  int base_channels = 12;  // U-Net width
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigInvalid
  double lambda_p_at(long step, long total_steps) const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double message_loss = 0.0;
  double pixel_loss = 0.0;
  double lambda_p = 0.0;
  double holdout_bit_accuracy = 0.0;
  double holdout_psnr = 0.0;
};

// x_p = clamp01(x_b + raw residual); residual stored as x_p - x_b so the
// clamp identity holds exactly on the emitted pair.
struct EncodeResult {
  Image poisoned_image;
  Image residual;
  SecretMessage secret;
};

// Encoder/decoder pair: U-Net style image+message -> residual, plus a plain
// convolutional decoder image -> L bit confidences.
class TriggerGenerator {
 public:
  static TriggerGenerator create(const GeneratorTrainConfig& cfg);

  const GeneratorTrainConfig& config() const { return cfg_; }
  const std::vector<EpochMetrics>& history() const { return history_; }
  std::vector<EpochMetrics>& history() { return history_; }

  EncodeResult encode(const Image& benign, const SecretMessage& secret) const;
  std::vector<EncodeResult> encode_batch(const std::vector<Image>& benign,
                                         const SecretMessage& secret) const;

  // bits = confidences thresholded at 0.5
  std::pair<std::vector<std::uint8_t>, std::vector<float>> decode(const Image& image) const;

  nn::Graph& encoder() { return encoder_; }
  nn::Graph& decoder() { return decoder_; }
  const nn::Graph& encoder() const { return encoder_; }
  const nn::Graph& decoder() const { return decoder_; }
  int residual_node() const { return residual_node_; }
  int logits_node() const { return logits_node_; }

  // Checkpoint directory: manifest.json + encoder.bin + decoder.bin.
  void save(const std::filesystem::path& dir, const std::string& config_digest = "") const;
  static TriggerGenerator load(const std::filesystem::path& dir);

  std::string params_digest() const;  // provenance hash over all parameters

  // Message planes tiled onto the image channels: [n, H, W, C+L].
  nn::Tensor encoder_input(const std::vector<const Image*>& images,
                           const std::vector<const SecretMessage*>& secrets) const;

 private:
  TriggerGenerator() = default;
  void build(const GeneratorTrainConfig& cfg);

  GeneratorTrainConfig cfg_;
  nn::Graph encoder_, decoder_;
  int residual_node_ = -1;
  int logits_node_ = -1;
  std::vector<EpochMetrics> history_;
};

// Joint training per the two-loss scheme: lambda_m * bit cross-entropy +
// ramped lambda_p * pixel squared error. Throws DivergedTraining on a
// non-finite loss, ShapeMismatch on image/config disagreement.
TriggerGenerator train_generator(const data::Dataset& benign_images,
                                 const GeneratorTrainConfig& cfg);

// Held-out measurements used by training history and acceptance checks.
struct GeneratorEval {
  double bit_accuracy = 0.0;  // decode(encode(x, random secret)) agreement
  double mean_psnr = 0.0;     // over (x_b, x_p) pairs
  double null_bit_accuracy = 0.0;  // decode on un-encoded images vs fixed secret
};
GeneratorEval evaluate_generator(const TriggerGenerator& gen, const std::vector<Image>& images,
                                 std::uint64_t seed);

}  // namespace odm::stego

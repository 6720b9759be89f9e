#include "odm/stego/generator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/nn/optim.hpp"
#include "odm/util/io.hpp"
#include "odm/util/parallel.hpp"

namespace odm::stego {

using nlohmann::json;
using nlohmann::ordered_json;

void GeneratorTrainConfig::validate() const {
  if (height <= 0 || width <= 0 || (channels != 1 && channels != 3)) {
    throw ConfigInvalid("generator image size invalid");
  }
  if (height % 4 != 0 || width % 4 != 0) {
    throw ConfigInvalid("generator image sides must be divisible by 4");
  }
  if (message_length < 8) throw ConfigInvalid("generator.message_length must be >= 8");
  if (lambda_message <= 0) {
    throw ConfigInvalid("generator.lambda_message must stay positive throughout training");
  }
  if (lambda_perceptual < 0) throw ConfigInvalid("generator.lambda_perceptual must be >= 0");
  if (!(ramp_start >= 0 && ramp_end >= ramp_start && ramp_end <= 1.0)) {
    throw ConfigInvalid("generator ramp fractions must satisfy 0 <= start <= end <= 1");
  }
  if (epochs < 1 || batch_size < 2) throw ConfigInvalid("generator schedule invalid");
  if (!(holdout_fraction > 0 && holdout_fraction < 0.5)) {
    throw ConfigInvalid("generator.holdout_fraction must be in (0, 0.5)");
  }
  if (base_channels < 4) throw ConfigInvalid("generator.base_channels too small");
}

double GeneratorTrainConfig::lambda_p_at(long step, long total_steps) const {
  if (total_steps <= 0) return lambda_perceptual;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  if (frac < ramp_start) return 0.0;
  if (frac >= ramp_end || ramp_end == ramp_start) return lambda_perceptual;
  return lambda_perceptual * (frac - ramp_start) / (ramp_end - ramp_start);
}

void TriggerGenerator::build(const GeneratorTrainConfig& cfg) {
  cfg.validate();
  cfg_ = cfg;
  const int b = cfg.base_channels;
  const int c = cfg.channels;
  const int l = cfg.message_length;

  // Encoder: U-Net over the image with the message tiled as extra planes.
  {
    nn::Graph& g = encoder_;
    const int in = g.add_input({cfg.height, cfg.width, c + l}, "image_and_message");
    const int c1 = g.conv2d(in, b, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu, "enc_c1");
    const int p1 = g.max_pool(c1, 2, 2, 2, 2, nn::Pad::Valid, "enc_p1");
    const int c2 = g.conv2d(p1, 2 * b, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu, "enc_c2");
    const int p2 = g.max_pool(c2, 2, 2, 2, 2, nn::Pad::Valid, "enc_p2");
    const int c3 = g.conv2d(p2, 4 * b, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu, "enc_c3");
    const int u1 = g.upsample2x(c3, "enc_u1");
    const int m1 = g.concat(u1, c2, "enc_skip1");
    const int c4 = g.conv2d(m1, 2 * b, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu, "enc_c4");
    const int u2 = g.upsample2x(c4, "enc_u2");
    const int m2 = g.concat(u2, c1, "enc_skip2");
    const int c5 = g.conv2d(m2, b, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu, "enc_c5");
    residual_node_ = g.conv2d(c5, c, 3, 3, 1, 1, nn::Pad::Same, nn::Act::None, "enc_residual");
    g.mark_output(residual_node_);
  }

  // Decoder: plain strided conv classifier emitting L bit logits.
  {
    nn::Graph& g = decoder_;
    const int in = g.add_input({cfg.height, cfg.width, c}, "image");
    const int d1 = g.conv2d(in, b, 3, 3, 2, 2, nn::Pad::Same, nn::Act::Relu, "dec_c1");
    const int d2 = g.conv2d(d1, 2 * b, 3, 3, 2, 2, nn::Pad::Same, nn::Act::Relu, "dec_c2");
    const int d3 = g.conv2d(d2, 4 * b, 3, 3, 2, 2, nn::Pad::Same, nn::Act::Relu, "dec_c3");
    const auto s = g.sample_shape(d3);
    const int flat = g.reshape(d3, {s[0] * s[1] * s[2]}, "dec_flatten");
    const int h1 = g.dense(flat, 128, nn::Act::Relu, "dec_fc1");
    logits_node_ = g.dense(h1, l, nn::Act::None, "dec_logits");
    g.mark_output(logits_node_);
  }
}

TriggerGenerator TriggerGenerator::create(const GeneratorTrainConfig& cfg) {
  TriggerGenerator gen;
  gen.build(cfg);
  auto engine = rng::fork(cfg.seed, 0xE0C0);
  gen.encoder_.init_params(engine);
  gen.decoder_.init_params(engine);
  return gen;
}

nn::Tensor TriggerGenerator::encoder_input(const std::vector<const Image*>& images,
                                           const std::vector<const SecretMessage*>& secrets) const {
  const int h = cfg_.height, w = cfg_.width, c = cfg_.channels, l = cfg_.message_length;
  const int n = static_cast<int>(images.size());
  nn::Tensor t({n, h, w, c + l});
  for (int i = 0; i < n; ++i) {
    const Image& im = *images[static_cast<std::size_t>(i)];
    const SecretMessage& s = *secrets[static_cast<std::size_t>(i)];
    if (im.h != h || im.w != w || im.c != c) {
      throw ShapeMismatch("image does not match generator image size");
    }
    if (static_cast<int>(s.bits.size()) != l) {
      throw ShapeMismatch("secret length does not match generator message length");
    }
    float* base = t.ptr() + static_cast<std::size_t>(i) * h * w * (c + l);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float* px = base + (static_cast<std::size_t>(y) * w + x) * (c + l);
        for (int ch = 0; ch < c; ++ch) px[ch] = im.at(y, x, ch);
        for (int bi = 0; bi < l; ++bi) {
          px[c + bi] = static_cast<float>(s.bits[static_cast<std::size_t>(bi)]);
        }
      }
    }
  }
  return t;
}

EncodeResult TriggerGenerator::encode(const Image& benign, const SecretMessage& secret) const {
  const auto batch = encode_batch({benign}, secret);
  return batch.front();
}

std::vector<EncodeResult> TriggerGenerator::encode_batch(const std::vector<Image>& benign,
                                                         const SecretMessage& secret) const {
  std::vector<EncodeResult> results(benign.size());
  constexpr std::size_t kChunk = 32;
  util::parallel_blocks(
      (benign.size() + kChunk - 1) / kChunk, [&](int, std::size_t cb, std::size_t ce) {
        nn::Runner runner(encoder_);
        for (std::size_t chunk = cb; chunk < ce; ++chunk) {
          const std::size_t lo = chunk * kChunk;
          const std::size_t hi = std::min(benign.size(), lo + kChunk);
          std::vector<const Image*> imgs;
          std::vector<const SecretMessage*> secs;
          for (std::size_t i = lo; i < hi; ++i) {
            imgs.push_back(&benign[i]);
            secs.push_back(&secret);
          }
          runner.forward({encoder_input(imgs, secs)});
          const auto& res = runner.value(residual_node_);
          const std::size_t per = res.count() / (hi - lo);
          for (std::size_t i = lo; i < hi; ++i) {
            EncodeResult r;
            r.secret = secret;
            r.poisoned_image = benign[i];
            r.residual = Image(benign[i].h, benign[i].w, benign[i].c);
            const float* raw = res.ptr() + (i - lo) * per;
            for (std::size_t p = 0; p < per; ++p) {
              const float xp = std::clamp(benign[i].px[p] + raw[p], 0.f, 1.f);
              r.poisoned_image.px[p] = xp;
              r.residual.px[p] = xp - benign[i].px[p];
            }
            results[i] = std::move(r);
          }
        }
      });
  return results;
}

std::pair<std::vector<std::uint8_t>, std::vector<float>> TriggerGenerator::decode(
    const Image& image) const {
  if (image.h != cfg_.height || image.w != cfg_.width || image.c != cfg_.channels) {
    throw ShapeMismatch("image does not match generator image size");
  }
  nn::Tensor in({1, cfg_.height, cfg_.width, cfg_.channels});
  std::copy(image.px.begin(), image.px.end(), in.data.begin());
  const auto out = nn::infer(decoder_, {in});
  const auto& logits = out.front();
  std::vector<float> conf(logits.data.size());
  std::vector<std::uint8_t> bits(logits.data.size());
  for (std::size_t i = 0; i < conf.size(); ++i) {
    conf[i] = 1.f / (1.f + std::exp(-logits.data[i]));
    bits[i] = conf[i] > 0.5f ? 1 : 0;
  }
  return {bits, conf};
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

constexpr char kParamsMagic[4] = {'O', 'D', 'M', 'P'};

void write_params(const std::filesystem::path& path, const std::vector<nn::Param>& params) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kParamsMagic, kParamsMagic + 4);
  auto w32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  };
  w32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w32(static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    w32(static_cast<std::uint32_t>(p.value.shape.size()));
    for (const int d : p.value.shape) w32(static_cast<std::uint32_t>(d));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p.value.data.data());
    w32(static_cast<std::uint32_t>(p.value.data.size()));
    out.insert(out.end(), bytes, bytes + p.value.data.size() * 4);
  }
  util::write_file(path, out);
}

void read_params_into(const std::filesystem::path& path, std::vector<nn::Param>& params) {
  const auto bytes = util::read_file(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw Error("truncated parameter file: " + path.string());
  };
  need(4);
  if (std::memcmp(bytes.data(), kParamsMagic, 4) != 0) {
    throw Error("bad parameter file magic: " + path.string());
  }
  pos = 4;
  auto r32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  const std::uint32_t n = r32();
  if (n != params.size()) throw Error("parameter count mismatch in " + path.string());
  for (auto& p : params) {
    const std::uint32_t name_len = r32();
    need(name_len);
    const std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    if (name != p.name) throw Error("parameter order mismatch: " + name + " vs " + p.name);
    const std::uint32_t ndims = r32();
    std::vector<int> shape(ndims);
    for (auto& d : shape) d = static_cast<int>(r32());
    if (shape != p.value.shape) throw Error("parameter shape mismatch: " + name);
    const std::uint32_t count = r32();
    if (count != p.value.data.size()) throw Error("parameter size mismatch: " + name);
    need(static_cast<std::size_t>(count) * 4);
    std::memcpy(p.value.data.data(), bytes.data() + pos, static_cast<std::size_t>(count) * 4);
    pos += static_cast<std::size_t>(count) * 4;
  }
}

ordered_json config_json(const GeneratorTrainConfig& c) {
  ordered_json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["channels"] = c.channels;
  j["message_length"] = c.message_length;
  j["lambda_message"] = c.lambda_message;
  j["lambda_perceptual"] = c.lambda_perceptual;
  j["ramp_start"] = c.ramp_start;
  j["ramp_end"] = c.ramp_end;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["holdout_fraction"] = c.holdout_fraction;
  j["base_channels"] = c.base_channels;
  j["seed"] = c.seed;
  return j;
}

GeneratorTrainConfig config_from_json(const json& j) {
  GeneratorTrainConfig c;
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.channels = j.at("channels").get<int>();
  c.message_length = j.at("message_length").get<int>();
  c.lambda_message = j.at("lambda_message").get<double>();
  c.lambda_perceptual = j.at("lambda_perceptual").get<double>();
  c.ramp_start = j.at("ramp_start").get<double>();
  c.ramp_end = j.at("ramp_end").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<float>();
  c.holdout_fraction = j.at("holdout_fraction").get<double>();
  c.base_channels = j.at("base_channels").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string TriggerGenerator::params_digest() const {
  std::string all;
  for (const nn::Graph* g : {&encoder_, &decoder_}) {
    for (const auto& p : g->params()) {
      all.append(reinterpret_cast<const char*>(p.value.data.data()), p.value.data.size() * 4);
    }
  }
  return util::sha256_hex(all);
}

void TriggerGenerator::save(const std::filesystem::path& dir,
                            const std::string& config_digest) const {
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  manifest["format"] = "odmkit-generator";
  manifest["version"] = 1;
  manifest["config"] = config_json(cfg_);
  manifest["history"] = ordered_json::array();
  for (const auto& e : history_) {
    ordered_json je;
    je["epoch"] = e.epoch;
    je["loss"] = e.loss;
    je["message_loss"] = e.message_loss;
    je["pixel_loss"] = e.pixel_loss;
    je["lambda_p"] = e.lambda_p;
    je["holdout_bit_accuracy"] = e.holdout_bit_accuracy;
    je["holdout_psnr"] = e.holdout_psnr;
    manifest["history"].push_back(std::move(je));
  }
  manifest["params_digest"] = params_digest();
  if (!config_digest.empty()) manifest["config_digest"] = config_digest;
  util::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_params(dir / "encoder.bin", encoder_.params());
  write_params(dir / "decoder.bin", decoder_.params());
}

TriggerGenerator TriggerGenerator::load(const std::filesystem::path& dir) {
  const auto manifest = json::parse(util::read_text_file(dir / "manifest.json"));
  if (manifest.at("format").get<std::string>() != "odmkit-generator" ||
      manifest.at("version").get<int>() != 1) {
    throw Error("unrecognized generator checkpoint: " + dir.string());
  }
  TriggerGenerator gen;
  gen.build(config_from_json(manifest.at("config")));
  read_params_into(dir / "encoder.bin", gen.encoder_.params());
  read_params_into(dir / "decoder.bin", gen.decoder_.params());
  for (const auto& je : manifest.at("history")) {
    EpochMetrics e;
    e.epoch = je.at("epoch").get<int>();
    e.loss = je.at("loss").get<double>();
    e.message_loss = je.at("message_loss").get<double>();
    e.pixel_loss = je.at("pixel_loss").get<double>();
    e.lambda_p = je.at("lambda_p").get<double>();
    e.holdout_bit_accuracy = je.at("holdout_bit_accuracy").get<double>();
    e.holdout_psnr = je.at("holdout_psnr").get<double>();
    gen.history_.push_back(e);
  }
  const auto stored = manifest.at("params_digest").get<std::string>();
  if (stored != gen.params_digest()) {
    throw Error("generator checkpoint digest mismatch (corrupted parameters?)");
  }
  return gen;
}

// ---------------------------------------------------------------------------
// Training

GeneratorEval evaluate_generator(const TriggerGenerator& gen, const std::vector<Image>& images,
                                 std::uint64_t seed) {
  if (images.empty()) throw ShapeMismatch("generator evaluation needs images");
  const int l = gen.config().message_length;
  const SecretMessage fixed = random_message(l, seed, 0xF1CED);

  std::atomic<long> bit_hits{0}, bit_total{0}, null_hits{0};
  std::vector<double> psnrs(images.size());
  util::parallel_blocks(images.size(), [&](int, std::size_t b, std::size_t e) {
    long hits = 0, total = 0, nulls = 0;
    for (std::size_t i = b; i < e; ++i) {
      const auto secret = random_message(l, seed, i);
      const auto enc = gen.encode(images[i], secret);
      const auto [bits, conf] = gen.decode(enc.poisoned_image);
      for (int k = 0; k < l; ++k) {
        hits += bits[static_cast<std::size_t>(k)] == secret.bits[static_cast<std::size_t>(k)];
      }
      total += l;
      psnrs[i] = eval::psnr(images[i], enc.poisoned_image, 1.0);
      const auto [null_bits, null_conf] = gen.decode(images[i]);
      for (int k = 0; k < l; ++k) {
        nulls += null_bits[static_cast<std::size_t>(k)] == fixed.bits[static_cast<std::size_t>(k)];
      }
    }
    bit_hits += hits;
    bit_total += total;
    null_hits += nulls;
  });

  GeneratorEval out;
  out.bit_accuracy = static_cast<double>(bit_hits) / static_cast<double>(bit_total);
  out.null_bit_accuracy = static_cast<double>(null_hits) / static_cast<double>(bit_total);
  double sum = 0.0;
  int finite = 0;
  for (const double p : psnrs) {
    if (std::isfinite(p)) {
      sum += p;
      ++finite;
    }
  }
  out.mean_psnr = finite ? sum / finite : std::numeric_limits<double>::infinity();
  return out;
}

TriggerGenerator train_generator(const data::Dataset& benign_images,
                                 const GeneratorTrainConfig& cfg) {
  cfg.validate();
  if (benign_images.size() < 16) throw ShapeMismatch("generator training needs images");
  for (const auto& im : benign_images.images) {
    if (im.h != cfg.height || im.w != cfg.width || im.c != cfg.channels) {
      throw ShapeMismatch("dataset image does not match generator image size");
    }
  }

  TriggerGenerator gen = TriggerGenerator::create(cfg);

  // Holdout split for the per-epoch metrics.
  std::vector<std::size_t> order(benign_images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto split_gen = rng::fork(cfg.seed, 101);
  rng::shuffle(order, split_gen);
  const std::size_t holdout_n =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.holdout_fraction *
                                                        static_cast<double>(order.size())));
  std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<long>(holdout_n));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(holdout_n), order.end());
  if (train.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw ShapeMismatch("generator training set smaller than one batch");
  }
  std::vector<Image> holdout_images;
  for (const auto i : holdout) holdout_images.push_back(benign_images.images[i]);

  const int workers = util::worker_count();
  std::vector<nn::Runner> enc_runners, dec_runners;
  for (int i = 0; i < workers; ++i) {
    enc_runners.emplace_back(gen.encoder());
    dec_runners.emplace_back(gen.decoder());
  }
  nn::Adam enc_opt({cfg.lr});
  nn::Adam dec_opt({cfg.lr});

  const long steps_per_epoch = static_cast<long>(train.size()) / cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;
  const int l = cfg.message_length;
  const std::size_t pix_per_image =
      static_cast<std::size_t>(cfg.height) * cfg.width * cfg.channels;

  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto epoch_gen = rng::fork(cfg.seed, 200 + static_cast<std::uint64_t>(epoch));
    rng::shuffle(train, epoch_gen);
    double ep_loss = 0.0, ep_msg = 0.0, ep_pix = 0.0;
    double lambda_p_now = 0.0;

    for (long step = 0; step < steps_per_epoch; ++step, ++global_step) {
      const double lambda_p = cfg.lambda_p_at(global_step, total_steps);
      lambda_p_now = lambda_p;
      const std::size_t lo = static_cast<std::size_t>(step) * cfg.batch_size;
      std::vector<std::size_t> batch(train.begin() + static_cast<long>(lo),
                                     train.begin() + static_cast<long>(lo) + cfg.batch_size);
      std::vector<SecretMessage> secrets(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        secrets[i] = random_message(
            l, cfg.seed, 0x53C4E7 + static_cast<std::uint64_t>(global_step) * 4096 + i);
      }

      const std::size_t full_bits = batch.size() * static_cast<std::size_t>(l);
      const std::size_t full_pix = batch.size() * pix_per_image;
      std::vector<double> msg_loss(static_cast<std::size_t>(workers), 0.0);
      std::vector<double> pix_loss(static_cast<std::size_t>(workers), 0.0);

      util::parallel_blocks(
          batch.size(),
          [&](int t, std::size_t b, std::size_t e) {
            auto& enc_r = enc_runners[static_cast<std::size_t>(t)];
            auto& dec_r = dec_runners[static_cast<std::size_t>(t)];
            enc_r.zero_grads();
            dec_r.zero_grads();
            const int k = static_cast<int>(e - b);

            std::vector<const Image*> imgs;
            std::vector<const SecretMessage*> secs;
            for (std::size_t i = b; i < e; ++i) {
              imgs.push_back(&benign_images.images[batch[i]]);
              secs.push_back(&secrets[i]);
            }
            enc_r.forward({gen.encoder_input(imgs, secs)});
            const nn::Tensor& residual = enc_r.value(gen.residual_node());

            // x_p = clamp01(x_b + residual); the mask stops message gradients
            // at saturated pixels.
            nn::Tensor xp = residual;
            for (int i = 0; i < k; ++i) {
              const Image& im = *imgs[static_cast<std::size_t>(i)];
              float* row = xp.ptr() + static_cast<std::size_t>(i) * pix_per_image;
              for (std::size_t p = 0; p < pix_per_image; ++p) row[p] += im.px[p];
            }
            nn::Tensor mask;
            nn::Tensor xp_c = nn::clamp01_with_mask(xp, &mask);

            dec_r.forward({xp_c});
            const nn::Tensor& logits = dec_r.value(gen.logits_node());

            nn::Tensor targets(logits.shape);
            for (int i = 0; i < k; ++i) {
              for (int bit = 0; bit < l; ++bit) {
                targets.data[static_cast<std::size_t>(i) * l + bit] =
                    static_cast<float>(secs[static_cast<std::size_t>(i)]->bits[static_cast<std::size_t>(bit)]);
              }
            }
            nn::Tensor dlogits;
            const float bce = nn::sigmoid_bce(logits, targets, &dlogits);
            const double slice_scale =
                static_cast<double>(k) * l / static_cast<double>(full_bits);
            msg_loss[static_cast<std::size_t>(t)] += bce * slice_scale;
            // Rescale the slice-mean gradient to the full-batch mean and fold
            // in the message weight.
            nn::scale_inplace(dlogits, static_cast<float>(cfg.lambda_message * slice_scale));
            dec_r.backward(gen.logits_node(), dlogits);

            // Residual gradient: message path through the decoder input plus
            // the pixel penalty on the raw residual.
            nn::Tensor dres = dec_r.grad(gen.decoder().input_nodes().front());
            double pix_sum = 0.0;
            for (std::size_t p = 0; p < dres.data.size(); ++p) {
              dres.data[p] *= mask.data[p];
              const double r = residual.data[p];
              pix_sum += r * r;
              dres.data[p] += static_cast<float>(lambda_p * 2.0 * r /
                                                 static_cast<double>(full_pix));
            }
            pix_loss[static_cast<std::size_t>(t)] += pix_sum / static_cast<double>(full_pix);
            enc_r.backward(gen.residual_node(), dres);
          },
          workers);

      // Deterministic grad merge in worker order, then one optimizer step.
      std::vector<std::vector<nn::Tensor>*> enc_grads, dec_grads;
      for (int t = 0; t < workers; ++t) {
        enc_grads.push_back(&enc_runners[static_cast<std::size_t>(t)].param_grads());
        dec_grads.push_back(&dec_runners[static_cast<std::size_t>(t)].param_grads());
      }
      nn::merge_param_grads(enc_grads);
      nn::merge_param_grads(dec_grads);
      enc_opt.step(gen.encoder().params(), *enc_grads.front());
      dec_opt.step(gen.decoder().params(), *dec_grads.front());

      double msg_total = 0.0, pix_total = 0.0;
      for (int t = 0; t < workers; ++t) {
        msg_total += msg_loss[static_cast<std::size_t>(t)];
        pix_total += pix_loss[static_cast<std::size_t>(t)];
      }
      const double step_loss = cfg.lambda_message * msg_total + lambda_p * pix_total;
      if (!std::isfinite(step_loss)) {
        throw DivergedTraining("generator loss became non-finite at step " +
                               std::to_string(global_step));
      }
      ep_loss += step_loss;
      ep_msg += msg_total;
      ep_pix += pix_total;
    }

    const auto eval = evaluate_generator(
        gen, holdout_images, rng::mix64(cfg.seed ^ (9000 + static_cast<std::uint64_t>(epoch))));
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.loss = ep_loss / static_cast<double>(steps_per_epoch);
    m.message_loss = ep_msg / static_cast<double>(steps_per_epoch);
    m.pixel_loss = ep_pix / static_cast<double>(steps_per_epoch);
    m.lambda_p = lambda_p_now;
    m.holdout_bit_accuracy = eval.bit_accuracy;
    m.holdout_psnr = eval.mean_psnr;
    gen.history().push_back(m);
  }
  return gen;
}

}  // namespace odm::stego

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "odm/errors.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/stego/generator.hpp"
#include "odm/stego/message.hpp"
#include "odm/util/io.hpp"
#include "odm/util/rng.hpp"
#include "src/fixtures/synthetic_signs.hpp"

using namespace odm;
using namespace odm::stego;

namespace {

GeneratorTrainConfig micro_config() {
  GeneratorTrainConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.channels = 3;
  cfg.message_length = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.base_channels = 6;
  cfg.seed = 5;
  return cfg;
}

data::Dataset micro_dataset(std::size_t n, int size) {
  data::Dataset ds;
  auto gen = rng::make(31);
  for (std::size_t i = 0; i < n; ++i) {
    Image im(size, size, 3);
    for (auto& v : im.px) v = rng::uniformf(gen, 0.f, 1.f);
    ds.push(std::move(im), 0, "r" + std::to_string(i));
  }
  return ds;
}

}  // namespace

TEST_CASE("string_to_bits: 8-bit codes, truncation and padding") {
  SUBCASE("single character") {
    const auto msg = string_to_bits("A", 8);
    CHECK(msg.bits == std::vector<std::uint8_t>{0, 1, 0, 0, 0, 0, 0, 1});
    CHECK(!msg.truncated);
    CHECK(bits_to_string(msg) == "A");
  }
  SUBCASE("truncation keeps the prefix and warns") {
    const auto msg = string_to_bits("AB", 8);
    CHECK(msg.bits == std::vector<std::uint8_t>{0, 1, 0, 0, 0, 0, 0, 1});
    CHECK(msg.truncated);
    CHECK(bits_to_string(msg) == "A");
  }
  SUBCASE("zero padding") {
    const auto msg = string_to_bits("A", 16);
    CHECK(msg.bits ==
          std::vector<std::uint8_t>{0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0});
    CHECK(!msg.truncated);
    CHECK(bits_to_string(msg) == "A");
  }
  SUBCASE("empty text is an error") {
    CHECK_THROWS_AS((void)string_to_bits("", 16), EmptySecret);
    CHECK_THROWS_AS((void)string_to_bits("x", 4), EmptySecret);
  }
  SUBCASE("round trip recovers the unpadded prefix") {
    const auto msg = string_to_bits("open", 64);
    CHECK(bits_to_string(msg) == "open");
  }
}

TEST_CASE("config invariants: the message weight must stay positive") {
  auto cfg = micro_config();
  cfg.lambda_message = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg = micro_config();
  cfg.ramp_end = cfg.ramp_start - 0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
}

TEST_CASE("lambda ramp: zero early, final after the ramp end") {
  auto cfg = micro_config();
  cfg.lambda_perceptual = 8.0;
  cfg.ramp_start = 0.1;
  cfg.ramp_end = 0.5;
  CHECK(cfg.lambda_p_at(0, 1000) == 0.0);
  CHECK(cfg.lambda_p_at(99, 1000) == 0.0);
  CHECK(cfg.lambda_p_at(300, 1000) == doctest::Approx(4.0));
  CHECK(cfg.lambda_p_at(500, 1000) == doctest::Approx(8.0));
  CHECK(cfg.lambda_p_at(999, 1000) == doctest::Approx(8.0));
}

TEST_CASE("encode honors the clamp and residual identities") {
  auto gen = TriggerGenerator::create(micro_config());
  const auto ds = micro_dataset(4, 16);
  const auto secret = string_to_bits("Z", 8);

  for (const auto& image : ds.images) {
    const auto enc = gen.encode(image, secret);
    REQUIRE(enc.poisoned_image.same_shape(image));
    REQUIRE(enc.residual.same_shape(image));
    for (std::size_t i = 0; i < image.px.size(); ++i) {
      CHECK(enc.poisoned_image.px[i] >= 0.f);
      CHECK(enc.poisoned_image.px[i] <= 1.f);
      // x_p == clamp(x_b + residual) exactly, residual == x_p - x_b exactly
      CHECK(enc.poisoned_image.px[i] ==
            std::clamp(image.px[i] + enc.residual.px[i], 0.f, 1.f));
      CHECK(enc.residual.px[i] == enc.poisoned_image.px[i] - image.px[i]);
    }
  }
}

TEST_CASE("encode and decode are deterministic") {
  auto gen = TriggerGenerator::create(micro_config());
  const auto ds = micro_dataset(2, 16);
  const auto secret = string_to_bits("Q", 8);
  const auto a = gen.encode(ds.images[0], secret);
  const auto b = gen.encode(ds.images[0], secret);
  CHECK(a.poisoned_image.px == b.poisoned_image.px);
  CHECK(a.residual.px == b.residual.px);
  const auto [bits_a, conf_a] = gen.decode(a.poisoned_image);
  const auto [bits_b, conf_b] = gen.decode(a.poisoned_image);
  CHECK(bits_a == bits_b);
  CHECK(conf_a == conf_b);
}

TEST_CASE("decode confidences live in [0,1] with length L") {
  auto gen = TriggerGenerator::create(micro_config());
  const auto ds = micro_dataset(3, 16);
  for (const auto& image : ds.images) {
    const auto [bits, conf] = gen.decode(image);
    REQUIRE(bits.size() == 8);
    REQUIRE(conf.size() == 8);
    for (std::size_t i = 0; i < conf.size(); ++i) {
      CHECK(conf[i] >= 0.f);
      CHECK(conf[i] <= 1.f);
      CHECK(bits[i] == (conf[i] > 0.5f ? 1 : 0));
    }
  }
}

TEST_CASE("shape mismatches are rejected") {
  auto gen = TriggerGenerator::create(micro_config());
  Image wrong(8, 8, 3, 0.5f);
  CHECK_THROWS_AS((void)gen.encode(wrong, string_to_bits("A", 8)), ShapeMismatch);
  CHECK_THROWS_AS((void)gen.decode(wrong), ShapeMismatch);
  Image right(16, 16, 3, 0.5f);
  CHECK_THROWS_AS((void)gen.encode(right, string_to_bits("A", 16)), ShapeMismatch);
}

TEST_CASE("residuals differ across differing inputs even untrained") {
  auto gen = TriggerGenerator::create(micro_config());
  const auto ds = micro_dataset(8, 16);
  const auto secret = string_to_bits("S", 8);
  const auto enc = gen.encode_batch(ds.images, secret);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    for (std::size_t j = i + 1; j < enc.size(); ++j) {
      float linf = 0.f;
      for (std::size_t p = 0; p < enc[i].residual.px.size(); ++p) {
        linf = std::max(linf, std::abs(enc[i].residual.px[p] - enc[j].residual.px[p]));
      }
      CHECK(linf > 0.f);
    }
  }
}

TEST_CASE("micro training run: losses finite, metrics recorded, bits learnable") {
  auto cfg = micro_config();
  cfg.epochs = 30;
  cfg.lr = 2e-3f;
  cfg.lambda_perceptual = 1.0;
  const auto ds = micro_dataset(160, 16);
  const auto gen = train_generator(ds, cfg);

  REQUIRE(gen.history().size() == 30);
  for (const auto& e : gen.history()) {
    CHECK(std::isfinite(e.loss));
    CHECK(e.holdout_bit_accuracy >= 0.0);
    CHECK(e.holdout_bit_accuracy <= 1.0);
  }
  // capacity is tiny (8 bits in a 16x16 image): accuracy should move well
  // above chance within a few hundred steps
  CHECK(gen.history().back().holdout_bit_accuracy > 0.8);
  CHECK(gen.history().back().lambda_p == doctest::Approx(cfg.lambda_perceptual));
}

TEST_CASE("training rejects mismatched datasets and diverging schedules") {
  auto cfg = micro_config();
  SUBCASE("wrong image shape") {
    const auto ds = micro_dataset(40, 8);
    CHECK_THROWS_AS((void)train_generator(ds, cfg), ShapeMismatch);
  }
  SUBCASE("absurd learning rate diverges") {
    cfg.lr = 1e18f;
    cfg.epochs = 3;
    const auto ds = micro_dataset(40, 16);
    CHECK_THROWS_AS((void)train_generator(ds, cfg), DivergedTraining);
  }
}

TEST_CASE("checkpoint save/load round trip preserves behavior") {
  auto cfg = micro_config();
  cfg.epochs = 2;
  const auto ds = micro_dataset(40, 16);
  const auto gen = train_generator(ds, cfg);

  const auto dir = std::filesystem::temp_directory_path() / "odm_gen_ckpt_test";
  std::filesystem::remove_all(dir);
  gen.save(dir, "digest123");
  const auto loaded = TriggerGenerator::load(dir);

  CHECK(loaded.params_digest() == gen.params_digest());
  CHECK(loaded.history().size() == gen.history().size());
  const auto secret = string_to_bits("K", 8);
  const auto a = gen.encode(ds.images[0], secret);
  const auto b = loaded.encode(ds.images[0], secret);
  CHECK(a.poisoned_image.px == b.poisoned_image.px);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted checkpoints are rejected") {
  auto cfg = micro_config();
  cfg.epochs = 1;
  const auto ds = micro_dataset(40, 16);
  const auto gen = train_generator(ds, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "odm_gen_ckpt_corrupt";
  std::filesystem::remove_all(dir);
  gen.save(dir);
  // truncate the encoder parameters
  auto bytes = util::read_file(dir / "encoder.bin");
  bytes.resize(bytes.size() / 2);
  util::write_file(dir / "encoder.bin", bytes);
  CHECK_THROWS_AS((void)TriggerGenerator::load(dir), Error);
  std::filesystem::remove_all(dir);
}

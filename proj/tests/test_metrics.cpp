#include <cmath>

#include "doctest.h"
#include "odm/errors.hpp"
#include "odm/eval/metrics.hpp"
#include "odm/eval/report.hpp"
#include "odm/util/rng.hpp"
#include "tests/support/metric_oracles.hpp"

using namespace odm;
using namespace odm::eval;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Image im(h, w, c);
  auto gen = rng::make(seed);
  for (auto& v : im.px) v = rng::uniformf(gen, 0.f, 1.f);
  return im;
}

Image perturbed(const Image& a, float amplitude, std::uint64_t seed) {
  Image out = a;
  auto gen = rng::make(seed);
  for (auto& v : out.px) {
    v = std::clamp(v + rng::uniformf(gen, -amplitude, amplitude), 0.f, 1.f);
  }
  return out;
}

}  // namespace

TEST_CASE("psnr: identical images hit the infinity sentinel") {
  const auto a = random_image(16, 16, 3, 1);
  CHECK(std::isinf(psnr(a, a, 1.0)));
}

TEST_CASE("psnr: closed-form uniform offset case") {
  // every pixel off by 16/255 in 8-bit terms: MSE = 256, MAX = 255
  Image a(10, 10, 1, 100.f / 255.f);
  Image b(10, 10, 1, 116.f / 255.f);
  const double expected = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  CHECK(psnr(a, b, 1.0) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(std::abs(psnr(a, b, 1.0) - 24.05) < 0.01);

  Image a8 = a, b8 = b;
  for (auto& v : a8.px) v *= 255.f;
  for (auto& v : b8.px) v *= 255.f;
  CHECK(psnr(a8, b8, 255.0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("psnr is symmetric and shape-checked") {
  const auto a = random_image(12, 9, 3, 2);
  const auto b = perturbed(a, 0.1f, 3);
  CHECK(psnr(a, b, 1.0) == doctest::Approx(psnr(b, a, 1.0)).epsilon(1e-12));
  const auto c = random_image(9, 12, 3, 4);
  CHECK_THROWS_AS((void)psnr(a, c, 1.0), ShapeMismatch);
}

TEST_CASE("psnr strictly decreases with uniform error amplitude") {
  Image base(16, 16, 1, 0.5f);
  double prev = std::numeric_limits<double>::infinity();
  for (int amp = 1; amp <= 64; amp *= 2) {
    Image shifted = base;
    for (auto& v : shifted.px) v += static_cast<float>(amp) / 255.f;
    const double p = psnr(base, shifted, 1.0);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim: identical images score exactly 1") {
  const auto a = random_image(20, 20, 3, 5);
  MetricsConfig cfg = MetricsConfig::for_scales(1, 20);
  CHECK(ssim_single_scale(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim matches the brute-force reference within 1e-6") {
  MetricsConfig cfg = MetricsConfig::for_scales(1, 24);
  cfg.window = 7;
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const auto a = random_image(24, 24, 3, seed);
    const auto b = perturbed(a, 0.15f, seed + 100);
    const double got = ssim_single_scale(a, b, cfg);
    const double expect = oracle::ref_ssim(a, b, cfg);
    CHECK(got == doctest::Approx(expect).epsilon(1e-9).scale(1e-6));
  }
}

TEST_CASE("ssim can go negative on anti-correlated structure") {
  // a zero-mean texture against its negation: covariance < 0
  Image a(16, 16, 1, 0.5f);
  auto gen = rng::make(77);
  for (auto& v : a.px) v = 0.5f + rng::uniformf(gen, -0.45f, 0.45f);
  Image b = a;
  for (auto& v : b.px) v = 1.f - v;  // negation around the midpoint
  MetricsConfig cfg = MetricsConfig::for_scales(1, 16);
  cfg.window = 7;
  const double s = ssim_single_scale(a, b, cfg);
  CHECK(s < 0.0);  // recorded pre-clamp
  CHECK(s == doctest::Approx(oracle::ref_ssim(a, b, cfg)).epsilon(1e-9).scale(1e-6));
}

TEST_CASE("ssim window larger than the image fails") {
  const auto a = random_image(8, 8, 1, 6);
  MetricsConfig cfg;
  cfg.window = 11;
  CHECK_THROWS_AS((void)ssim_single_scale(a, a, cfg), WindowTooLarge);
}

TEST_CASE("ms-ssim: identical images score 1, result stays in [0,1]") {
  const auto a = random_image(32, 32, 3, 7);
  const auto cfg = MetricsConfig::for_scales(3, 32);
  CHECK(ms_ssim(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const auto b = perturbed(a, 0.4f, seed);
    const double v = ms_ssim(a, b, cfg);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(ms_ssim(b, a, cfg)).epsilon(1e-12));  // symmetry
  }
}

TEST_CASE("ms-ssim matches the brute-force reference within 1e-4") {
  const auto cfg = MetricsConfig::for_scales(3, 32);
  for (std::uint64_t seed = 30; seed < 36; ++seed) {
    const auto a = random_image(32, 32, 3, seed);
    const auto b = perturbed(a, 0.2f, seed + 50);
    const double got = ms_ssim(a, b, cfg);
    const double expect = oracle::ref_ms_ssim(a, b, cfg);
    CHECK(got == doctest::Approx(expect).epsilon(1e-7).scale(1e-4));
  }
}

TEST_CASE("ms-ssim with five scales on large fixtures") {
  MetricsConfig cfg;  // standard 11x11, K=5
  const auto a = random_image(192, 192, 1, 40);
  const auto b = perturbed(a, 0.1f, 41);
  const double got = ms_ssim(a, b, cfg);
  const double expect = oracle::ref_ms_ssim(a, b, cfg);
  CHECK(got == doctest::Approx(expect).epsilon(1e-7).scale(1e-4));
}

TEST_CASE("ms-ssim rejects images too small for the scale chain") {
  const auto a = random_image(32, 32, 3, 42);
  MetricsConfig cfg;  // K=5 with an 11x11 window cannot fit 32x32
  CHECK_THROWS_AS((void)ms_ssim(a, a, cfg), ImageTooSmallForScales);
}

TEST_CASE("metrics config invariants") {
  MetricsConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SUBCASE("weights must sum to one") {
    cfg.scale_weights[0] += 0.01;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  }
  SUBCASE("scales must match weights") {
    cfg.scales = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  }
  SUBCASE("stability constants positive") {
    cfg.c1_k = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  }
}

TEST_CASE("benign accuracy: perfect, hand-counted and empty cases") {
  data::Dataset ds;
  ds.class_names = {"a", "b", "c"};
  for (int i = 0; i < 12; ++i) {
    ds.push(Image(4, 4, 1, static_cast<float>(i) / 12.f), i % 3, "s" + std::to_string(i));
  }

  const Classifier perfect{[&](const std::vector<Image>& images) {
    std::vector<int> out;
    for (const auto& im : images) {
      out.push_back(static_cast<int>(std::lround(im.px[0] * 12.f)) % 3);
    }
    return out;
  }};
  CHECK(benign_accuracy(perfect, ds) == doctest::Approx(100.0));

  // hand count: a stub that always answers class 1 is right for 4 of 12
  const Classifier constant{[](const std::vector<Image>& images) {
    return std::vector<int>(images.size(), 1);
  }};
  CHECK(benign_accuracy(constant, ds) == doctest::Approx(100.0 * 4.0 / 12.0));

  CHECK_THROWS_AS((void)benign_accuracy(constant, data::Dataset{}), EmptyTestset);
}

TEST_CASE("attack success rate: ratio definition and pool exclusion") {
  data::Dataset ds;
  ds.class_names = {"a", "b"};
  for (int i = 0; i < 10; ++i) {
    ds.push(Image(4, 4, 1, i < 4 ? 1.f : 0.f), i < 4 ? 0 : 1, "s" + std::to_string(i));
  }
  // trigger marks the image; the stub predicts 0 for marked bright images only
  const TriggerFn mark = [](const Image& im) {
    Image out = im;
    out.px[1] = 0.25f;
    return out;
  };
  const Classifier stub{[](const std::vector<Image>& images) {
    std::vector<int> out;
    for (const auto& im : images) out.push_back(im.px[1] == 0.25f && im.px[0] == 0.f ? 0 : 1);
    return out;
  }};
  // pool = the 6 class-1 samples; all marked dark images predicted 0
  CHECK(attack_success_rate(stub, ds, mark, 0) == doctest::Approx(100.0));

  // 90-of-100 ratio case
  data::Dataset big;
  big.class_names = {"t", "u"};
  for (int i = 0; i < 100; ++i) big.push(Image(2, 2, 1, i / 100.f), 1, "x" + std::to_string(i));
  const Classifier ninety{[](const std::vector<Image>& images) {
    std::vector<int> out;
    for (const auto& im : images) {
      out.push_back(im.px[0] < 0.90f ? 0 : 1);  // 90 of the 100 marked as target
    }
    return out;
  }};
  CHECK(attack_success_rate(ninety, big, [](const Image& im) { return im; }, 0) ==
        doctest::Approx(90.0));

  // pool empty when every sample already carries the target label
  data::Dataset all_target;
  all_target.class_names = {"t"};
  all_target.push(Image(2, 2, 1, 0.f), 0, "only");
  CHECK_THROWS_AS(
      (void)attack_success_rate(ninety, all_target, [](const Image& im) { return im; }, 0),
      EmptyPool);
}

TEST_CASE("benign accuracy change is plain subtraction") {
  CHECK(benign_accuracy_change(61.27, 68.07) == doctest::Approx(-6.80).epsilon(1e-12));
  CHECK(benign_accuracy_change(50.0, 50.0) == doctest::Approx(0.0));
  CHECK(benign_accuracy_change(99.60, 99.00) == doctest::Approx(0.60).epsilon(1e-12));
}

TEST_CASE("stealth stats aggregate psnr and ms-ssim") {
  const auto cfg = MetricsConfig::for_scales(3, 32);
  std::vector<Image> benign, poisoned;
  for (std::uint64_t s = 0; s < 6; ++s) {
    benign.push_back(random_image(32, 32, 3, 60 + s));
    poisoned.push_back(s == 0 ? benign.back() : perturbed(benign.back(), 0.05f, 80 + s));
  }
  const auto st = stealth_stats(benign, poisoned, cfg);
  CHECK(st.pairs == 6);
  CHECK(st.psnr_infinite == 1);  // the identical pair is excluded from the mean
  CHECK(std::isfinite(st.psnr_mean));
  CHECK(st.msssim_mean > 0.8);
  CHECK(st.msssim_min <= st.msssim_mean);
}

TEST_CASE("report: rows, derived bac, averages and schema errors") {
  AttackRunRow normal;
  normal.model_id = "victim";
  normal.attack = "normal";
  normal.ba = 95.0;
  normal.sample_count = 100;
  normal.config_digest = "d1";

  AttackRunRow stego;
  stego.model_id = "victim";
  stego.attack = "stego";
  stego.ba = 93.5;
  stego.asr = 97.0;
  stego.psnr_mean = 28.4;
  stego.msssim_mean = 0.97;
  stego.sample_count = 100;
  stego.stealth_pairs = 50;
  stego.config_digest = "d1";

  SUBCASE("bac derived from the normal row, averages appended") {
    const auto tables = build_report({normal, stego});
    CHECK(tables.human_text.find("Average") != std::string::npos);
    CHECK(tables.human_text.find("-1.50") != std::string::npos);  // 93.5 - 95.0
    CHECK(tables.csv.find("model_id,attack,ba,asr,bac,psnr_mean,msssim_mean") == 0);
    // one jsonl line per row plus the average record
    int lines = 0;
    for (const char c : tables.jsonl) lines += c == '\n';
    CHECK(lines == 3);
  }

  SUBCASE("average asr equals the arithmetic mean of attack rows") {
    AttackRunRow patch = stego;
    patch.attack = "patch";
    patch.asr = 91.0;
    const auto tables = build_report({normal, stego, patch});
    CHECK(tables.jsonl.find("\"asr\":94.0") != std::string::npos);  // (97+91)/2
  }

  SUBCASE("inconsistent bac rejected") {
    auto bad = stego;
    bad.bac = 5.0;  // != 93.5 - 95.0
    CHECK_THROWS_AS((void)build_report({normal, bad}), InconsistentSchema);
  }

  SUBCASE("missing digest rejected") {
    auto bad = stego;
    bad.config_digest.clear();
    CHECK_THROWS_AS((void)build_report({normal, bad}), InconsistentSchema);
  }

  SUBCASE("row jsonl round trip") {
    const auto line = row_to_jsonl(stego);
    const auto back = row_from_jsonl(line);
    CHECK(row_to_jsonl(back) == line);
  }
}

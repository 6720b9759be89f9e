#include "odm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odm/errors.hpp"

namespace odm::eval {

namespace {

std::vector<double> gaussian_taps(int radius, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : taps) v /= sum;
  return taps;
}

// Separable valid-mode filtering; output is (h-win+1) x (w-win+1).
std::vector<double> sep_filter_valid(const std::vector<double>& x, int h, int w,
                                     const std::vector<double>& taps) {
  const int win = static_cast<int>(taps.size());
  const int ow = w - win + 1;
  const int oh = h - win + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (int k = 0; k < win; ++k) acc += taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(y) * w + ox + k];
      rows[static_cast<std::size_t>(y) * ow + ox] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (int k = 0; k < win; ++k) acc += taps[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(oy + k) * ow + ox];
      out[static_cast<std::size_t>(oy) * ow + ox] = acc;
    }
  }
  return out;
}

std::vector<double> channel_as_double(const Image& im, int ch) {
  std::vector<double> out(static_cast<std::size_t>(im.h) * im.w);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      out[static_cast<std::size_t>(y) * im.w + x] = im.at(y, x, ch);
    }
  }
  return out;
}

}  // namespace

void MetricsConfig::validate() const {
  if (max_value <= 0) throw ConfigInvalid("metrics.max_value must be positive");
  if (c1_k <= 0 || c2_k <= 0) throw ConfigInvalid("metrics stability constants must be positive");
  if (window < 3 || window % 2 == 0) throw ConfigInvalid("metrics.window must be odd and >= 3");
  if (sigma <= 0) throw ConfigInvalid("metrics.sigma must be positive");
  if (scales < 1) throw ConfigInvalid("metrics.scales must be >= 1");
  if (static_cast<int>(scale_weights.size()) != scales) {
    throw ConfigInvalid("metrics.scale_weights must list one weight per scale");
  }
  double sum = 0.0;
  for (const double w : scale_weights) {
    if (w < 0) throw ConfigInvalid("metrics.scale_weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigInvalid("metrics.scale_weights must sum to 1");
  if (downsample_sigma <= 0 || downsample_radius < 1) {
    throw ConfigInvalid("metrics downsample kernel invalid");
  }
}

MetricsConfig MetricsConfig::for_scales(int k, int image_side, double max_value) {
  MetricsConfig cfg;
  cfg.max_value = max_value;
  cfg.scales = k;
  const std::vector<double> standard = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (k < 1 || k > static_cast<int>(standard.size())) {
    throw ConfigInvalid("for_scales supports 1..5 scales");
  }
  cfg.scale_weights.assign(standard.begin(), standard.begin() + k);
  double sum = 0.0;
  for (const double w : cfg.scale_weights) sum += w;
  for (auto& w : cfg.scale_weights) w /= sum;
  // Smallest scale after k-1 halvings must still fit the window.
  int side = image_side;
  for (int i = 1; i < k; ++i) side = (side + 1) / 2;
  if (cfg.window > side) {
    int win = side % 2 == 0 ? side - 1 : side;
    if (win < 3) throw ImageTooSmallForScales("image side " + std::to_string(image_side));
    cfg.window = win;
  }
  cfg.validate();
  return cfg;
}

double psnr(const Image& a, const Image& b, double max_value) {
  if (!a.same_shape(b)) throw ShapeMismatch("psnr image shapes differ");
  if (max_value <= 0) throw ConfigInvalid("psnr MAX must be positive");
  if (a.px.empty()) throw ShapeMismatch("psnr on empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const double d = static_cast<double>(a.px[i]) - b.px[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.px.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim_single_scale(const Image& a, const Image& b, const MetricsConfig& cfg) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim image shapes differ");
  if (cfg.window > a.h || cfg.window > a.w) {
    throw WindowTooLarge(std::to_string(cfg.window) + " vs " + std::to_string(a.h) + "x" +
                         std::to_string(a.w));
  }
  const auto taps = gaussian_taps(cfg.window / 2, cfg.sigma);
  const double c1 = cfg.c1();
  const double c2 = cfg.c2();

  double total = 0.0;
  for (int ch = 0; ch < a.c; ++ch) {
    const auto xa = channel_as_double(a, ch);
    const auto xb = channel_as_double(b, ch);
    std::vector<double> xa2(xa.size()), xb2(xa.size()), xab(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) {
      xa2[i] = xa[i] * xa[i];
      xb2[i] = xb[i] * xb[i];
      xab[i] = xa[i] * xb[i];
    }
    const auto mu_a = sep_filter_valid(xa, a.h, a.w, taps);
    const auto mu_b = sep_filter_valid(xb, a.h, a.w, taps);
    const auto e_a2 = sep_filter_valid(xa2, a.h, a.w, taps);
    const auto e_b2 = sep_filter_valid(xb2, a.h, a.w, taps);
    const auto e_ab = sep_filter_valid(xab, a.h, a.w, taps);

    double mean = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_a2[i] - mu_a[i] * mu_a[i];
      const double vb = e_b2[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
      mean += num / den;
    }
    total += mean / static_cast<double>(mu_a.size());
  }
  return total / a.c;
}

Image downsample2x(const Image& im, double sigma, int radius) {
  const auto taps = gaussian_taps(radius, sigma);
  const int win = 2 * radius + 1;
  // Separable blur with replicate borders.
  Image blurred_rows(im.h, im.w, im.c);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      for (int ch = 0; ch < im.c; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < win; ++k) {
          const int ix = std::clamp(x - radius + k, 0, im.w - 1);
          acc += taps[static_cast<std::size_t>(k)] * im.at(y, ix, ch);
        }
        blurred_rows.at(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  Image blurred(im.h, im.w, im.c);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      for (int ch = 0; ch < im.c; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < win; ++k) {
          const int iy = std::clamp(y - radius + k, 0, im.h - 1);
          acc += taps[static_cast<std::size_t>(k)] * blurred_rows.at(iy, x, ch);
        }
        blurred.at(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  Image out((im.h + 1) / 2, (im.w + 1) / 2, im.c);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      for (int ch = 0; ch < im.c; ++ch) out.at(y, x, ch) = blurred.at(2 * y, 2 * x, ch);
    }
  }
  return out;
}

double ms_ssim(const Image& a, const Image& b, const MetricsConfig& cfg) {
  if (!a.same_shape(b)) throw ShapeMismatch("ms-ssim image shapes differ");
  cfg.validate();
  // The whole scale chain must fit the window before any work happens.
  {
    int h = a.h, w = a.w;
    for (int k = 0; k < cfg.scales; ++k) {
      if (cfg.window > h || cfg.window > w) {
        throw ImageTooSmallForScales("scale " + std::to_string(k + 1) + " is " +
                                     std::to_string(h) + "x" + std::to_string(w) +
                                     " for window " + std::to_string(cfg.window));
      }
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
  }
  Image xa = a, xb = b;
  double result = 1.0;
  for (int k = 0; k < cfg.scales; ++k) {
    const double s = ssim_single_scale(xa, xb, cfg);
    const double clamped = std::max(s, 0.0);
    result *= std::pow(clamped, cfg.scale_weights[static_cast<std::size_t>(k)]);
    if (k + 1 < cfg.scales) {
      xa = downsample2x(xa, cfg.downsample_sigma, cfg.downsample_radius);
      xb = downsample2x(xb, cfg.downsample_sigma, cfg.downsample_radius);
    }
  }
  return std::clamp(result, 0.0, 1.0);
}

double benign_accuracy(const Classifier& model, const data::Dataset& testset) {
  if (testset.size() == 0) throw EmptyTestset("benign accuracy over an empty testset");
  const auto preds = model(testset.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == testset.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(testset.size());
}

double attack_success_rate(const Classifier& model, const data::Dataset& benign_testset,
                           const TriggerFn& apply_trigger, int target_label) {
  std::vector<Image> pool;
  for (std::size_t i = 0; i < benign_testset.size(); ++i) {
    if (benign_testset.labels[i] != target_label) {
      pool.push_back(apply_trigger(benign_testset.images[i]));
    }
  }
  if (pool.empty()) throw EmptyPool("no samples with true label != target");
  const auto preds = model(pool);
  std::size_t hits = 0;
  for (const int p : preds) {
    if (p == target_label) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pool.size());
}

double benign_accuracy_change(double ba_backdoor, double ba_normal) {
  return ba_backdoor - ba_normal;
}

StealthStats stealth_stats(const std::vector<Image>& benign,
                           const std::vector<Image>& poisoned, const MetricsConfig& cfg) {
  if (benign.size() != poisoned.size() || benign.empty()) {
    throw ShapeMismatch("stealth stats need matched non-empty pair lists");
  }
  StealthStats st;
  st.pairs = static_cast<int>(benign.size());
  st.psnr_min = std::numeric_limits<double>::infinity();
  st.msssim_min = std::numeric_limits<double>::infinity();
  double psnr_sum = 0.0;
  int finite = 0;
  double ms_sum = 0.0;
  for (std::size_t i = 0; i < benign.size(); ++i) {
    const double p = psnr(benign[i], poisoned[i], cfg.max_value);
    if (std::isinf(p)) {
      ++st.psnr_infinite;
    } else {
      psnr_sum += p;
      ++finite;
      st.psnr_min = std::min(st.psnr_min, p);
    }
    const double m = ms_ssim(benign[i], poisoned[i], cfg);
    ms_sum += m;
    st.msssim_min = std::min(st.msssim_min, m);
  }
  st.psnr_mean = finite > 0 ? psnr_sum / finite : std::numeric_limits<double>::infinity();
  st.msssim_mean = ms_sum / static_cast<double>(benign.size());
  return st;
}

}  // namespace odm::eval

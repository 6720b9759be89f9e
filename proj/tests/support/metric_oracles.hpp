#pragma once

// Brute-force reference implementations of the similarity metrics, kept
// deliberately naive (direct per-window double-precision loops, no separable
// filtering) and independent of the library path they are checking.

#include <cmath>
#include <vector>

#include "odm/eval/metrics.hpp"
#include "odm/image.hpp"

namespace oracle {

inline double ref_psnr(const odm::Image& a, const odm::Image& b, double max_value) {
  long double se = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const long double d = static_cast<long double>(a.px[i]) - b.px[i];
    se += d * d;
  }
  const long double mse = se / a.px.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(10.0L * std::log10(static_cast<long double>(max_value) *
                                                max_value / mse));
}

inline double ref_ssim(const odm::Image& a, const odm::Image& b,
                       const odm::eval::MetricsConfig& cfg) {
  const int win = cfg.window;
  const int r = win / 2;
  // full 2D gaussian window, normalized
  std::vector<double> w(static_cast<std::size_t>(win) * win);
  double wsum = 0;
  for (int y = 0; y < win; ++y) {
    for (int x = 0; x < win; ++x) {
      const double dy = y - r, dx = x - r;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));
      w[static_cast<std::size_t>(y) * win + x] = v;
      wsum += v;
    }
  }
  for (auto& v : w) v /= wsum;

  const double c1 = cfg.c1();
  const double c2 = cfg.c2();
  double channel_sum = 0;
  for (int ch = 0; ch < a.c; ++ch) {
    double map_sum = 0;
    int map_count = 0;
    for (int oy = 0; oy + win <= a.h; ++oy) {
      for (int ox = 0; ox + win <= a.w; ++ox) {
        double ma = 0, mb = 0, ea2 = 0, eb2 = 0, eab = 0;
        for (int y = 0; y < win; ++y) {
          for (int x = 0; x < win; ++x) {
            const double wv = w[static_cast<std::size_t>(y) * win + x];
            const double va = a.at(oy + y, ox + x, ch);
            const double vb = b.at(oy + y, ox + x, ch);
            ma += wv * va;
            mb += wv * vb;
            ea2 += wv * va * va;
            eb2 += wv * vb * vb;
            eab += wv * va * vb;
          }
        }
        const double sa = ea2 - ma * ma;
        const double sb = eb2 - mb * mb;
        const double sab = eab - ma * mb;
        map_sum += ((2 * ma * mb + c1) * (2 * sab + c2)) /
                   ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++map_count;
      }
    }
    channel_sum += map_sum / map_count;
  }
  return channel_sum / a.c;
}

inline odm::Image ref_downsample(const odm::Image& im, double sigma, int radius) {
  const int win = 2 * radius + 1;
  std::vector<double> taps(static_cast<std::size_t>(win));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    taps[static_cast<std::size_t>(i + radius)] =
        std::exp(-(static_cast<double>(i) * i) / (2 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i + radius)];
  }
  for (auto& t : taps) t /= sum;

  // direct 2D blur with replicate borders
  odm::Image blurred(im.h, im.w, im.c);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      for (int ch = 0; ch < im.c; ++ch) {
        double acc = 0;
        for (int ky = 0; ky < win; ++ky) {
          for (int kx = 0; kx < win; ++kx) {
            const int iy = std::clamp(y - radius + ky, 0, im.h - 1);
            const int ix = std::clamp(x - radius + kx, 0, im.w - 1);
            acc += taps[static_cast<std::size_t>(ky)] * taps[static_cast<std::size_t>(kx)] *
                   im.at(iy, ix, ch);
          }
        }
        blurred.at(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  odm::Image out((im.h + 1) / 2, (im.w + 1) / 2, im.c);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      for (int ch = 0; ch < im.c; ++ch) out.at(y, x, ch) = blurred.at(2 * y, 2 * x, ch);
    }
  }
  return out;
}

inline double ref_ms_ssim(const odm::Image& a, const odm::Image& b,
                          const odm::eval::MetricsConfig& cfg) {
  odm::Image xa = a, xb = b;
  double result = 1.0;
  for (int k = 0; k < cfg.scales; ++k) {
    const double s = std::max(ref_ssim(xa, xb, cfg), 0.0);
    result *= std::pow(s, cfg.scale_weights[static_cast<std::size_t>(k)]);
    if (k + 1 < cfg.scales) {
      xa = ref_downsample(xa, cfg.downsample_sigma, cfg.downsample_radius);
      xb = ref_downsample(xb, cfg.downsample_sigma, cfg.downsample_radius);
    }
  }
  return result;
}

}  // namespace oracle

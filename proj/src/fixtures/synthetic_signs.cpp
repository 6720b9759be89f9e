#include "synthetic_signs.hpp"

#include <algorithm>
#include <cmath>

#include "odm/util/rng.hpp"

namespace odm::fix {

namespace {

struct Rgb {
  float r, g, b;
};

constexpr Rgb kRed{0.78f, 0.10f, 0.12f};
constexpr Rgb kWhite{0.94f, 0.94f, 0.92f};
constexpr Rgb kBlue{0.10f, 0.25f, 0.75f};
constexpr Rgb kYellow{0.93f, 0.78f, 0.10f};
constexpr Rgb kGreen{0.10f, 0.55f, 0.22f};
constexpr Rgb kBlack{0.05f, 0.05f, 0.06f};

struct Pt {
  float x, y;
};

float sd_circle(Pt p, float r) { return std::sqrt(p.x * p.x + p.y * p.y) - r; }

float sd_box(Pt p, float hx, float hy) {
  const float dx = std::abs(p.x) - hx;
  const float dy = std::abs(p.y) - hy;
  const float ox = std::max(dx, 0.f), oy = std::max(dy, 0.f);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(dx, dy), 0.f);
}

float sd_diamond(Pt p, float r) { return (std::abs(p.x) + std::abs(p.y)) - r; }

float sd_octagon(Pt p, float r) {
  const float k = 0.9238795f;  // cos(22.5 deg)
  const float ax = std::abs(p.x), ay = std::abs(p.y);
  return std::max(std::max(ax, ay), (ax + ay) * 0.70710678f) - r * k;
}

// Upright triangle (apex up) of circumradius r; flip y for the inverted one.
float sd_triangle(Pt p, float r) {
  const float k = 1.7320508f;
  float px = std::abs(p.x) - r * 0.866f;
  float py = p.y + r * 0.5f;
  if (px + k * py > 0.f) {
    const float nx = (px - k * py) / 2.f;
    const float ny = (-k * px - py) / 2.f;
    px = nx;
    py = ny;
  }
  px -= std::clamp(px, -r * 0.866f * 2.f, 0.f);
  return -std::sqrt(px * px + py * py) * (py > 0 ? -1.f : 1.f);
}

struct SignPainter {
  // color at unit-square point for the given class; alpha 0 keeps background
  Rgb color;
  float alpha;
};

SignPainter paint_sign(int cls, Pt p) {
  auto solid = [](Rgb c) { return SignPainter{c, 1.f}; };
  const SignPainter none{kBlack, 0.f};
  switch (cls) {
    case 0: {  // red octagon, white band
      if (sd_octagon(p, 0.85f) > 0) return none;
      if (std::abs(p.y) < 0.16f && std::abs(p.x) < 0.62f) return solid(kWhite);
      return solid(kRed);
    }
    case 1: {  // inverted triangle, red border, white core
      const Pt q{p.x, -p.y};
      if (sd_triangle(q, 0.92f) > 0) return none;
      if (sd_triangle(q, 0.60f) <= 0) return solid(kWhite);
      return solid(kRed);
    }
    case 2: {  // red disc, white bar
      if (sd_circle(p, 0.85f) > 0) return none;
      if (std::abs(p.y) < 0.15f && std::abs(p.x) < 0.55f) return solid(kWhite);
      return solid(kRed);
    }
    case 3: {  // yellow upright triangle with exclamation mark
      if (sd_triangle(p, 0.95f) > 0) return none;
      if (std::abs(p.x) < 0.07f && p.y > -0.45f && p.y < 0.15f) return solid(kBlack);
      if (sd_circle({p.x, p.y - 0.35f}, 0.08f) <= 0) return solid(kBlack);
      return solid(kYellow);
    }
    case 4: {  // white disc, red ring, two dark strokes
      if (sd_circle(p, 0.88f) > 0) return none;
      if (sd_circle(p, 0.66f) > 0) return solid(kRed);
      if ((std::abs(p.x - 0.18f) < 0.07f || std::abs(p.x + 0.18f) < 0.07f) &&
          std::abs(p.y) < 0.38f) {
        return solid(kBlack);
      }
      return solid(kWhite);
    }
    case 5: {  // blue disc, white up arrow
      if (sd_circle(p, 0.85f) > 0) return none;
      if (std::abs(p.x) < 0.09f && p.y > -0.10f && p.y < 0.55f) return solid(kWhite);
      if (sd_triangle({p.x, p.y + 0.35f}, 0.34f) <= 0) return solid(kWhite);
      return solid(kBlue);
    }
    case 6: {  // blue square with a white P-ish glyph
      if (sd_box(p, 0.78f, 0.78f) > 0) return none;
      if (std::abs(p.x + 0.18f) < 0.075f && std::abs(p.y) < 0.45f) return solid(kWhite);
      const float ring = sd_circle({p.x - 0.02f, p.y + 0.22f}, 0.22f);
      if (ring <= 0 && ring > -0.14f) return solid(kWhite);
      return solid(kBlue);
    }
    case 7: {  // green disc, white ring
      if (sd_circle(p, 0.85f) > 0) return none;
      const float ring = sd_circle(p, 0.58f);
      if (ring <= 0 && ring > -0.14f) return solid(kWhite);
      return solid(kGreen);
    }
    case 8: {  // yellow diamond, black inner diamond
      if (sd_diamond(p, 0.95f) > 0) return none;
      if (sd_diamond(p, 0.38f) <= 0) return solid(kBlack);
      return solid(kYellow);
    }
    case 9: {  // light square with red diagonal cross
      if (sd_box(p, 0.75f, 0.75f) > 0) return none;
      if (std::abs(p.x - p.y) < 0.16f || std::abs(p.x + p.y) < 0.16f) return solid(kRed);
      return solid(kWhite);
    }
    default: return none;
  }
}

}  // namespace

std::vector<std::string> sign_class_names() {
  return {"stop",      "yield",   "no_entry", "warning", "limit",
          "ahead_only", "parking", "go",       "hazard",  "no_crossing"};
}

Image render_sign(int class_id, std::uint64_t seed, int size) {
  auto gen = rng::fork(seed, 0x51a9 + static_cast<std::uint64_t>(class_id));

  // Background: two-color gradient plus a blocky low-frequency texture.
  const Rgb bg_a{rng::uniformf(gen, 0.10f, 0.75f), rng::uniformf(gen, 0.15f, 0.80f),
                 rng::uniformf(gen, 0.15f, 0.85f)};
  const Rgb bg_b{rng::uniformf(gen, 0.05f, 0.65f), rng::uniformf(gen, 0.10f, 0.70f),
                 rng::uniformf(gen, 0.10f, 0.70f)};
  const bool vertical = rng::uniform01(gen) < 0.5;
  float tex[5][5][3];
  for (auto& row : tex) {
    for (auto& cell : row) {
      for (float& v : cell) v = rng::uniformf(gen, -0.08f, 0.08f);
    }
  }

  const float angle = rng::uniformf(gen, -0.21f, 0.21f);  // ~±12 deg
  const float scale = rng::uniformf(gen, 0.72f, 0.98f);
  const float cx = rng::uniformf(gen, -0.12f, 0.12f);
  const float cy = rng::uniformf(gen, -0.12f, 0.12f);
  const float brightness = rng::uniformf(gen, 0.78f, 1.12f);
  const float jr = rng::uniformf(gen, -0.06f, 0.06f);
  const float jg = rng::uniformf(gen, -0.06f, 0.06f);
  const float jb = rng::uniformf(gen, -0.06f, 0.06f);
  const float noise_sigma = rng::uniformf(gen, 0.008f, 0.035f);
  const float ca = std::cos(angle), sa = std::sin(angle);

  const int ss = size * 2;  // 2x supersampling
  Image hi(ss, ss, 3);
  for (int y = 0; y < ss; ++y) {
    for (int x = 0; x < ss; ++x) {
      const float u = (static_cast<float>(x) + 0.5f) / ss;  // [0,1]
      const float v = (static_cast<float>(y) + 0.5f) / ss;
      const float t = vertical ? v : u;
      float r = bg_a.r * (1 - t) + bg_b.r * t;
      float g = bg_a.g * (1 - t) + bg_b.g * t;
      float b = bg_a.b * (1 - t) + bg_b.b * t;
      // bilinear sample of the 5x5 texture grid
      const float tx = u * 4.f, ty = v * 4.f;
      const int ix = std::min(3, static_cast<int>(tx)), iy = std::min(3, static_cast<int>(ty));
      const float fx = tx - ix, fy = ty - iy;
      for (int ch = 0; ch < 3; ++ch) {
        const float t00 = tex[iy][ix][ch], t01 = tex[iy][ix + 1][ch];
        const float t10 = tex[iy + 1][ix][ch], t11 = tex[iy + 1][ix + 1][ch];
        const float tv = (t00 * (1 - fx) + t01 * fx) * (1 - fy) +
                         (t10 * (1 - fx) + t11 * fx) * fy;
        if (ch == 0) r += tv;
        if (ch == 1) g += tv;
        if (ch == 2) b += tv;
      }

      // sign-space coordinates: centered, rotated, scaled
      float px = (u * 2.f - 1.f - cx) / scale;
      float py = (v * 2.f - 1.f - cy) / scale;
      const Pt p{ca * px + sa * py, -sa * px + ca * py};
      const auto paint = paint_sign(class_id, p);
      if (paint.alpha > 0) {
        r = paint.color.r;
        g = paint.color.g;
        b = paint.color.b;
      }
      hi.at(y, x, 0) = r;
      hi.at(y, x, 1) = g;
      hi.at(y, x, 2) = b;
    }
  }

  Image out(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        float acc = hi.at(2 * y, 2 * x, ch) + hi.at(2 * y, 2 * x + 1, ch) +
                    hi.at(2 * y + 1, 2 * x, ch) + hi.at(2 * y + 1, 2 * x + 1, ch);
        acc = 0.25f * acc * brightness;
        acc += ch == 0 ? jr : ch == 1 ? jg : jb;
        acc += noise_sigma * rng::normalf(gen);
        out.at(y, x, ch) = std::clamp(acc, 0.f, 1.f);
      }
    }
  }
  return out;
}

data::Dataset make_sign_dataset(std::size_t per_class, std::uint64_t seed, int size) {
  data::Dataset ds;
  ds.class_names = sign_class_names();
  for (int cls = 0; cls < kSignClasses; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::uint64_t sample_seed =
          rng::mix64(seed ^ (static_cast<std::uint64_t>(cls) << 32 ^ i));
      char id[48];
      std::snprintf(id, sizeof(id), "%s/%05zu", ds.class_names[static_cast<std::size_t>(cls)].c_str(), i);
      ds.push(render_sign(cls, sample_seed, size), cls, id);
    }
  }
  return ds;
}

}  // namespace odm::fix

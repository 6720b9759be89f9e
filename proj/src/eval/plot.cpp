#include "odm/eval/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "odm/errors.hpp"

namespace odm::eval {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F}},
    {'3', {0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.ch == up) return &g;
  }
  return nullptr;
}

void put_px(Image& im, int x, int y, float r, float g, float b) {
  if (x < 0 || y < 0 || x >= im.w || y >= im.h) return;
  im.at(y, x, 0) = r;
  if (im.c > 1) {
    im.at(y, x, 1) = g;
    im.at(y, x, 2) = b;
  }
}

void draw_line(Image& im, int x0, int y0, int x1, int y1, float r, float g, float b) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put_px(im, x0, y0, r, g, b);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_rect(Image& im, int x0, int y0, int x1, int y1, float r, float g, float b) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put_px(im, x, y, r, g, b);
  }
}

std::string short_num(double v) {
  char buf[32];
  if (std::abs(v) >= 100 || v == std::floor(v)) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  }
  return buf;
}

constexpr int kW = 640, kH = 420;
constexpr int kMarginL = 56, kMarginR = 16, kMarginT = 36, kMarginB = 40;

}  // namespace

void draw_text(Image& canvas, int x, int y, const std::string& text, float r, float g,
               float b) {
  int cx = x;
  for (const char c : text) {
    if (const Glyph* glyph = find_glyph(c)) {
      for (int gy = 0; gy < 7; ++gy) {
        for (int gx = 0; gx < 5; ++gx) {
          if (glyph->rows[gy] & (1 << (4 - gx))) put_px(canvas, cx + gx, y + gy, r, g, b);
        }
      }
    }
    cx += 6;
  }
}

void render_histogram(const std::filesystem::path& path, const std::vector<double>& values,
                      int bins, const std::string& title,
                      const std::map<std::string, std::string>& text_meta) {
  if (values.empty() || bins < 1) throw Error("histogram needs values and at least one bin");
  Image canvas(kH, kW, 3, 1.0f);

  double lo = values[0], hi = values[0];
  for (const double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (const double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const int peak = *std::max_element(counts.begin(), counts.end());

  const int px0 = kMarginL, px1 = kW - kMarginR;
  const int py0 = kMarginT, py1 = kH - kMarginB;
  draw_line(canvas, px0, py1, px1, py1, 0, 0, 0);
  draw_line(canvas, px0, py0, px0, py1, 0, 0, 0);
  draw_text(canvas, px0, 12, title, 0, 0, 0);

  const double bw = static_cast<double>(px1 - px0) / bins;
  for (int b = 0; b < bins; ++b) {
    const int h = static_cast<int>(std::round(
        static_cast<double>(counts[static_cast<std::size_t>(b)]) / peak * (py1 - py0 - 4)));
    if (h <= 0) continue;
    const int x0 = px0 + static_cast<int>(b * bw) + 1;
    const int x1 = px0 + static_cast<int>((b + 1) * bw) - 1;
    fill_rect(canvas, x0, py1 - h, std::max(x0, x1), py1 - 1, 0.25f, 0.45f, 0.8f);
  }
  draw_text(canvas, px0 - 2, py1 + 6, short_num(lo), 0, 0, 0);
  const std::string hi_s = short_num(hi);
  draw_text(canvas, px1 - static_cast<int>(hi_s.size()) * 6, py1 + 6, hi_s, 0, 0, 0);
  draw_text(canvas, 4, py0, short_num(peak), 0, 0, 0);
  draw_text(canvas, 4, py1 - 7, "0", 0, 0, 0);
  draw_text(canvas, px0, py1 + 20, "N=" + std::to_string(values.size()), 0, 0, 0);

  img::write_png(path, canvas, text_meta);
}

void render_curves(const std::filesystem::path& path, const std::vector<double>& xs,
                   const std::vector<std::vector<double>>& series,
                   const std::vector<std::string>& names, const std::string& title,
                   const std::map<std::string, std::string>& text_meta) {
  if (xs.empty() || series.empty()) throw Error("curve plot needs data");
  for (const auto& s : series) {
    if (s.size() != xs.size()) throw Error("curve series length mismatch");
  }
  Image canvas(kH, kW, 3, 1.0f);

  double ylo = series[0][0], yhi = series[0][0];
  for (const auto& s : series) {
    for (const double v : s) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (yhi == ylo) yhi = ylo + 1.0;
  const double xlo = xs.front(), xhi = xs.back() == xs.front() ? xs.front() + 1 : xs.back();

  const int px0 = kMarginL, px1 = kW - kMarginR;
  const int py0 = kMarginT, py1 = kH - kMarginB;
  draw_line(canvas, px0, py1, px1, py1, 0, 0, 0);
  draw_line(canvas, px0, py0, px0, py1, 0, 0, 0);
  draw_text(canvas, px0, 12, title, 0, 0, 0);

  const float palette[][3] = {{0.20f, 0.45f, 0.80f}, {0.85f, 0.35f, 0.20f},
                              {0.20f, 0.65f, 0.30f}, {0.60f, 0.30f, 0.70f}};
  auto map_x = [&](double v) {
    return px0 + static_cast<int>((v - xlo) / (xhi - xlo) * (px1 - px0));
  };
  auto map_y = [&](double v) {
    return py1 - static_cast<int>((v - ylo) / (yhi - ylo) * (py1 - py0));
  };
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto* col = palette[s % 4];
    for (std::size_t i = 1; i < xs.size(); ++i) {
      draw_line(canvas, map_x(xs[i - 1]), map_y(series[s][i - 1]), map_x(xs[i]),
                map_y(series[s][i]), col[0], col[1], col[2]);
    }
    if (s < names.size()) {
      const int ly = py0 + static_cast<int>(s) * 10;
      fill_rect(canvas, px1 - 90, ly + 2, px1 - 80, ly + 4, col[0], col[1], col[2]);
      draw_text(canvas, px1 - 76, ly, names[s], 0, 0, 0);
    }
  }
  draw_text(canvas, px0 - 2, py1 + 6, short_num(xlo), 0, 0, 0);
  const std::string xhi_s = short_num(xhi);
  draw_text(canvas, px1 - static_cast<int>(xhi_s.size()) * 6, py1 + 6, xhi_s, 0, 0, 0);
  draw_text(canvas, 4, py0, short_num(yhi), 0, 0, 0);
  draw_text(canvas, 4, py1 - 7, short_num(ylo), 0, 0, 0);

  img::write_png(path, canvas, text_meta);
}

}  // namespace odm::eval

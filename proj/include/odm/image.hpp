#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace odm {

// HWC float image, pixel values normalized to [0,1].
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<float> px;

  Image() = default;
  Image(int h_, int w_, int c_, float fill = 0.f)
      : h(h_), w(w_), c(c_), px(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

  float& at(int y, int x, int ch) {
    return px[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  float at(int y, int x, int ch) const {
    return px[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  std::size_t size() const { return px.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

namespace img {

Image read_png(const std::filesystem::path& path);
Image decode_png(const std::vector<std::uint8_t>& bytes);

// Values are clamped to [0,1] and quantized to 8 bits. Optional tEXt chunks
// carry provenance (e.g. the producing config digest).
void write_png(const std::filesystem::path& path, const Image& im,
               const std::map<std::string, std::string>& text = {});
std::vector<std::uint8_t> encode_png(const Image& im,
                                     const std::map<std::string, std::string>& text = {});

Image clamp01(Image im);

}  // namespace img
}  // namespace odm

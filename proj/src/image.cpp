#include "odm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <stdexcept>

#include "odm/util/io.hpp"

namespace odm::img {

namespace {

struct PngReadState {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->size) png_error(png, "png: truncated stream");
  std::memcpy(out, st->data + st->pos, n);
  st->pos += n;
}

void png_mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_mem_flush(png_structp) {}

}  // namespace

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: allocation failed");
  }
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: decode failed");
  }
  PngReadState st{bytes.data(), bytes.size(), 0};
  png_set_read_fn(png, &st, png_mem_read);
  png_read_info(png, info);

  png_set_expand(png);           // palette/low-bit-depth/tRNS to full bytes
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);

  raster.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raster.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image im(static_cast<int>(h), static_cast<int>(w), channels);
  const float inv = 1.0f / 255.0f;
  for (std::size_t i = 0; i < im.px.size(); ++i) im.px[i] = raster[i] * inv;
  return im;
}

Image read_png(const std::filesystem::path& path) {
  return decode_png(util::read_file(path));
}

std::vector<std::uint8_t> encode_png(const Image& im,
                                     const std::map<std::string, std::string>& text) {
  if (im.c != 1 && im.c != 3) throw std::runtime_error("png: only 1- or 3-channel images");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: allocation failed");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: encode failed");
  }
  png_set_write_fn(png, &out, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(im.w), static_cast<png_uint_32>(im.h), 8,
               im.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

  std::vector<png_text> chunks(text.size());
  std::vector<std::string> keys, values;  // keep storage alive until write
  keys.reserve(text.size());
  values.reserve(text.size());
  std::size_t ti = 0;
  for (const auto& [k, v] : text) {
    keys.push_back(k);
    values.push_back(v);
    chunks[ti] = png_text{};
    chunks[ti].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[ti].key = keys.back().data();
    chunks[ti].text = values.back().data();
    chunks[ti].text_length = values.back().size();
    ++ti;
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));

  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(im.w) * im.c);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w * im.c; ++x) {
      const float v = im.px[static_cast<std::size_t>(y) * im.w * im.c + x];
      row[static_cast<std::size_t>(x)] =
          static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& im,
               const std::map<std::string, std::string>& text) {
  util::write_file(path, encode_png(im, text));
}

Image clamp01(Image im) {
  for (float& v : im.px) v = std::clamp(v, 0.f, 1.f);
  return im;
}

}  // namespace odm::img

#include "odm/attack/trigger.hpp"

#include <algorithm>

#include "odm/errors.hpp"
#include "odm/util/rng.hpp"

namespace odm::attack {

const char* to_string(PatchCorner c) {
  switch (c) {
    case PatchCorner::LowerRight: return "lower-right";
    case PatchCorner::LowerLeft: return "lower-left";
    case PatchCorner::UpperRight: return "upper-right";
    case PatchCorner::UpperLeft: return "upper-left";
  }
  return "lower-right";
}

Image noise_field(const BaselineTriggerSpec& spec, int h, int w, int c) {
  Image field(h, w, c);
  auto gen = rng::fork(spec.seed, 0x4015E);
  for (auto& v : field.px) v = rng::uniformf(gen, -1.f, 1.f);
  return field;
}

Image apply_baseline_trigger(const Image& image, const BaselineTriggerSpec& spec) {
  if (spec.kind == BaselineTriggerSpec::Kind::Patch) {
    if (spec.patch_size > image.h || spec.patch_size > image.w) {
      throw PatchTooLarge(std::to_string(spec.patch_size) + " on " + std::to_string(image.h) +
                          "x" + std::to_string(image.w));
    }
    Image out = image;
    const int y0 = (spec.corner == PatchCorner::LowerRight || spec.corner == PatchCorner::LowerLeft)
                       ? image.h - spec.patch_size
                       : 0;
    const int x0 =
        (spec.corner == PatchCorner::LowerRight || spec.corner == PatchCorner::UpperRight)
            ? image.w - spec.patch_size
            : 0;
    for (int y = y0; y < y0 + spec.patch_size; ++y) {
      for (int x = x0; x < x0 + spec.patch_size; ++x) {
        for (int ch = 0; ch < image.c; ++ch) out.at(y, x, ch) = spec.fill;
      }
    }
    return out;
  }

  const Image field = noise_field(spec, image.h, image.w, image.c);
  Image out = image;
  for (std::size_t i = 0; i < out.px.size(); ++i) {
    out.px[i] = std::clamp(out.px[i] + spec.amplitude * field.px[i], 0.f, 1.f);
  }
  return out;
}

}  // namespace odm::attack

#pragma once

#include <cstdint>

#include "odm/image.hpp"

namespace odm::attack {

enum class PatchCorner { LowerRight, LowerLeft, UpperRight, UpperLeft };

// Sample-agnostic baseline triggers: a solid corner patch, or one fixed
// pseudo-random noise tensor blended into every image.
struct BaselineTriggerSpec {
  enum class Kind { Patch, Noise };
  Kind kind = Kind::Patch;

  // patch
  int patch_size = 4;
  PatchCorner corner = PatchCorner::LowerRight;
  float fill = 1.0f;

  // noise
  float amplitude = 8.0f / 255.0f;
  std::uint64_t seed = 7;
};

// The fixed perturbation tensor of a noise trigger, deterministic in the
// seed, values in [-1, 1]; identical for every image of a given shape.
Image noise_field(const BaselineTriggerSpec& spec, int h, int w, int c);

// Patch: corner block set to the fill value, everything else untouched.
// Noise: clamp01(image + amplitude * noise). Throws PatchTooLarge.
Image apply_baseline_trigger(const Image& image, const BaselineTriggerSpec& spec);

const char* to_string(PatchCorner c);

}  // namespace odm::attack

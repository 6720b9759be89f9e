#pragma once

#include <cstdint>

#include "odm/data/dataset.hpp"

namespace odm::fix {

// Procedural 10-class traffic-sign-style image set: distinct sign geometry
// per class over randomized backgrounds with pose/color/noise jitter. Small
// CNNs reach high accuracy on it, which is what the desk-scale experiments
// need from a stand-in corpus.
inline constexpr int kSignClasses = 10;

std::vector<std::string> sign_class_names();

odm::Image render_sign(int class_id, std::uint64_t seed, int size = 32);

data::Dataset make_sign_dataset(std::size_t per_class, std::uint64_t seed, int size = 32);

}  // namespace odm::fix

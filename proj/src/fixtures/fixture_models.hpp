#pragma once

#include <cstdint>

#include "odm/model/ondevice.hpp"

namespace odm::fix {

// On-device model fixtures with seeded random parameters (OHWI layouts).

// conv16-pool-conv32-pool-conv64-pool-flatten-dense64-dense{classes}-softmax,
// ~90k parameters at 32x32x3.
model::OnDeviceModel victim_cnn(std::uint64_t seed, int classes = 10, int input_side = 32);

// conv-pool-dense-softmax on a small input.
model::OnDeviceModel tiny_cnn(std::uint64_t seed);

// single reshape op (identity view); minimal one-node graph.
model::OnDeviceModel identity_model();

// depthwise-separable stack; histogram dominated by DepthwiseConv2D.
model::OnDeviceModel depthwise_cnn(std::uint64_t seed);

// conv path with a residual Add and trailing Reshape + Softmax.
model::OnDeviceModel residual_cnn(std::uint64_t seed);

// victim-shaped model with uint8-quantized conv/dense weights and a
// quantized input tensor.
model::OnDeviceModel quantized_cnn(std::uint64_t seed, int classes = 10);

// two outputs named boxes/scores (detection-shaped).
model::OnDeviceModel two_head_model(std::uint64_t seed);

// image-to-image: output shape equals input shape.
model::OnDeviceModel stylize_model(std::uint64_t seed);

// output reshaped to [batch, K, 2] keypoints.
model::OnDeviceModel keypoint_model(std::uint64_t seed);

// contains one Custom operator; must be rejected by reconstruction.
model::OnDeviceModel custom_op_model(std::uint64_t seed);

// random whitelist-only architecture for round-trip property tests.
model::OnDeviceModel random_whitelist_model(std::uint64_t seed);

}  // namespace odm::fix

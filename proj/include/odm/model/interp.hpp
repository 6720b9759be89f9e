#pragma once

#include <vector>

#include "odm/model/ondevice.hpp"

namespace odm::model {

// Reference executor for on-device models: direct per-operator loops over the
// serialized tensors, single sample at a time, float arithmetic (quantized
// tensors are dequantized at load). Deliberately kept independent of the
// trainable engine so equivalence checks compare two separate inference
// paths.
class Interpreter {
 public:
  explicit Interpreter(const OnDeviceModel& model);

  // Per-sample shapes with any symbolic batch normalized to 1.
  const std::vector<int>& input_shape(std::size_t i) const;
  const std::vector<int>& output_shape(std::size_t i) const;
  std::size_t input_count() const { return model_.inputs.size(); }
  std::size_t output_count() const { return model_.outputs.size(); }

  // One sample per call: flat buffers matching input_shape(i). Thread-safe
  // for concurrent calls on one instance.
  std::vector<std::vector<float>> run(const std::vector<std::vector<float>>& inputs) const;

 private:
  const OnDeviceModel model_;
  std::vector<std::vector<int>> shapes_;       // per tensor, batch=1
  std::vector<std::vector<float>> weights_;    // dequantized parameter data
  std::vector<bool> is_param_;
};

}  // namespace odm::model

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace odm::nn {

// Dense row-major float tensor. Activations use NHWC (or [N, D] for flat
// features); weights use HWIO for convolutions and [in, out] for dense
// layers (the trainable layouts).
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.f);

  std::size_t count() const;
  int dim(std::size_t i) const { return shape.at(i); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
};

std::size_t shape_count(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// x_p = clamp01(x); mask[i] = 1 where the clamp is the identity (gradient
// passes), 0 where the value was clipped.
Tensor clamp01_with_mask(const Tensor& x, Tensor* mask = nullptr);

void add_inplace(Tensor& into, const Tensor& other);  // shapes must match
void scale_inplace(Tensor& t, float s);

}  // namespace odm::nn

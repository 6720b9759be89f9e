#include "odm/nn/tensor.hpp"

#include <sstream>

#include "odm/errors.hpp"

namespace odm::nn {

Tensor::Tensor(std::vector<int> s, float fill)
    : shape(std::move(s)), data(shape_count(shape), fill) {}

std::size_t Tensor::count() const { return data.size(); }

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor clamp01_with_mask(const Tensor& x, Tensor* mask) {
  Tensor out = x;
  if (mask) *mask = Tensor(x.shape, 1.f);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] < 0.f) {
      out.data[i] = 0.f;
      if (mask) mask->data[i] = 0.f;
    } else if (out.data[i] > 1.f) {
      out.data[i] = 1.f;
      if (mask) mask->data[i] = 0.f;
    }
  }
  return out;
}

void add_inplace(Tensor& into, const Tensor& other) {
  if (!into.same_shape(other)) {
    throw ShapeMismatch("tensor add: " + shape_str(into.shape) + " vs " +
                        shape_str(other.shape));
  }
  for (std::size_t i = 0; i < into.data.size(); ++i) into.data[i] += other.data[i];
}

void scale_inplace(Tensor& t, float s) {
  for (float& v : t.data) v *= s;
}

}  // namespace odm::nn

#include "odm/model/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odm/errors.hpp"

namespace odm::model {

namespace {

std::vector<int> normalize_batch(std::vector<int> shape) {
  if (!shape.empty() && shape[0] == -1) shape[0] = 1;
  return shape;
}

std::size_t count_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

struct Axis {
  int out = 0;
  int before = 0;
};

Axis same_valid(int in, int k, int stride, Padding pad) {
  Axis a;
  if (pad == Padding::Same) {
    a.out = (in + stride - 1) / stride;
    a.before = std::max((a.out - 1) * stride + k - in, 0) / 2;
  } else {
    if (in < k) throw UnsupportedFormat("valid padding window exceeds input");
    a.out = (in - k) / stride + 1;
    a.before = 0;
  }
  return a;
}

void fused_activation(Activation act, std::vector<float>& v) {
  switch (act) {
    case Activation::None: return;
    case Activation::Relu:
      for (auto& x : v) x = std::max(x, 0.f);
      return;
    case Activation::Relu6:
      for (auto& x : v) x = std::clamp(x, 0.f, 6.f);
      return;
  }
}

}  // namespace

Interpreter::Interpreter(const OnDeviceModel& model) : model_(model) {
  check_structure(model_);
  shapes_.resize(model_.tensors.size());
  weights_.resize(model_.tensors.size());
  is_param_.resize(model_.tensors.size(), false);
  for (std::size_t i = 0; i < model_.tensors.size(); ++i) {
    const auto& t = model_.tensors[i];
    shapes_[i] = normalize_batch(t.shape);
    if (t.has_data()) {
      weights_[i] = t.as_floats();
      is_param_[i] = true;
    }
  }
  for (const auto& op : model_.ops) {
    if (op.opcode == OpCode::Custom) {
      throw UnsupportedOperator("Custom(" + op.custom_name + ")");
    }
  }
}

const std::vector<int>& Interpreter::input_shape(std::size_t i) const {
  return shapes_[static_cast<std::size_t>(model_.inputs.at(i))];
}

const std::vector<int>& Interpreter::output_shape(std::size_t i) const {
  return shapes_[static_cast<std::size_t>(model_.outputs.at(i))];
}

std::vector<std::vector<float>> Interpreter::run(
    const std::vector<std::vector<float>>& inputs) const {
  if (inputs.size() != model_.inputs.size()) {
    throw SignatureMismatch("interpreter expects " + std::to_string(model_.inputs.size()) +
                            " inputs");
  }
  std::vector<std::vector<float>> values(model_.tensors.size());
  for (std::size_t i = 0; i < model_.tensors.size(); ++i) {
    if (is_param_[i]) values[i] = weights_[i];
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto id = static_cast<std::size_t>(model_.inputs[i]);
    if (inputs[i].size() != count_of(shapes_[id])) {
      throw SignatureMismatch("input " + std::to_string(i) + " has wrong element count");
    }
    values[id] = inputs[i];
  }

  for (const auto& op : model_.ops) {
    const auto out_id = static_cast<std::size_t>(op.outputs.at(0));
    const auto in_id = static_cast<std::size_t>(op.inputs.at(0));
    const auto& in_shape = shapes_[in_id];
    const auto& x = values[in_id];
    std::vector<float> out;

    switch (op.opcode) {
      case OpCode::Conv2D: {
        // weights OHWI: [out, kh, kw, in]
        const auto& w = values[static_cast<std::size_t>(op.inputs[1])];
        const auto& ws = shapes_[static_cast<std::size_t>(op.inputs[1])];
        const auto& bias = values[static_cast<std::size_t>(op.inputs[2])];
        const int h = in_shape[1], wd = in_shape[2], ci = in_shape[3];
        const int oc = ws[0], kh = ws[1], kw = ws[2];
        if (ws[3] != ci) throw UnsupportedFormat("conv weights do not match input channels");
        const Axis ay = same_valid(h, kh, op.stride_h, op.padding);
        const Axis ax = same_valid(wd, kw, op.stride_w, op.padding);
        out.assign(static_cast<std::size_t>(ay.out) * ax.out * oc, 0.f);
        for (int oy = 0; oy < ay.out; ++oy) {
          for (int ox = 0; ox < ax.out; ++ox) {
            for (int o = 0; o < oc; ++o) {
              float acc = bias[static_cast<std::size_t>(o)];
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * op.stride_h - ay.before + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ox * op.stride_w - ax.before + kx;
                  if (ix < 0 || ix >= wd) continue;
                  for (int c = 0; c < ci; ++c) {
                    acc += x[(static_cast<std::size_t>(iy) * wd + ix) * ci + c] *
                           w[((static_cast<std::size_t>(o) * kh + ky) * kw + kx) * ci + c];
                  }
                }
              }
              out[(static_cast<std::size_t>(oy) * ax.out + ox) * oc + o] = acc;
            }
          }
        }
        fused_activation(op.activation, out);
        break;
      }
      case OpCode::DepthwiseConv2D: {
        // weights 1HWC: [1, kh, kw, ci*mult]
        const auto& w = values[static_cast<std::size_t>(op.inputs[1])];
        const auto& ws = shapes_[static_cast<std::size_t>(op.inputs[1])];
        const auto& bias = values[static_cast<std::size_t>(op.inputs[2])];
        const int h = in_shape[1], wd = in_shape[2], ci = in_shape[3];
        const int kh = ws[1], kw = ws[2];
        const int mult = op.depth_multiplier;
        if (ws[3] != ci * mult) throw UnsupportedFormat("depthwise weights mismatch");
        const Axis ay = same_valid(h, kh, op.stride_h, op.padding);
        const Axis ax = same_valid(wd, kw, op.stride_w, op.padding);
        const int oc = ci * mult;
        out.assign(static_cast<std::size_t>(ay.out) * ax.out * oc, 0.f);
        for (int oy = 0; oy < ay.out; ++oy) {
          for (int ox = 0; ox < ax.out; ++ox) {
            for (int c = 0; c < ci; ++c) {
              for (int m = 0; m < mult; ++m) {
                const int o = c * mult + m;
                float acc = bias[static_cast<std::size_t>(o)];
                for (int ky = 0; ky < kh; ++ky) {
                  const int iy = oy * op.stride_h - ay.before + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * op.stride_w - ax.before + kx;
                    if (ix < 0 || ix >= wd) continue;
                    acc += x[(static_cast<std::size_t>(iy) * wd + ix) * ci + c] *
                           w[(static_cast<std::size_t>(ky) * kw + kx) * oc + o];
                  }
                }
                out[(static_cast<std::size_t>(oy) * ax.out + ox) * oc + o] = acc;
              }
            }
          }
        }
        fused_activation(op.activation, out);
        break;
      }
      case OpCode::FullyConnected: {
        // weights [out, in]
        const auto& w = values[static_cast<std::size_t>(op.inputs[1])];
        const auto& ws = shapes_[static_cast<std::size_t>(op.inputs[1])];
        const auto& bias = values[static_cast<std::size_t>(op.inputs[2])];
        const int d = ws[1], oc = ws[0];
        if (x.size() != static_cast<std::size_t>(d)) {
          throw UnsupportedFormat("fully-connected input size mismatch");
        }
        out.assign(static_cast<std::size_t>(oc), 0.f);
        for (int o = 0; o < oc; ++o) {
          float acc = bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < d; ++i) {
            acc += x[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(o) * d + i];
          }
          out[static_cast<std::size_t>(o)] = acc;
        }
        fused_activation(op.activation, out);
        break;
      }
      case OpCode::MaxPool2D:
      case OpCode::AveragePool2D: {
        const int h = in_shape[1], wd = in_shape[2], c = in_shape[3];
        const Axis ay = same_valid(h, op.filter_h, op.stride_h, op.padding);
        const Axis ax = same_valid(wd, op.filter_w, op.stride_w, op.padding);
        out.assign(static_cast<std::size_t>(ay.out) * ax.out * c, 0.f);
        for (int oy = 0; oy < ay.out; ++oy) {
          for (int ox = 0; ox < ax.out; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
              float best = -std::numeric_limits<float>::infinity();
              float sum = 0.f;
              int cnt = 0;
              for (int ky = 0; ky < op.filter_h; ++ky) {
                const int iy = oy * op.stride_h - ay.before + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < op.filter_w; ++kx) {
                  const int ix = ox * op.stride_w - ax.before + kx;
                  if (ix < 0 || ix >= wd) continue;
                  const float v = x[(static_cast<std::size_t>(iy) * wd + ix) * c + ch];
                  best = std::max(best, v);
                  sum += v;
                  ++cnt;
                }
              }
              out[(static_cast<std::size_t>(oy) * ax.out + ox) * c + ch] =
                  op.opcode == OpCode::MaxPool2D ? best
                                                 : (cnt ? sum / static_cast<float>(cnt) : 0.f);
            }
          }
        }
        break;
      }
      case OpCode::Relu: {
        out = x;
        for (auto& v : out) v = std::max(v, 0.f);
        break;
      }
      case OpCode::Relu6: {
        out = x;
        for (auto& v : out) v = std::clamp(v, 0.f, 6.f);
        break;
      }
      case OpCode::Softmax: {
        out = x;
        float mx = -std::numeric_limits<float>::infinity();
        for (const auto v : out) mx = std::max(mx, v);
        double denom = 0.0;
        for (auto& v : out) {
          v = std::exp(v - mx);
          denom += v;
        }
        for (auto& v : out) v = static_cast<float>(v / denom);
        break;
      }
      case OpCode::Add: {
        const auto& y = values[static_cast<std::size_t>(op.inputs[1])];
        if (x.size() != y.size()) throw UnsupportedFormat("add operand size mismatch");
        out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
        fused_activation(op.activation, out);
        break;
      }
      case OpCode::Reshape: {
        out = x;  // same elements, new view
        break;
      }
      case OpCode::Custom:
        throw UnsupportedOperator("Custom(" + op.custom_name + ")");
    }
    values[out_id] = std::move(out);
    // Shape bookkeeping against the recorded tensor shape.
    if (count_of(shapes_[out_id]) != values[out_id].size()) {
      throw UnsupportedFormat("recorded shape disagrees with computed size for tensor " +
                              model_.tensors[out_id].name);
    }
  }

  std::vector<std::vector<float>> outputs;
  outputs.reserve(model_.outputs.size());
  for (const auto id : model_.outputs) {
    outputs.push_back(values[static_cast<std::size_t>(id)]);
  }
  return outputs;
}

}  // namespace odm::model

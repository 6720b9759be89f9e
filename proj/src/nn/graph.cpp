#include "odm/nn/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "odm/errors.hpp"

namespace odm::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapMC = Eigen::Map<const MatRM>;

struct PadInfo {
  int out = 0;
  int before = 0;
};

PadInfo pad_axis(int in, int k, int stride, Pad pad) {
  PadInfo p;
  if (pad == Pad::Same) {
    p.out = (in + stride - 1) / stride;
    const int total = std::max((p.out - 1) * stride + k - in, 0);
    p.before = total / 2;
  } else {
    if (in < k) throw ShapeMismatch("window larger than input in valid padding");
    p.out = (in - k) / stride + 1;
    p.before = 0;
  }
  return p;
}

void apply_act(Act act, float* x, std::size_t n) {
  switch (act) {
    case Act::None: return;
    case Act::Relu:
      for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.f ? x[i] : 0.f;
      return;
    case Act::Relu6:
      for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.f, 6.f);
      return;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) x[i] = 1.f / (1.f + std::exp(-x[i]));
      return;
    case Act::Tanh:
      for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
      return;
  }
}

// d(pre-activation) from d(output) using the stored post-activation values.
void act_grad_inplace(Act act, const float* out, float* d, std::size_t n) {
  switch (act) {
    case Act::None: return;
    case Act::Relu:
      for (std::size_t i = 0; i < n; ++i) d[i] = out[i] > 0.f ? d[i] : 0.f;
      return;
    case Act::Relu6:
      for (std::size_t i = 0; i < n; ++i) d[i] = (out[i] > 0.f && out[i] < 6.f) ? d[i] : 0.f;
      return;
    case Act::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) d[i] *= out[i] * (1.f - out[i]);
      return;
    case Act::Tanh:
      for (std::size_t i = 0; i < n; ++i) d[i] *= 1.f - out[i] * out[i];
      return;
  }
}

// im2col for one NHWC sample: rows = output positions, cols = kh*kw*C patch.
void im2col(const float* x, int h, int w, int c, int kh, int kw, int sh, int sw,
            int pad_top, int pad_left, int oh, int ow, float* a) {
  const int patch = kh * kw * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      float* row = a + (static_cast<std::size_t>(oy) * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sh - pad_top + ky;
        float* dst = row + static_cast<std::size_t>(ky) * kw * c;
        if (iy < 0 || iy >= h) {
          std::fill(dst, dst + static_cast<std::size_t>(kw) * c, 0.f);
          continue;
        }
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sw - pad_left + kx;
          if (ix < 0 || ix >= w) {
            std::fill(dst + static_cast<std::size_t>(kx) * c,
                      dst + static_cast<std::size_t>(kx + 1) * c, 0.f);
          } else {
            const float* src = x + (static_cast<std::size_t>(iy) * w + ix) * c;
            std::copy(src, src + c, dst + static_cast<std::size_t>(kx) * c);
          }
        }
      }
    }
  }
}

// Scatter-add of an im2col-shaped gradient back onto the input sample.
void col2im_add(const float* a, int h, int w, int c, int kh, int kw, int sh, int sw,
                int pad_top, int pad_left, int oh, int ow, float* dx) {
  const int patch = kh * kw * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const float* row = a + (static_cast<std::size_t>(oy) * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sh - pad_top + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sw - pad_left + kx;
          if (ix < 0 || ix >= w) continue;
          const float* src = row + (static_cast<std::size_t>(ky) * kw + kx) * c;
          float* dst = dx + (static_cast<std::size_t>(iy) * w + ix) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph building

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::new_param(const std::string& name, std::vector<int> shape) {
  params_.push_back(Param{name, Tensor(std::move(shape))});
  return static_cast<int>(params_.size()) - 1;
}

int Graph::add_input(std::vector<int> sample_shape, std::string name) {
  Node n;
  n.kind = NodeKind::Input;
  n.name = std::move(name);
  n.out_sample_shape = std::move(sample_shape);
  const int id = push(std::move(n));
  input_nodes_.push_back(id);
  return id;
}

int Graph::conv2d(int in, int out_ch, int kh, int kw, int sh, int sw, Pad pad, Act act,
                  std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 3) throw ShapeMismatch("conv2d expects an image input");
  const int c = s[2];
  const PadInfo py = pad_axis(s[0], kh, sh, pad);
  const PadInfo px = pad_axis(s[1], kw, sw, pad);
  Node n;
  n.kind = NodeKind::Conv2D;
  n.name = name.empty() ? "conv" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.out_channels = out_ch;
  n.kh = kh;
  n.kw = kw;
  n.stride_h = sh;
  n.stride_w = sw;
  n.padding = pad;
  n.act = act;
  n.out_sample_shape = {py.out, px.out, out_ch};
  n.weight = new_param(n.name + "/w", {kh, kw, c, out_ch});
  n.bias = new_param(n.name + "/b", {out_ch});
  return push(std::move(n));
}

int Graph::depthwise_conv2d(int in, int mult, int kh, int kw, int sh, int sw, Pad pad, Act act,
                            std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 3) throw ShapeMismatch("depthwise_conv2d expects an image input");
  const int c = s[2];
  const PadInfo py = pad_axis(s[0], kh, sh, pad);
  const PadInfo px = pad_axis(s[1], kw, sw, pad);
  Node n;
  n.kind = NodeKind::DepthwiseConv2D;
  n.name = name.empty() ? "dwconv" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.depth_multiplier = mult;
  n.out_channels = c * mult;
  n.kh = kh;
  n.kw = kw;
  n.stride_h = sh;
  n.stride_w = sw;
  n.padding = pad;
  n.act = act;
  n.out_sample_shape = {py.out, px.out, c * mult};
  n.weight = new_param(n.name + "/w", {kh, kw, c, mult});
  n.bias = new_param(n.name + "/b", {c * mult});
  return push(std::move(n));
}

int Graph::dense(int in, int out_dim, Act act, std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 1) throw ShapeMismatch("dense expects flat input; reshape first");
  Node n;
  n.kind = NodeKind::Dense;
  n.name = name.empty() ? "dense" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.act = act;
  n.out_channels = out_dim;
  n.out_sample_shape = {out_dim};
  n.weight = new_param(n.name + "/w", {s[0], out_dim});
  n.bias = new_param(n.name + "/b", {out_dim});
  return push(std::move(n));
}

int Graph::max_pool(int in, int fh, int fw, int sh, int sw, Pad pad, std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 3) throw ShapeMismatch("pooling expects an image input");
  const PadInfo py = pad_axis(s[0], fh, sh, pad);
  const PadInfo px = pad_axis(s[1], fw, sw, pad);
  Node n;
  n.kind = NodeKind::MaxPool2D;
  n.name = name.empty() ? "maxpool" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.kh = fh;
  n.kw = fw;
  n.stride_h = sh;
  n.stride_w = sw;
  n.padding = pad;
  n.out_sample_shape = {py.out, px.out, s[2]};
  return push(std::move(n));
}

int Graph::avg_pool(int in, int fh, int fw, int sh, int sw, Pad pad, std::string name) {
  Node n;
  const auto& s = sample_shape(in);
  if (s.size() != 3) throw ShapeMismatch("pooling expects an image input");
  const PadInfo py = pad_axis(s[0], fh, sh, pad);
  const PadInfo px = pad_axis(s[1], fw, sw, pad);
  n.kind = NodeKind::AvgPool2D;
  n.name = name.empty() ? "avgpool" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.kh = fh;
  n.kw = fw;
  n.stride_h = sh;
  n.stride_w = sw;
  n.padding = pad;
  n.out_sample_shape = {py.out, px.out, s[2]};
  return push(std::move(n));
}

int Graph::activation(int in, Act act, std::string name) {
  Node n;
  n.kind = NodeKind::Activation;
  n.name = name.empty() ? "act" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.act = act;
  n.out_sample_shape = sample_shape(in);
  return push(std::move(n));
}

int Graph::softmax(int in, std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 1) throw ShapeMismatch("softmax expects flat input");
  Node n;
  n.kind = NodeKind::Softmax;
  n.name = name.empty() ? "softmax" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.out_sample_shape = s;
  return push(std::move(n));
}

int Graph::add(int a, int b, Act act, std::string name) {
  if (sample_shape(a) != sample_shape(b)) {
    throw ShapeMismatch("add requires equal shapes: " + shape_str(sample_shape(a)) + " vs " +
                        shape_str(sample_shape(b)));
  }
  Node n;
  n.kind = NodeKind::Add;
  n.name = name.empty() ? "add" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {a, b};
  n.act = act;
  n.out_sample_shape = sample_shape(a);
  return push(std::move(n));
}

int Graph::concat(int a, int b, std::string name) {
  const auto& sa = sample_shape(a);
  const auto& sb = sample_shape(b);
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[1] != sb[1]) {
    throw ShapeMismatch("concat requires equal spatial dims");
  }
  Node n;
  n.kind = NodeKind::Concat;
  n.name = name.empty() ? "concat" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {a, b};
  n.out_sample_shape = {sa[0], sa[1], sa[2] + sb[2]};
  return push(std::move(n));
}

int Graph::upsample2x(int in, std::string name) {
  const auto& s = sample_shape(in);
  if (s.size() != 3) throw ShapeMismatch("upsample expects an image input");
  Node n;
  n.kind = NodeKind::Upsample2x;
  n.name = name.empty() ? "up" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.out_sample_shape = {s[0] * 2, s[1] * 2, s[2]};
  return push(std::move(n));
}

int Graph::reshape(int in, std::vector<int> sample_shape_out, std::string name) {
  if (shape_count(sample_shape(in)) != shape_count(sample_shape_out)) {
    throw ShapeMismatch("reshape changes element count");
  }
  Node n;
  n.kind = NodeKind::Reshape;
  n.name = name.empty() ? "reshape" + std::to_string(nodes_.size()) : std::move(name);
  n.inputs = {in};
  n.out_sample_shape = std::move(sample_shape_out);
  return push(std::move(n));
}

void Graph::mark_output(int node) { outputs_.push_back(node); }

std::size_t Graph::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.count();
  return n;
}

void Graph::init_params(rng::Engine& gen) {
  for (auto& p : params_) {
    const auto& shape = p.value.shape;
    if (shape.size() == 1) {
      std::fill(p.value.data.begin(), p.value.data.end(), 0.f);  // bias
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
      fan_in *= static_cast<std::size_t>(shape[i]);
    }
    const float limit = std::sqrt(6.f / static_cast<float>(fan_in));
    for (float& v : p.value.data) v = rng::uniformf(gen, -limit, limit);
  }
}

// ---------------------------------------------------------------------------
// Runner

Runner::Runner(const Graph& g) : g_(g) {
  values_.resize(g.nodes().size());
  grads_.resize(g.nodes().size());
  pool_argmax_.resize(g.nodes().size());
  param_grads_.resize(g.params().size());
  for (std::size_t i = 0; i < param_grads_.size(); ++i) {
    param_grads_[i] = Tensor(g.params()[i].value.shape);
  }
}

void Runner::zero_grads() {
  for (auto& t : param_grads_) std::fill(t.data.begin(), t.data.end(), 0.f);
}

void Runner::forward(const std::vector<Tensor>& inputs) {
  const auto& input_nodes = g_.input_nodes();
  if (inputs.size() != input_nodes.size()) {
    throw ShapeMismatch("graph expects " + std::to_string(input_nodes.size()) + " inputs");
  }
  for (auto& gr : grads_) gr = Tensor();
  batch_ = inputs.empty() ? 0 : inputs[0].dim(0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& expect = g_.sample_shape(input_nodes[i]);
    std::vector<int> full = {batch_};
    full.insert(full.end(), expect.begin(), expect.end());
    if (inputs[i].shape != full) {
      throw ShapeMismatch("input " + std::to_string(i) + " is " + shape_str(inputs[i].shape) +
                          ", expected " + shape_str(full));
    }
    values_[static_cast<std::size_t>(input_nodes[i])] = inputs[i];
  }
  for (int id = 0; id < static_cast<int>(g_.nodes().size()); ++id) {
    if (g_.nodes()[static_cast<std::size_t>(id)].kind != NodeKind::Input) compute(id);
  }
}

void Runner::compute(int id) {
  const Node& n = g_.nodes()[static_cast<std::size_t>(id)];
  std::vector<int> out_shape = {batch_};
  out_shape.insert(out_shape.end(), n.out_sample_shape.begin(), n.out_sample_shape.end());
  Tensor out(out_shape);
  const Tensor& x = values_[static_cast<std::size_t>(n.inputs.empty() ? 0 : n.inputs[0])];

  switch (n.kind) {
    case NodeKind::Input:
      return;
    case NodeKind::Conv2D: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out;
      const int patch = n.kh * n.kw * c;
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;
      const auto& bias = g_.params()[static_cast<std::size_t>(n.bias)].value;
      MapMC W2(wt.ptr(), patch, n.out_channels);
      std::vector<float> a(static_cast<std::size_t>(oh) * ow * patch);
      for (int b = 0; b < batch_; ++b) {
        im2col(x.ptr() + static_cast<std::size_t>(b) * h * w * c, h, w, c, n.kh, n.kw,
               n.stride_h, n.stride_w, py.before, px.before, oh, ow, a.data());
        MapMC A(a.data(), oh * ow, patch);
        MapM O(out.ptr() + static_cast<std::size_t>(b) * oh * ow * n.out_channels, oh * ow,
               n.out_channels);
        O.noalias() = A * W2;
        O.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.ptr(), n.out_channels);
      }
      apply_act(n.act, out.ptr(), out.count());
      break;
    }
    case NodeKind::DepthwiseConv2D: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out, mult = n.depth_multiplier;
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;  // [kh,kw,c,mult]
      const auto& bias = g_.params()[static_cast<std::size_t>(n.bias)].value;
      for (int b = 0; b < batch_; ++b) {
        const float* xs = x.ptr() + static_cast<std::size_t>(b) * h * w * c;
        float* os = out.ptr() + static_cast<std::size_t>(b) * oh * ow * c * mult;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            float* op = os + (static_cast<std::size_t>(oy) * ow + ox) * c * mult;
            for (int ch = 0; ch < c; ++ch) {
              for (int m = 0; m < mult; ++m) {
                float acc = bias.data[static_cast<std::size_t>(ch) * mult + m];
                for (int ky = 0; ky < n.kh; ++ky) {
                  const int iy = oy * n.stride_h - py.before + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < n.kw; ++kx) {
                    const int ix = ox * n.stride_w - px.before + kx;
                    if (ix < 0 || ix >= w) continue;
                    acc += xs[(static_cast<std::size_t>(iy) * w + ix) * c + ch] *
                           wt.data[((static_cast<std::size_t>(ky) * n.kw + kx) * c + ch) * mult +
                                   m];
                  }
                }
                op[static_cast<std::size_t>(ch) * mult + m] = acc;
              }
            }
          }
        }
      }
      apply_act(n.act, out.ptr(), out.count());
      break;
    }
    case NodeKind::Dense: {
      const int d = x.dim(1);
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;
      const auto& bias = g_.params()[static_cast<std::size_t>(n.bias)].value;
      MapMC X(x.ptr(), batch_, d);
      MapMC W(wt.ptr(), d, n.out_channels);
      MapM O(out.ptr(), batch_, n.out_channels);
      O.noalias() = X * W;
      O.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.ptr(), n.out_channels);
      apply_act(n.act, out.ptr(), out.count());
      break;
    }
    case NodeKind::MaxPool2D:
    case NodeKind::AvgPool2D: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out;
      const bool is_max = n.kind == NodeKind::MaxPool2D;
      auto& argmax = pool_argmax_[static_cast<std::size_t>(id)];
      if (is_max) argmax.assign(out.count(), -1);
      for (int b = 0; b < batch_; ++b) {
        const float* xs = x.ptr() + static_cast<std::size_t>(b) * h * w * c;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
              float best = -std::numeric_limits<float>::infinity();
              int best_idx = -1;
              float sum = 0.f;
              int count = 0;
              for (int ky = 0; ky < n.kh; ++ky) {
                const int iy = oy * n.stride_h - py.before + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < n.kw; ++kx) {
                  const int ix = ox * n.stride_w - px.before + kx;
                  if (ix < 0 || ix >= w) continue;
                  const int idx = (iy * w + ix) * c + ch;
                  const float v = xs[idx];
                  if (v > best) {
                    best = v;
                    best_idx = idx;
                  }
                  sum += v;
                  ++count;
                }
              }
              const std::size_t o =
                  ((static_cast<std::size_t>(b) * oh + oy) * ow + ox) * c + ch;
              if (is_max) {
                out.data[o] = best;
                argmax[o] = best_idx;
              } else {
                out.data[o] = count > 0 ? sum / static_cast<float>(count) : 0.f;
              }
            }
          }
        }
      }
      break;
    }
    case NodeKind::Activation: {
      out.data = x.data;
      apply_act(n.act, out.ptr(), out.count());
      break;
    }
    case NodeKind::Softmax: {
      const int c = x.dim(1);
      for (int b = 0; b < batch_; ++b) {
        const float* xr = x.ptr() + static_cast<std::size_t>(b) * c;
        float* orow = out.ptr() + static_cast<std::size_t>(b) * c;
        float mx = xr[0];
        for (int i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
        float denom = 0.f;
        for (int i = 0; i < c; ++i) {
          orow[i] = std::exp(xr[i] - mx);
          denom += orow[i];
        }
        for (int i = 0; i < c; ++i) orow[i] /= denom;
      }
      break;
    }
    case NodeKind::Add: {
      const Tensor& y = values_[static_cast<std::size_t>(n.inputs[1])];
      out.data = x.data;
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += y.data[i];
      apply_act(n.act, out.ptr(), out.count());
      break;
    }
    case NodeKind::Concat: {
      const Tensor& y = values_[static_cast<std::size_t>(n.inputs[1])];
      const int hw = x.dim(1) * x.dim(2);
      const int c1 = x.dim(3), c2 = y.dim(3);
      for (int b = 0; b < batch_; ++b) {
        for (int i = 0; i < hw; ++i) {
          float* dst =
              out.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * (c1 + c2);
          const float* s1 = x.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * c1;
          const float* s2 = y.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * c2;
          std::copy(s1, s1 + c1, dst);
          std::copy(s2, s2 + c2, dst + c1);
        }
      }
      break;
    }
    case NodeKind::Upsample2x: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      for (int b = 0; b < batch_; ++b) {
        for (int y = 0; y < 2 * h; ++y) {
          for (int xw = 0; xw < 2 * w; ++xw) {
            const float* src =
                x.ptr() + ((static_cast<std::size_t>(b) * h + y / 2) * w + xw / 2) * c;
            float* dst =
                out.ptr() + ((static_cast<std::size_t>(b) * 2 * h + y) * 2 * w + xw) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
      break;
    }
    case NodeKind::Reshape: {
      out.data = x.data;
      break;
    }
  }
  values_[static_cast<std::size_t>(id)] = std::move(out);
}

void Runner::backward(int node, const Tensor& grad) {
  if (!grad.same_shape(values_[static_cast<std::size_t>(node)])) {
    throw ShapeMismatch("backward seed shape mismatch");
  }
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.data.empty()) {
    g = grad;
  } else {
    add_inplace(g, grad);
  }
  for (int id = node; id >= 0; --id) {
    if (grads_[static_cast<std::size_t>(id)].data.empty()) continue;
    if (g_.nodes()[static_cast<std::size_t>(id)].kind == NodeKind::Input) continue;
    compute_grad(id);
  }
}

void Runner::compute_grad(int id) {
  const Node& n = g_.nodes()[static_cast<std::size_t>(id)];
  Tensor& dout = grads_[static_cast<std::size_t>(id)];
  const Tensor& out = values_[static_cast<std::size_t>(id)];
  const Tensor& x = values_[static_cast<std::size_t>(n.inputs[0])];

  auto grad_of = [&](int input_node) -> Tensor& {
    auto& g = grads_[static_cast<std::size_t>(input_node)];
    if (g.data.empty()) g = Tensor(values_[static_cast<std::size_t>(input_node)].shape);
    return g;
  };

  switch (n.kind) {
    case NodeKind::Input:
      return;
    case NodeKind::Conv2D: {
      act_grad_inplace(n.act, out.ptr(), dout.ptr(), dout.count());
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out;
      const int patch = n.kh * n.kw * c;
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;
      Tensor& dx = grad_of(n.inputs[0]);
      Tensor& dw = param_grads_[static_cast<std::size_t>(n.weight)];
      Tensor& db = param_grads_[static_cast<std::size_t>(n.bias)];
      MapMC W2(wt.ptr(), patch, n.out_channels);
      MapM dW2(dw.ptr(), patch, n.out_channels);
      std::vector<float> a(static_cast<std::size_t>(oh) * ow * patch);
      std::vector<float> da(a.size());
      for (int b = 0; b < batch_; ++b) {
        im2col(x.ptr() + static_cast<std::size_t>(b) * h * w * c, h, w, c, n.kh, n.kw,
               n.stride_h, n.stride_w, py.before, px.before, oh, ow, a.data());
        MapMC A(a.data(), oh * ow, patch);
        MapMC dO(dout.ptr() + static_cast<std::size_t>(b) * oh * ow * n.out_channels, oh * ow,
                 n.out_channels);
        dW2.noalias() += A.transpose() * dO;
        Eigen::Map<Eigen::RowVectorXf>(db.ptr(), n.out_channels) += dO.colwise().sum();
        MapM dA(da.data(), oh * ow, patch);
        dA.noalias() = dO * W2.transpose();
        col2im_add(da.data(), h, w, c, n.kh, n.kw, n.stride_h, n.stride_w, py.before,
                   px.before, oh, ow, dx.ptr() + static_cast<std::size_t>(b) * h * w * c);
      }
      break;
    }
    case NodeKind::DepthwiseConv2D: {
      act_grad_inplace(n.act, out.ptr(), dout.ptr(), dout.count());
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out, mult = n.depth_multiplier;
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;
      Tensor& dx = grad_of(n.inputs[0]);
      Tensor& dw = param_grads_[static_cast<std::size_t>(n.weight)];
      Tensor& db = param_grads_[static_cast<std::size_t>(n.bias)];
      for (int b = 0; b < batch_; ++b) {
        const float* xs = x.ptr() + static_cast<std::size_t>(b) * h * w * c;
        float* dxs = dx.ptr() + static_cast<std::size_t>(b) * h * w * c;
        const float* dos = dout.ptr() + static_cast<std::size_t>(b) * oh * ow * c * mult;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const float* dop = dos + (static_cast<std::size_t>(oy) * ow + ox) * c * mult;
            for (int ch = 0; ch < c; ++ch) {
              for (int m = 0; m < mult; ++m) {
                const float g = dop[static_cast<std::size_t>(ch) * mult + m];
                if (g == 0.f) continue;
                db.data[static_cast<std::size_t>(ch) * mult + m] += g;
                for (int ky = 0; ky < n.kh; ++ky) {
                  const int iy = oy * n.stride_h - py.before + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < n.kw; ++kx) {
                    const int ix = ox * n.stride_w - px.before + kx;
                    if (ix < 0 || ix >= w) continue;
                    const std::size_t xi = (static_cast<std::size_t>(iy) * w + ix) * c + ch;
                    const std::size_t wi =
                        ((static_cast<std::size_t>(ky) * n.kw + kx) * c + ch) * mult + m;
                    dw.data[wi] += g * xs[xi];
                    dxs[xi] += g * wt.data[wi];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }
    case NodeKind::Dense: {
      act_grad_inplace(n.act, out.ptr(), dout.ptr(), dout.count());
      const int d = x.dim(1);
      const auto& wt = g_.params()[static_cast<std::size_t>(n.weight)].value;
      Tensor& dx = grad_of(n.inputs[0]);
      Tensor& dw = param_grads_[static_cast<std::size_t>(n.weight)];
      Tensor& db = param_grads_[static_cast<std::size_t>(n.bias)];
      MapMC X(x.ptr(), batch_, d);
      MapMC W(wt.ptr(), d, n.out_channels);
      MapMC dO(dout.ptr(), batch_, n.out_channels);
      MapM dW(dw.ptr(), d, n.out_channels);
      MapM dX(dx.ptr(), batch_, d);
      dW.noalias() += X.transpose() * dO;
      Eigen::Map<Eigen::RowVectorXf>(db.ptr(), n.out_channels) += dO.colwise().sum();
      dX.noalias() += dO * W.transpose();
      break;
    }
    case NodeKind::MaxPool2D: {
      Tensor& dx = grad_of(n.inputs[0]);
      const auto& argmax = pool_argmax_[static_cast<std::size_t>(id)];
      const std::size_t per_sample_in = static_cast<std::size_t>(x.dim(1)) * x.dim(2) * x.dim(3);
      const std::size_t per_sample_out = out.count() / static_cast<std::size_t>(batch_);
      for (int b = 0; b < batch_; ++b) {
        for (std::size_t i = 0; i < per_sample_out; ++i) {
          const std::size_t o = static_cast<std::size_t>(b) * per_sample_out + i;
          if (argmax[o] >= 0) {
            dx.data[static_cast<std::size_t>(b) * per_sample_in +
                    static_cast<std::size_t>(argmax[o])] += dout.data[o];
          }
        }
      }
      break;
    }
    case NodeKind::AvgPool2D: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      const PadInfo py = pad_axis(h, n.kh, n.stride_h, n.padding);
      const PadInfo px = pad_axis(w, n.kw, n.stride_w, n.padding);
      const int oh = py.out, ow = px.out;
      Tensor& dx = grad_of(n.inputs[0]);
      for (int b = 0; b < batch_; ++b) {
        float* dxs = dx.ptr() + static_cast<std::size_t>(b) * h * w * c;
        const float* dos = dout.ptr() + static_cast<std::size_t>(b) * oh * ow * c;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
              int count = 0;
              for (int ky = 0; ky < n.kh; ++ky) {
                const int iy = oy * n.stride_h - py.before + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < n.kw; ++kx) {
                  const int ix = ox * n.stride_w - px.before + kx;
                  if (ix >= 0 && ix < w) ++count;
                }
              }
              if (count == 0) continue;
              const float g =
                  dos[(static_cast<std::size_t>(oy) * ow + ox) * c + ch] /
                  static_cast<float>(count);
              for (int ky = 0; ky < n.kh; ++ky) {
                const int iy = oy * n.stride_h - py.before + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < n.kw; ++kx) {
                  const int ix = ox * n.stride_w - px.before + kx;
                  if (ix < 0 || ix >= w) continue;
                  dxs[(static_cast<std::size_t>(iy) * w + ix) * c + ch] += g;
                }
              }
            }
          }
        }
      }
      break;
    }
    case NodeKind::Activation: {
      Tensor d = dout;
      act_grad_inplace(n.act, out.ptr(), d.ptr(), d.count());
      add_inplace(grad_of(n.inputs[0]), d);
      break;
    }
    case NodeKind::Softmax: {
      const int c = x.dim(1);
      Tensor& dx = grad_of(n.inputs[0]);
      for (int b = 0; b < batch_; ++b) {
        const float* orow = out.ptr() + static_cast<std::size_t>(b) * c;
        const float* drow = dout.ptr() + static_cast<std::size_t>(b) * c;
        float dot = 0.f;
        for (int i = 0; i < c; ++i) dot += orow[i] * drow[i];
        float* dxr = dx.ptr() + static_cast<std::size_t>(b) * c;
        for (int i = 0; i < c; ++i) dxr[i] += orow[i] * (drow[i] - dot);
      }
      break;
    }
    case NodeKind::Add: {
      Tensor d = dout;
      act_grad_inplace(n.act, out.ptr(), d.ptr(), d.count());
      add_inplace(grad_of(n.inputs[0]), d);
      add_inplace(grad_of(n.inputs[1]), d);
      break;
    }
    case NodeKind::Concat: {
      const Tensor& y = values_[static_cast<std::size_t>(n.inputs[1])];
      Tensor& dx = grad_of(n.inputs[0]);
      Tensor& dy = grad_of(n.inputs[1]);
      const int hw = x.dim(1) * x.dim(2);
      const int c1 = x.dim(3), c2 = y.dim(3);
      for (int b = 0; b < batch_; ++b) {
        for (int i = 0; i < hw; ++i) {
          const float* src =
              dout.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * (c1 + c2);
          float* d1 = dx.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * c1;
          float* d2 = dy.ptr() + ((static_cast<std::size_t>(b) * hw) + i) * c2;
          for (int ch = 0; ch < c1; ++ch) d1[ch] += src[ch];
          for (int ch = 0; ch < c2; ++ch) d2[ch] += src[c1 + ch];
        }
      }
      break;
    }
    case NodeKind::Upsample2x: {
      const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
      Tensor& dx = grad_of(n.inputs[0]);
      for (int b = 0; b < batch_; ++b) {
        for (int y = 0; y < 2 * h; ++y) {
          for (int xw = 0; xw < 2 * w; ++xw) {
            const float* src =
                dout.ptr() + ((static_cast<std::size_t>(b) * 2 * h + y) * 2 * w + xw) * c;
            float* dst =
                dx.ptr() + ((static_cast<std::size_t>(b) * h + y / 2) * w + xw / 2) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
      break;
    }
    case NodeKind::Reshape: {
      Tensor& dx = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < dout.data.size(); ++i) dx.data[i] += dout.data[i];
      break;
    }
  }
}

std::vector<Tensor> infer(const Graph& g, const std::vector<Tensor>& inputs) {
  Runner r(g);
  r.forward(inputs);
  std::vector<Tensor> out;
  out.reserve(g.outputs().size());
  for (const int id : g.outputs()) out.push_back(r.value(id));
  return out;
}

}  // namespace odm::nn

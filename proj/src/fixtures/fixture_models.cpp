#include "fixture_models.hpp"

#include <cmath>
#include <cstring>

#include "odm/util/rng.hpp"

namespace odm::fix {

using model::Activation;
using model::DType;
using model::OnDeviceModel;
using model::OpCode;
using model::OpNode;
using model::Padding;
using model::TensorBlob;

namespace {

// Builder with the bookkeeping for tensor ids and topological op order.
struct ModelBuilder {
  OnDeviceModel m;
  rng::Engine gen;

  explicit ModelBuilder(std::uint64_t seed) : gen(rng::fork(seed, 0xF1C)) {}

  int tensor(TensorBlob t) {
    m.tensors.push_back(std::move(t));
    return static_cast<int>(m.tensors.size()) - 1;
  }

  int activation_tensor(const std::string& name, std::vector<int> shape,
                        DType dtype = DType::Float32) {
    TensorBlob t;
    t.name = name;
    t.dtype = dtype;
    t.shape = std::move(shape);
    return tensor(std::move(t));
  }

  int float_param(const std::string& name, std::vector<int> shape, float scale) {
    TensorBlob t;
    t.name = name;
    t.dtype = DType::Float32;
    t.shape = shape;
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    t.data.resize(n * 4);
    std::vector<float> vals(n);
    for (auto& v : vals) v = rng::uniformf(gen, -scale, scale);
    std::memcpy(t.data.data(), vals.data(), t.data.size());
    return tensor(std::move(t));
  }

  int quant_param(const std::string& name, std::vector<int> shape, float scale_limit) {
    TensorBlob t;
    t.name = name;
    t.dtype = DType::UInt8;
    t.shape = shape;
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    t.data.resize(n);
    for (auto& b : t.data) b = static_cast<std::uint8_t>(rng::uniform_index(gen, 256));
    t.quant = model::Quantization{scale_limit / 127.f, 128};
    return tensor(std::move(t));
  }

  // weight scale follows fan-in so random fixtures stay numerically tame
  static float he_scale(int fan_in) { return std::sqrt(2.f / static_cast<float>(fan_in)); }

  int conv(int in, const std::string& name, int in_h, int in_w, int in_c, int out_c, int k,
           int stride, Padding pad, Activation act, bool quantized = false) {
    const int w = quantized
                      ? quant_param(name + "/w", {out_c, k, k, in_c}, he_scale(k * k * in_c))
                      : float_param(name + "/w", {out_c, k, k, in_c}, he_scale(k * k * in_c));
    const int b = float_param(name + "/b", {out_c}, 0.05f);
    const int oh = pad == Padding::Same ? (in_h + stride - 1) / stride
                                        : (in_h - k) / stride + 1;
    const int ow = pad == Padding::Same ? (in_w + stride - 1) / stride
                                        : (in_w - k) / stride + 1;
    const int out = activation_tensor(name + "/out", {-1, oh, ow, out_c});
    OpNode op;
    op.opcode = OpCode::Conv2D;
    op.name = name;
    op.inputs = {in, w, b};
    op.outputs = {out};
    op.stride_h = op.stride_w = stride;
    op.padding = pad;
    op.activation = act;
    m.ops.push_back(std::move(op));
    return out;
  }

  int dwconv(int in, const std::string& name, int in_h, int in_w, int in_c, int mult, int k,
             int stride, Padding pad, Activation act) {
    const int w = float_param(name + "/w", {1, k, k, in_c * mult}, he_scale(k * k));
    const int b = float_param(name + "/b", {in_c * mult}, 0.05f);
    const int oh = pad == Padding::Same ? (in_h + stride - 1) / stride
                                        : (in_h - k) / stride + 1;
    const int ow = pad == Padding::Same ? (in_w + stride - 1) / stride
                                        : (in_w - k) / stride + 1;
    const int out = activation_tensor(name + "/out", {-1, oh, ow, in_c * mult});
    OpNode op;
    op.opcode = OpCode::DepthwiseConv2D;
    op.name = name;
    op.inputs = {in, w, b};
    op.outputs = {out};
    op.stride_h = op.stride_w = stride;
    op.depth_multiplier = mult;
    op.padding = pad;
    op.activation = act;
    m.ops.push_back(std::move(op));
    return out;
  }

  int pool(int in, const std::string& name, OpCode kind, int in_h, int in_w, int c, int k,
           int stride) {
    const int out = activation_tensor(name + "/out", {-1, in_h / stride, in_w / stride, c});
    OpNode op;
    op.opcode = kind;
    op.name = name;
    op.inputs = {in};
    op.outputs = {out};
    op.filter_h = op.filter_w = k;
    op.stride_h = op.stride_w = stride;
    op.padding = Padding::Valid;
    m.ops.push_back(std::move(op));
    return out;
  }

  int reshape(int in, const std::string& name, std::vector<int> new_shape) {
    const int out = activation_tensor(name + "/out", new_shape);
    OpNode op;
    op.opcode = OpCode::Reshape;
    op.name = name;
    op.inputs = {in};
    op.outputs = {out};
    op.new_shape = std::move(new_shape);
    m.ops.push_back(std::move(op));
    return out;
  }

  int dense(int in, const std::string& name, int in_dim, int out_dim, Activation act,
            bool quantized = false) {
    const int w = quantized ? quant_param(name + "/w", {out_dim, in_dim}, he_scale(in_dim))
                            : float_param(name + "/w", {out_dim, in_dim}, he_scale(in_dim));
    const int b = float_param(name + "/b", {out_dim}, 0.05f);
    const int out = activation_tensor(name + "/out", {-1, out_dim});
    OpNode op;
    op.opcode = OpCode::FullyConnected;
    op.name = name;
    op.inputs = {in, w, b};
    op.outputs = {out};
    op.activation = act;
    m.ops.push_back(std::move(op));
    return out;
  }

  int softmax(int in, const std::string& name, int dim) {
    const int out = activation_tensor(name, {-1, dim});
    OpNode op;
    op.opcode = OpCode::Softmax;
    op.name = name;
    op.inputs = {in};
    op.outputs = {out};
    m.ops.push_back(std::move(op));
    return out;
  }

  int unary(int in, OpCode kind, const std::string& name, std::vector<int> shape) {
    const int out = activation_tensor(name, std::move(shape));
    OpNode op;
    op.opcode = kind;
    op.name = name;
    op.inputs = {in};
    op.outputs = {out};
    m.ops.push_back(std::move(op));
    return out;
  }

  int add(int a, int b, const std::string& name, std::vector<int> shape, Activation act) {
    const int out = activation_tensor(name, std::move(shape));
    OpNode op;
    op.opcode = OpCode::Add;
    op.name = name;
    op.inputs = {a, b};
    op.outputs = {out};
    op.activation = act;
    m.ops.push_back(std::move(op));
    return out;
  }
};

}  // namespace

OnDeviceModel victim_cnn(std::uint64_t seed, int classes, int input_side) {
  ModelBuilder b(seed);
  const int s = input_side;
  const int in = b.activation_tensor("input", {-1, s, s, 3});
  int t = b.conv(in, "conv1", s, s, 3, 16, 3, 1, Padding::Same, Activation::Relu);
  t = b.pool(t, "pool1", OpCode::MaxPool2D, s, s, 16, 2, 2);
  t = b.conv(t, "conv2", s / 2, s / 2, 16, 32, 3, 1, Padding::Same, Activation::Relu);
  t = b.pool(t, "pool2", OpCode::MaxPool2D, s / 2, s / 2, 32, 2, 2);
  t = b.conv(t, "conv3", s / 4, s / 4, 32, 64, 3, 1, Padding::Same, Activation::Relu);
  t = b.pool(t, "pool3", OpCode::MaxPool2D, s / 4, s / 4, 64, 2, 2);
  const int flat_dim = (s / 8) * (s / 8) * 64;
  t = b.reshape(t, "flatten", {-1, flat_dim});
  t = b.dense(t, "fc1", flat_dim, 64, Activation::Relu);
  t = b.dense(t, "logits", 64, classes, Activation::None);
  const int probs = b.softmax(t, "probs", classes);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel tiny_cnn(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 8, 8, 3});
  int t = b.conv(in, "conv", 8, 8, 3, 4, 3, 1, Padding::Same, Activation::Relu);
  t = b.pool(t, "pool", OpCode::MaxPool2D, 8, 8, 4, 2, 2);
  t = b.reshape(t, "flatten", {-1, 4 * 4 * 4});
  t = b.dense(t, "dense", 64, 5, Activation::None);
  const int probs = b.softmax(t, "probs", 5);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel identity_model() {
  ModelBuilder b(0);
  const int in = b.activation_tensor("input", {-1, 4, 4, 1});
  const int out = b.reshape(in, "view", {-1, 16});
  b.m.inputs = {in};
  b.m.outputs = {out};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel depthwise_cnn(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 16, 16, 3});
  int t = b.conv(in, "stem", 16, 16, 3, 8, 3, 1, Padding::Same, Activation::Relu6);
  t = b.dwconv(t, "dw1", 16, 16, 8, 1, 3, 1, Padding::Same, Activation::Relu6);
  t = b.conv(t, "pw1", 16, 16, 8, 16, 1, 1, Padding::Same, Activation::Relu6);
  t = b.dwconv(t, "dw2", 16, 16, 16, 1, 3, 2, Padding::Same, Activation::Relu6);
  t = b.conv(t, "pw2", 8, 8, 16, 24, 1, 1, Padding::Same, Activation::Relu6);
  t = b.dwconv(t, "dw3", 8, 8, 24, 1, 3, 1, Padding::Same, Activation::Relu6);
  t = b.pool(t, "gap", OpCode::AveragePool2D, 8, 8, 24, 8, 8);
  t = b.reshape(t, "flatten", {-1, 24});
  t = b.dense(t, "logits", 24, 6, Activation::None);
  const int probs = b.softmax(t, "probs", 6);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel residual_cnn(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 12, 12, 4});
  const int c1 = b.conv(in, "c1", 12, 12, 4, 8, 3, 1, Padding::Same, Activation::Relu);
  const int c2 = b.conv(c1, "c2", 12, 12, 8, 8, 3, 1, Padding::Same, Activation::None);
  const int sum = b.add(c1, c2, "res_add", {-1, 12, 12, 8}, Activation::Relu);
  const int r1 = b.unary(sum, OpCode::Relu6, "clip", {-1, 12, 12, 8});
  const int p = b.pool(r1, "pool", OpCode::AveragePool2D, 12, 12, 8, 2, 2);
  const int flat = b.reshape(p, "flatten", {-1, 6 * 6 * 8});
  const int logits = b.dense(flat, "logits", 288, 4, Activation::None);
  const int probs = b.softmax(logits, "probs", 4);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel quantized_cnn(std::uint64_t seed, int classes) {
  ModelBuilder b(seed);
  const int in = [&] {
    TensorBlob t;
    t.name = "input";
    t.dtype = DType::UInt8;
    t.shape = {-1, 16, 16, 3};
    t.quant = model::Quantization{1.f / 255.f, 0};
    return b.tensor(std::move(t));
  }();
  int t = b.conv(in, "conv1", 16, 16, 3, 8, 3, 1, Padding::Same, Activation::Relu, true);
  t = b.pool(t, "pool1", OpCode::MaxPool2D, 16, 16, 8, 2, 2);
  t = b.conv(t, "conv2", 8, 8, 8, 16, 3, 1, Padding::Same, Activation::Relu, true);
  t = b.pool(t, "pool2", OpCode::MaxPool2D, 8, 8, 16, 2, 2);
  t = b.reshape(t, "flatten", {-1, 4 * 4 * 16});
  t = b.dense(t, "logits", 256, classes, Activation::None, true);
  const int probs = b.softmax(t, "probs", classes);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel two_head_model(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 16, 16, 3});
  const int trunk = b.conv(in, "trunk", 16, 16, 3, 8, 3, 2, Padding::Same, Activation::Relu);
  const int boxes_feat = b.conv(trunk, "box_head", 8, 8, 8, 4, 1, 1, Padding::Same,
                                Activation::None);
  const int boxes = b.reshape(boxes_feat, "boxes", {-1, 64, 4});
  const int score_feat = b.conv(trunk, "score_head", 8, 8, 8, 2, 1, 1, Padding::Same,
                                Activation::None);
  const int scores = b.reshape(score_feat, "scores", {-1, 128});
  b.m.inputs = {0};
  b.m.outputs = {boxes, scores};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel stylize_model(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 16, 16, 3});
  const int c1 = b.conv(in, "c1", 16, 16, 3, 8, 3, 1, Padding::Same, Activation::Relu);
  const int out = b.conv(c1, "stylized", 16, 16, 8, 3, 3, 1, Padding::Same, Activation::None);
  b.m.inputs = {0};
  b.m.outputs = {out};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel keypoint_model(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 16, 16, 3});
  const int c1 = b.conv(in, "c1", 16, 16, 3, 4, 3, 2, Padding::Same, Activation::Relu);
  const int flat = b.reshape(c1, "flatten", {-1, 8 * 8 * 4});
  const int fc = b.dense(flat, "coords", 256, 32, Activation::None);
  const int keypoints = b.reshape(fc, "keypoints", {-1, 16, 2});
  b.m.inputs = {0};
  b.m.outputs = {keypoints};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel custom_op_model(std::uint64_t seed) {
  ModelBuilder b(seed);
  const int in = b.activation_tensor("input", {-1, 8, 8, 3});
  const int c1 = b.conv(in, "c1", 8, 8, 3, 4, 3, 1, Padding::Same, Activation::Relu);
  const int fused = [&] {
    const int out = b.activation_tensor("fused_out", {-1, 8, 8, 4});
    OpNode op;
    op.opcode = OpCode::Custom;
    op.name = "fused_block";
    op.custom_name = "FusedMagicBlock";
    op.inputs = {c1};
    op.outputs = {out};
    b.m.ops.push_back(std::move(op));
    return out;
  }();
  b.m.inputs = {0};
  b.m.outputs = {fused};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

OnDeviceModel random_whitelist_model(std::uint64_t seed) {
  auto pick = rng::fork(seed, 0xAAB);
  ModelBuilder b(seed);
  int side = 8 + 4 * static_cast<int>(rng::uniform_index(pick, 3));  // 8, 12, 16
  int channels = 1 + static_cast<int>(rng::uniform_index(pick, 4));
  const int in = b.activation_tensor("input", {-1, side, side, channels});
  int t = in;
  const int blocks = 1 + static_cast<int>(rng::uniform_index(pick, 3));
  for (int i = 0; i < blocks; ++i) {
    const int kind = static_cast<int>(rng::uniform_index(pick, 3));
    const std::string name = "block" + std::to_string(i);
    if (kind == 0) {
      const int oc = 2 + static_cast<int>(rng::uniform_index(pick, 8));
      const int k = rng::uniform01(pick) < 0.5 ? 3 : 1;
      const Activation act = rng::uniform01(pick) < 0.5 ? Activation::Relu : Activation::None;
      t = b.conv(t, name + "_conv", side, side, channels, oc, k, 1, Padding::Same, act);
      channels = oc;
    } else if (kind == 1) {
      const int mult = 1 + static_cast<int>(rng::uniform_index(pick, 2));
      t = b.dwconv(t, name + "_dw", side, side, channels, mult, 3, 1, Padding::Same,
                   Activation::Relu6);
      channels *= mult;
    } else if (side >= 4) {
      const bool is_max = rng::uniform01(pick) < 0.5;
      t = b.pool(t, name + "_pool", is_max ? OpCode::MaxPool2D : OpCode::AveragePool2D, side,
                 side, channels, 2, 2);
      side /= 2;
    }
  }
  const int flat_dim = side * side * channels;
  t = b.reshape(t, "flatten", {-1, flat_dim});
  const int classes = 2 + static_cast<int>(rng::uniform_index(pick, 6));
  t = b.dense(t, "logits", flat_dim, classes, Activation::None);
  const int probs = b.softmax(t, "probs", classes);
  b.m.inputs = {0};
  b.m.outputs = {probs};
  b.m.producer = "fixture";
  model::check_structure(b.m);
  return b.m;
}

}  // namespace odm::fix

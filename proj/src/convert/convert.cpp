#include "odm/convert/convert.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "nlohmann/json.hpp"
#include "odm/errors.hpp"
#include "odm/model/interp.hpp"
#include "odm/util/rng.hpp"

namespace odm::convert {

namespace {

nn::Act to_act(model::Activation a) {
  switch (a) {
    case model::Activation::None: return nn::Act::None;
    case model::Activation::Relu: return nn::Act::Relu;
    case model::Activation::Relu6: return nn::Act::Relu6;
  }
  return nn::Act::None;
}

nn::Pad to_pad(model::Padding p) {
  return p == model::Padding::Same ? nn::Pad::Same : nn::Pad::Valid;
}

std::vector<int> drop_batch(const std::vector<int>& shape, const std::string& what) {
  if (shape.size() < 2) {
    throw ShapeMismatch(what + " must carry a leading batch dimension");
  }
  if (shape[0] != -1 && shape[0] != 1) {
    throw ShapeMismatch(what + " has unsupported batch dimension " + std::to_string(shape[0]));
  }
  return std::vector<int>(shape.begin() + 1, shape.end());
}

bool is_whitelisted(model::OpCode op) {
  switch (op) {
    case model::OpCode::Conv2D:
    case model::OpCode::DepthwiseConv2D:
    case model::OpCode::FullyConnected:
    case model::OpCode::MaxPool2D:
    case model::OpCode::AveragePool2D:
    case model::OpCode::Relu:
    case model::OpCode::Relu6:
    case model::OpCode::Softmax:
    case model::OpCode::Add:
    case model::OpCode::Reshape: return true;
    case model::OpCode::Custom: return false;
  }
  return false;
}

std::string op_display(const model::OpNode& op) {
  if (op.opcode == model::OpCode::Custom) return "Custom(" + op.custom_name + ")";
  return model::to_string(op.opcode);
}

}  // namespace

std::vector<int> TrainableModel::input_nodes() const {
  std::vector<int> out;
  for (const auto id : skeleton.inputs) out.push_back(tensor_to_node[static_cast<std::size_t>(id)]);
  return out;
}

std::vector<int> TrainableModel::output_nodes() const {
  std::vector<int> out;
  for (const auto id : skeleton.outputs) {
    out.push_back(tensor_to_node[static_cast<std::size_t>(id)]);
  }
  return out;
}

bool has_quantized_parameters(const model::OnDeviceModel& m) {
  for (const auto& t : m.tensors) {
    if (t.has_data() && t.quant.has_value()) return true;
  }
  return false;
}

TrainableModel reconstruct_trainable(const model::OnDeviceModel& m) {
  model::check_structure(m);
  if (m.ops.empty()) throw UnsupportedFormat("model graph has no operators, nothing to rebuild");

  std::vector<std::string> unsupported;
  for (const auto& op : m.ops) {
    if (!is_whitelisted(op.opcode)) unsupported.push_back(op_display(op));
  }
  if (!unsupported.empty()) {
    std::string msg;
    for (const auto& name : unsupported) msg += (msg.empty() ? "" : ", ") + name;
    throw UnsupportedOperator(msg);
  }

  TrainableModel out;
  out.tensor_to_node.assign(m.tensors.size(), -1);

  // Source structure retained for export; parameter payloads dropped.
  out.skeleton = m;
  for (auto& t : out.skeleton.tensors) t.data.clear();

  for (const auto id : m.inputs) {
    const auto& t = m.tensors[static_cast<std::size_t>(id)];
    out.tensor_to_node[static_cast<std::size_t>(id)] =
        out.graph.add_input(drop_batch(t.shape, "input " + t.name), t.name);
  }

  auto node_of = [&](std::int32_t tensor_id) {
    const int node = out.tensor_to_node[static_cast<std::size_t>(tensor_id)];
    if (node < 0) {
      throw ShapeMismatch("operator consumes a parameter tensor as activation: " +
                          m.tensors[static_cast<std::size_t>(tensor_id)].name);
    }
    return node;
  };

  for (const auto& op : m.ops) {
    LayerSpec layer;
    layer.layer_type = op.opcode;
    layer.name = op.name;
    layer.stride_h = op.stride_h;
    layer.stride_w = op.stride_w;
    layer.filter_h = op.filter_h;
    layer.filter_w = op.filter_w;
    layer.depth_multiplier = op.depth_multiplier;
    layer.padding = op.padding;
    layer.activation = op.activation;
    layer.new_shape = op.new_shape;
    layer.output_tensor_id = op.outputs.at(0);

    const nn::Act act = to_act(op.activation);
    const nn::Pad pad = to_pad(op.padding);
    int node = -1;

    switch (op.opcode) {
      case model::OpCode::Conv2D: {
        layer.input_tensor_ids = {op.inputs[0]};
        const auto& w = m.tensors[static_cast<std::size_t>(op.inputs[1])];
        const auto& b = m.tensors[static_cast<std::size_t>(op.inputs[2])];
        if (w.shape.size() != 4) throw ShapeMismatch("conv weights must be rank 4: " + w.name);
        const int oc = w.shape[0], kh = w.shape[1], kw = w.shape[2], ic = w.shape[3];
        layer.out_channels = oc;
        layer.kh = kh;
        layer.kw = kw;
        const int wparam = static_cast<int>(out.graph.params().size());
        node = out.graph.conv2d(node_of(op.inputs[0]), oc, kh, kw, op.stride_h, op.stride_w,
                                pad, act, op.name);
        layer.slots.push_back(ParamSlot{w.name, "OHWI", w.shape, {kh, kw, ic, oc},
                                        op.inputs[1], wparam, true, false});
        layer.slots.push_back(
            ParamSlot{b.name, "bias", b.shape, {oc}, op.inputs[2], wparam + 1, true, false});
        break;
      }
      case model::OpCode::DepthwiseConv2D: {
        layer.input_tensor_ids = {op.inputs[0]};
        const auto& w = m.tensors[static_cast<std::size_t>(op.inputs[1])];
        const auto& b = m.tensors[static_cast<std::size_t>(op.inputs[2])];
        if (w.shape.size() != 4 || w.shape[0] != 1) {
          throw ShapeMismatch("depthwise weights must be rank 4 with leading 1: " + w.name);
        }
        const int kh = w.shape[1], kw = w.shape[2], cm = w.shape[3];
        const int mult = op.depth_multiplier;
        if (mult <= 0 || cm % mult != 0) {
          throw ShapeMismatch("depth multiplier inconsistent with weights: " + w.name);
        }
        const int c = cm / mult;
        layer.kh = kh;
        layer.kw = kw;
        layer.out_channels = cm;
        const int wparam = static_cast<int>(out.graph.params().size());
        node = out.graph.depthwise_conv2d(node_of(op.inputs[0]), mult, kh, kw, op.stride_h,
                                          op.stride_w, pad, act, op.name);
        layer.slots.push_back(ParamSlot{w.name, "1HWC", w.shape, {kh, kw, c, mult},
                                        op.inputs[1], wparam, true, false});
        layer.slots.push_back(
            ParamSlot{b.name, "bias", b.shape, {cm}, op.inputs[2], wparam + 1, true, false});
        break;
      }
      case model::OpCode::FullyConnected: {
        layer.input_tensor_ids = {op.inputs[0]};
        const auto& w = m.tensors[static_cast<std::size_t>(op.inputs[1])];
        const auto& b = m.tensors[static_cast<std::size_t>(op.inputs[2])];
        if (w.shape.size() != 2) {
          throw ShapeMismatch("fully-connected weights must be rank 2: " + w.name);
        }
        const int oc = w.shape[0], ic = w.shape[1];
        layer.out_channels = oc;
        int in_node = node_of(op.inputs[0]);
        // Flatten implicitly when the incoming activation is not already flat.
        if (out.graph.sample_shape(in_node).size() != 1) {
          const auto s = out.graph.sample_shape(in_node);
          in_node = out.graph.reshape(
              in_node, {static_cast<int>(nn::shape_count(s))}, op.name + "/flatten");
        }
        const int wparam = static_cast<int>(out.graph.params().size());
        node = out.graph.dense(in_node, oc, act, op.name);
        layer.slots.push_back(
            ParamSlot{w.name, "OI", w.shape, {ic, oc}, op.inputs[1], wparam, true, false});
        layer.slots.push_back(
            ParamSlot{b.name, "bias", b.shape, {oc}, op.inputs[2], wparam + 1, true, false});
        break;
      }
      case model::OpCode::MaxPool2D:
        layer.input_tensor_ids = {op.inputs[0]};
        node = out.graph.max_pool(node_of(op.inputs[0]), op.filter_h, op.filter_w, op.stride_h,
                                  op.stride_w, pad, op.name);
        break;
      case model::OpCode::AveragePool2D:
        layer.input_tensor_ids = {op.inputs[0]};
        node = out.graph.avg_pool(node_of(op.inputs[0]), op.filter_h, op.filter_w, op.stride_h,
                                  op.stride_w, pad, op.name);
        break;
      case model::OpCode::Relu:
        layer.input_tensor_ids = {op.inputs[0]};
        node = out.graph.activation(node_of(op.inputs[0]), nn::Act::Relu, op.name);
        break;
      case model::OpCode::Relu6:
        layer.input_tensor_ids = {op.inputs[0]};
        node = out.graph.activation(node_of(op.inputs[0]), nn::Act::Relu6, op.name);
        break;
      case model::OpCode::Softmax: {
        layer.input_tensor_ids = {op.inputs[0]};
        int in_node = node_of(op.inputs[0]);
        if (out.graph.sample_shape(in_node).size() != 1) {
          const auto s = out.graph.sample_shape(in_node);
          in_node = out.graph.reshape(
              in_node, {static_cast<int>(nn::shape_count(s))}, op.name + "/flatten");
        }
        node = out.graph.softmax(in_node, op.name);
        break;
      }
      case model::OpCode::Add:
        layer.input_tensor_ids = {op.inputs[0], op.inputs[1]};
        node = out.graph.add(node_of(op.inputs[0]), node_of(op.inputs[1]), act, op.name);
        break;
      case model::OpCode::Reshape:
        layer.input_tensor_ids = {op.inputs[0]};
        node = out.graph.reshape(node_of(op.inputs[0]),
                                 drop_batch(op.new_shape, "reshape target"), op.name);
        break;
      case model::OpCode::Custom:
        break;  // unreachable, rejected above
    }

    out.tensor_to_node[static_cast<std::size_t>(op.outputs[0])] = node;
    out.layers.push_back(std::move(layer));
  }

  for (const auto id : m.outputs) {
    out.graph.mark_output(out.tensor_to_node[static_cast<std::size_t>(id)]);
  }
  return out;
}

namespace {

// OHWI [O,KH,KW,I] -> HWIO [KH,KW,I,O]
std::vector<float> ohwi_to_hwio(const std::vector<float>& src, int o, int kh, int kw, int i) {
  std::vector<float> dst(src.size());
  for (int oo = 0; oo < o; ++oo) {
    for (int y = 0; y < kh; ++y) {
      for (int x = 0; x < kw; ++x) {
        for (int c = 0; c < i; ++c) {
          dst[((static_cast<std::size_t>(y) * kw + x) * i + c) * o + oo] =
              src[((static_cast<std::size_t>(oo) * kh + y) * kw + x) * i + c];
        }
      }
    }
  }
  return dst;
}

// HWIO -> OHWI (inverse of the above)
std::vector<float> hwio_to_ohwi(const std::vector<float>& src, int kh, int kw, int i, int o) {
  std::vector<float> dst(src.size());
  for (int y = 0; y < kh; ++y) {
    for (int x = 0; x < kw; ++x) {
      for (int c = 0; c < i; ++c) {
        for (int oo = 0; oo < o; ++oo) {
          dst[((static_cast<std::size_t>(oo) * kh + y) * kw + x) * i + c] =
              src[((static_cast<std::size_t>(y) * kw + x) * i + c) * o + oo];
        }
      }
    }
  }
  return dst;
}

std::vector<float> transpose2d(const std::vector<float>& src, int rows, int cols) {
  std::vector<float> dst(src.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
    }
  }
  return dst;
}

}  // namespace

void map_parameters(const model::OnDeviceModel& source, TrainableModel& target) {
  for (auto& layer : target.layers) {
    for (auto& slot : layer.slots) {
      if (slot.source_tensor_id < 0 ||
          slot.source_tensor_id >= static_cast<int>(source.tensors.size())) {
        throw ShapeMismatch(slot.name + ": source tensor id out of range");
      }
      const auto& src = source.tensors[static_cast<std::size_t>(slot.source_tensor_id)];
      if (src.shape != slot.source_shape) {
        throw ShapeMismatch(slot.name + ": source shape " + nn::shape_str(src.shape) +
                            " does not match slot layout " + nn::shape_str(slot.source_shape));
      }
      const auto values = src.as_floats();
      auto& param = target.graph.params().at(static_cast<std::size_t>(slot.param_index));
      if (param.value.shape != slot.trainable_shape) {
        throw ShapeMismatch(slot.name + ": trainable slot shape drifted");
      }
      if (slot.layout == "OHWI") {
        param.value.data = ohwi_to_hwio(values, slot.source_shape[0], slot.source_shape[1],
                                        slot.source_shape[2], slot.source_shape[3]);
      } else if (slot.layout == "1HWC") {
        // [1,KH,KW,C*M] and [KH,KW,C,M] share a contiguous layout.
        param.value.data = values;
      } else if (slot.layout == "OI") {
        param.value.data = transpose2d(values, slot.source_shape[0], slot.source_shape[1]);
      } else if (slot.layout == "bias") {
        param.value.data = values;
      } else {
        throw ShapeMismatch(slot.name + ": unknown layout tag " + slot.layout);
      }
      slot.filled = true;
    }
  }
  target.params_filled = true;
}

EquivalenceReport verify_equivalence(const model::OnDeviceModel& original,
                                     const TrainableModel& reconstructed, int n_samples,
                                     double tolerance, std::uint64_t seed) {
  if (n_samples < 1) throw ShapeMismatch("n_samples must be >= 1");
  const model::Interpreter interp(original);

  const auto in_nodes = reconstructed.input_nodes();
  if (interp.input_count() != in_nodes.size() ||
      interp.output_count() != reconstructed.output_nodes().size()) {
    throw SignatureMismatch("input/output arity differs between models");
  }
  for (std::size_t i = 0; i < in_nodes.size(); ++i) {
    const auto graph_shape = reconstructed.graph.sample_shape(in_nodes[i]);
    std::vector<int> full = {1};
    full.insert(full.end(), graph_shape.begin(), graph_shape.end());
    if (full != interp.input_shape(i)) {
      throw SignatureMismatch("input shapes differ between models");
    }
  }

  auto gen = rng::make(seed);
  EquivalenceReport report;
  report.samples_tested = n_samples;
  report.tolerance = tolerance;
  report.seed = seed;
  int agree = 0;

  for (int s = 0; s < n_samples; ++s) {
    std::vector<std::vector<float>> flat_inputs;
    std::vector<nn::Tensor> nn_inputs;
    for (std::size_t i = 0; i < in_nodes.size(); ++i) {
      const auto& shape = interp.input_shape(i);
      std::size_t count = 1;
      for (const int d : shape) count *= static_cast<std::size_t>(d);
      std::vector<float> buf(count);
      for (auto& v : buf) v = rng::uniformf(gen, 0.f, 1.f);
      nn::Tensor t(
          [&] {
            std::vector<int> full = {1};
            const auto ss = reconstructed.graph.sample_shape(in_nodes[i]);
            full.insert(full.end(), ss.begin(), ss.end());
            return full;
          }());
      t.data = buf;
      flat_inputs.push_back(std::move(buf));
      nn_inputs.push_back(std::move(t));
    }

    const auto ref_out = interp.run(flat_inputs);
    const auto nn_out = nn::infer(reconstructed.graph, nn_inputs);

    const auto& a = ref_out.front();
    const auto& b = nn_out.front().data;
    if (a.size() != b.size()) throw SignatureMismatch("primary output sizes differ");
    double diff = 0.0;
    std::size_t arg_a = 0, arg_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff = std::max(diff, std::abs(static_cast<double>(a[i]) - b[i]));
      if (a[i] > a[arg_a]) arg_a = i;
      if (b[i] > b[arg_b]) arg_b = i;
    }
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
    if (arg_a == arg_b) ++agree;
  }
  report.argmax_agreement = static_cast<double>(agree) / n_samples;
  report.passed = report.max_abs_diff <= tolerance && report.argmax_agreement == 1.0;
  return report;
}

model::OnDeviceModel export_deployable_model(const TrainableModel& m,
                                             const std::string& producer) {
  if (!m.params_filled) {
    throw Error("export requires every parameter slot to be filled");
  }
  model::OnDeviceModel out = m.skeleton;
  out.producer = producer;
  // Re-exported models are float32 end to end (quantized sources were
  // dequantized for retraining).
  for (auto& t : out.tensors) {
    t.dtype = model::DType::Float32;
    t.quant.reset();
  }
  for (const auto& layer : m.layers) {
    for (const auto& slot : layer.slots) {
      const auto& param = m.graph.params().at(static_cast<std::size_t>(slot.param_index));
      std::vector<float> source_layout;
      if (slot.layout == "OHWI") {
        source_layout =
            hwio_to_ohwi(param.value.data, slot.trainable_shape[0], slot.trainable_shape[1],
                         slot.trainable_shape[2], slot.trainable_shape[3]);
      } else if (slot.layout == "OI") {
        source_layout = transpose2d(param.value.data, slot.trainable_shape[0],
                                    slot.trainable_shape[1]);
      } else {  // bias and 1HWC are layout-contiguous
        source_layout = param.value.data;
      }
      auto& t = out.tensors[static_cast<std::size_t>(slot.source_tensor_id)];
      t.data.resize(source_layout.size() * 4);
      std::memcpy(t.data.data(), source_layout.data(), t.data.size());
    }
  }
  for (const auto& op : out.ops) {
    if (!is_whitelisted(op.opcode)) throw ExportUnsupported(op_display(op));
  }
  model::check_structure(out);
  return out;
}

std::vector<std::uint8_t> export_deployable(const TrainableModel& m,
                                            const std::string& producer) {
  return model::serialize_flat_schema(export_deployable_model(m, producer));
}

std::string to_json(const EquivalenceReport& r) {
  nlohmann::ordered_json j;
  j["samples_tested"] = r.samples_tested;
  j["max_abs_diff"] = r.max_abs_diff;
  j["argmax_agreement"] = r.argmax_agreement;
  j["passed"] = r.passed;
  j["tolerance"] = r.tolerance;
  j["seed"] = r.seed;
  return j.dump(2);
}

}  // namespace odm::convert

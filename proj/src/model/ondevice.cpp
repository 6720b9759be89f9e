#include "odm/model/ondevice.hpp"

#include <cstring>
#include <set>

#include "odm/errors.hpp"

namespace odm::model {

const char* to_string(DType t) {
  switch (t) {
    case DType::Float32: return "float32";
    case DType::UInt8: return "uint8";
    case DType::Int8: return "int8";
    case DType::Int32: return "int32";
    default: return "other";
  }
}

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::Float32: return 4;
    case DType::UInt8: return 1;
    case DType::Int8: return 1;
    case DType::Int32: return 4;
    default: return 1;
  }
}

const char* to_string(OpCode op) {
  switch (op) {
    case OpCode::Conv2D: return "Conv2D";
    case OpCode::DepthwiseConv2D: return "DepthwiseConv2D";
    case OpCode::FullyConnected: return "FullyConnected";
    case OpCode::MaxPool2D: return "MaxPool2D";
    case OpCode::AveragePool2D: return "AveragePool2D";
    case OpCode::Relu: return "Relu";
    case OpCode::Relu6: return "Relu6";
    case OpCode::Softmax: return "Softmax";
    case OpCode::Add: return "Add";
    case OpCode::Reshape: return "Reshape";
    case OpCode::Custom: return "Custom";
  }
  return "Custom";
}

const char* to_string(Padding p) { return p == Padding::Same ? "same" : "valid"; }

const char* to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Relu6: return "relu6";
  }
  return "none";
}

std::size_t TensorBlob::element_count() const {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d < 0 ? 1 : d);
  return n;
}

std::vector<float> TensorBlob::as_floats() const {
  const std::size_t n = element_count();
  std::vector<float> out(n);
  if (dtype == DType::Float32) {
    if (data.size() != n * 4) throw UnsupportedFormat("float tensor size mismatch: " + name);
    std::memcpy(out.data(), data.data(), data.size());
  } else if (dtype == DType::UInt8 || dtype == DType::Int8) {
    if (data.size() != n) throw UnsupportedFormat("quantized tensor size mismatch: " + name);
    const Quantization q = quant.value_or(Quantization{1.f, 0});
    for (std::size_t i = 0; i < n; ++i) {
      const int raw = dtype == DType::UInt8 ? static_cast<int>(data[i])
                                            : static_cast<int>(static_cast<std::int8_t>(data[i]));
      out[i] = q.scale * static_cast<float>(raw - q.zero_point);
    }
  } else if (dtype == DType::Int32) {
    if (data.size() != n * 4) throw UnsupportedFormat("int tensor size mismatch: " + name);
    // Int32 bias convention for quantized graphs: value = scale * raw.
    const Quantization q = quant.value_or(Quantization{1.f, 0});
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t raw;
      std::memcpy(&raw, data.data() + i * 4, 4);
      out[i] = q.scale * static_cast<float>(raw - q.zero_point);
    }
  } else {
    throw UnsupportedFormat("tensor dtype not numeric: " + name);
  }
  return out;
}

namespace {

int expected_arity(OpCode op) {
  switch (op) {
    case OpCode::Conv2D:
    case OpCode::DepthwiseConv2D:
    case OpCode::FullyConnected: return 3;
    case OpCode::Add: return 2;
    case OpCode::Custom: return -1;  // anything
    default: return 1;
  }
}

}  // namespace

void check_structure(const OnDeviceModel& model) {
  const std::int32_t n = static_cast<std::int32_t>(model.tensors.size());
  auto check_id = [&](std::int32_t id, const char* what) {
    if (id < 0 || id >= n) {
      throw UnsupportedFormat(std::string("tensor id out of range in ") + what);
    }
  };
  if (model.inputs.empty()) throw UnsupportedFormat("model exposes no input tensors");
  if (model.outputs.empty()) throw UnsupportedFormat("model exposes no output tensors");
  for (const auto id : model.inputs) check_id(id, "graph inputs");
  for (const auto id : model.outputs) check_id(id, "graph outputs");

  for (const auto& t : model.tensors) {
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
      if (t.shape[i] <= 0 && !(i == 0 && t.shape[i] == -1)) {
        throw UnsupportedFormat("non-positive tensor dim in " + t.name);
      }
    }
    if (t.has_data() && t.data.size() != t.element_count() * dtype_size(t.dtype)) {
      throw UnsupportedFormat("tensor data length mismatch in " + t.name);
    }
  }

  // Topological order: every activation input must be a graph input, a
  // parameter tensor, or the output of an earlier op.
  std::set<std::int32_t> ready(model.inputs.begin(), model.inputs.end());
  for (std::int32_t i = 0; i < n; ++i) {
    if (model.tensors[static_cast<std::size_t>(i)].has_data()) ready.insert(i);
  }
  for (const auto& op : model.ops) {
    const int arity = expected_arity(op.opcode);
    if (arity > 0 && static_cast<int>(op.inputs.size()) != arity) {
      throw UnsupportedFormat(std::string(to_string(op.opcode)) + " has wrong input arity");
    }
    if (op.outputs.empty()) throw UnsupportedFormat("op without outputs");
    for (const auto id : op.inputs) {
      check_id(id, "op inputs");
      if (!ready.count(id)) throw UnsupportedFormat("op consumes tensor before it is produced");
    }
    for (const auto id : op.outputs) {
      check_id(id, "op outputs");
      ready.insert(id);
    }
  }
  for (const auto id : model.outputs) {
    if (!ready.count(id)) throw UnsupportedFormat("graph output is never produced");
  }
}

OnDeviceModel load_model(std::span<const std::uint8_t> bytes, ModelFormat format) {
  switch (format) {
    case ModelFormat::FlatSchema: return parse_flat_schema(bytes);
    case ModelFormat::GraphProto: return parse_graph_proto(bytes);
    case ModelFormat::Auto: {
      try {
        return parse_flat_schema(bytes);
      } catch (const UnsupportedFormat&) {
      }
      return parse_graph_proto(bytes);
    }
  }
  throw UnsupportedFormat("unknown model format selector");
}

}  // namespace odm::model

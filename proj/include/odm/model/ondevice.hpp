#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace odm::model {

enum class DType : std::uint8_t { Float32 = 0, UInt8 = 1, Int8 = 2, Int32 = 3, Other = 255 };

const char* to_string(DType t);
std::size_t dtype_size(DType t);

struct Quantization {
  float scale = 1.f;
  std::int32_t zero_point = 0;
};

// One entry of the model's tensor table. Parameter tensors carry data;
// activation tensors are shape-only. A leading -1 dim marks a symbolic batch.
struct TensorBlob {
  std::string name;
  DType dtype = DType::Float32;
  std::vector<int> shape;
  std::optional<Quantization> quant;
  std::vector<std::uint8_t> data;

  bool has_data() const { return !data.empty(); }
  std::size_t element_count() const;
  std::vector<float> as_floats() const;  // dequantizes when quant is set
};

enum class OpCode : std::uint8_t {
  Conv2D = 0,
  DepthwiseConv2D = 1,
  FullyConnected = 2,
  MaxPool2D = 3,
  AveragePool2D = 4,
  Relu = 5,
  Relu6 = 6,
  Softmax = 7,
  Add = 8,
  Reshape = 9,
  Custom = 200,  // carries custom_name; always outside the trainable whitelist
};

const char* to_string(OpCode op);

enum class Padding : std::uint8_t { Same = 0, Valid = 1 };
enum class Activation : std::uint8_t { None = 0, Relu = 1, Relu6 = 2 };

const char* to_string(Padding p);
const char* to_string(Activation a);

// Operator node. Input convention:
//   Conv2D / DepthwiseConv2D: [input, weights, bias]   weights OHWI / 1HWC
//   FullyConnected:           [input, weights, bias]   weights [out, in]
//   MaxPool2D / AveragePool2D / Relu / Relu6 / Softmax / Reshape: [input]
//   Add:                      [a, b]
struct OpNode {
  OpCode opcode = OpCode::Custom;
  std::string name;
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> outputs;

  int stride_h = 1, stride_w = 1;
  int filter_h = 0, filter_w = 0;  // pooling window
  int depth_multiplier = 1;        // depthwise
  Padding padding = Padding::Same;
  Activation activation = Activation::None;  // fused activation
  std::vector<int> new_shape;                // reshape target, -1 batch allowed
  std::string custom_name;
};

// Inference-format model: flat tensor table + operator list in topological
// order, with explicit graph input/output tensor ids. This mirrors how
// on-device schemas lay models out and is the single in-memory form both
// serialization formats map to.
struct OnDeviceModel {
  std::uint32_t schema_version = 1;
  std::string producer;  // free-form provenance (config digest of the exporter)
  std::vector<TensorBlob> tensors;
  std::vector<OpNode> ops;
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> outputs;
};

// Structural validation: ids in range, non-empty I/O, topological op order,
// parameter arity per opcode. Throws UnsupportedFormat with a reason.
void check_structure(const OnDeviceModel& model);

enum class ModelFormat { FlatSchema, GraphProto, Auto };

// Loaders throw UnsupportedFormat on malformed bytes; they never crash on
// arbitrary input. Auto tries flat-schema first, then graph-proto.
OnDeviceModel load_model(std::span<const std::uint8_t> bytes, ModelFormat format);

OnDeviceModel parse_flat_schema(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_flat_schema(const OnDeviceModel& model);

OnDeviceModel parse_graph_proto(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_graph_proto(const OnDeviceModel& model);

}  // namespace odm::model

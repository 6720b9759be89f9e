#include "graph_model.pb.h"
#include "odm/errors.hpp"
#include "odm/model/ondevice.hpp"

namespace odm::model {

namespace {

DType dtype_from_code(std::uint32_t code) {
  switch (code) {
    case 0: return DType::Float32;
    case 1: return DType::UInt8;
    case 2: return DType::Int8;
    case 3: return DType::Int32;
    case 255: return DType::Other;
    default: throw UnsupportedFormat("unknown dtype code in graph-proto");
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_graph_proto(const OnDeviceModel& model) {
  check_structure(model);
  pb::ModelPb msg;
  msg.set_schema_version(model.schema_version);
  msg.set_producer(model.producer);
  for (const auto& t : model.tensors) {
    auto* tp = msg.add_tensors();
    tp->set_name(t.name);
    tp->set_dtype(static_cast<std::uint32_t>(t.dtype));
    for (const int d : t.shape) tp->add_dims(d);
    if (t.quant) {
      tp->set_has_quant(true);
      tp->set_scale(t.quant->scale);
      tp->set_zero_point(t.quant->zero_point);
    }
    tp->set_data(t.data.data(), t.data.size());
  }
  for (const auto& op : model.ops) {
    auto* np = msg.add_ops();
    np->set_opcode(static_cast<std::uint32_t>(op.opcode));
    np->set_name(op.name);
    for (const auto id : op.inputs) np->add_inputs(id);
    for (const auto id : op.outputs) np->add_outputs(id);
    np->set_stride_h(static_cast<std::uint32_t>(op.stride_h));
    np->set_stride_w(static_cast<std::uint32_t>(op.stride_w));
    np->set_filter_h(static_cast<std::uint32_t>(op.filter_h));
    np->set_filter_w(static_cast<std::uint32_t>(op.filter_w));
    np->set_depth_multiplier(static_cast<std::uint32_t>(op.depth_multiplier));
    np->set_padding(static_cast<std::uint32_t>(op.padding));
    np->set_activation(static_cast<std::uint32_t>(op.activation));
    for (const int d : op.new_shape) np->add_new_shape(d);
    np->set_custom_name(op.custom_name);
  }
  for (const auto id : model.inputs) msg.add_inputs(id);
  for (const auto id : model.outputs) msg.add_outputs(id);

  std::vector<std::uint8_t> out(msg.ByteSizeLong());
  if (!msg.SerializeToArray(out.data(), static_cast<int>(out.size()))) {
    throw UnsupportedFormat("graph-proto serialization failed");
  }
  return out;
}

OnDeviceModel parse_graph_proto(std::span<const std::uint8_t> bytes) {
  pb::ModelPb msg;
  if (bytes.empty() || !msg.ParseFromArray(bytes.data(), static_cast<int>(bytes.size()))) {
    throw UnsupportedFormat("graph-proto parse failed");
  }
  OnDeviceModel model;
  model.schema_version = msg.schema_version();
  if (model.schema_version != 1) throw UnsupportedFormat("graph-proto version unsupported");
  model.producer = msg.producer();
  model.tensors.reserve(static_cast<std::size_t>(msg.tensors_size()));
  for (const auto& tp : msg.tensors()) {
    TensorBlob t;
    t.name = tp.name();
    t.dtype = dtype_from_code(tp.dtype());
    t.shape.assign(tp.dims().begin(), tp.dims().end());
    if (tp.has_quant()) t.quant = Quantization{tp.scale(), tp.zero_point()};
    t.data.assign(tp.data().begin(), tp.data().end());
    model.tensors.push_back(std::move(t));
  }
  model.ops.reserve(static_cast<std::size_t>(msg.ops_size()));
  for (const auto& np : msg.ops()) {
    OpNode op;
    if (np.opcode() > 9 && np.opcode() != 200) throw UnsupportedFormat("unknown opcode");
    op.opcode = static_cast<OpCode>(np.opcode());
    op.name = np.name();
    op.inputs.assign(np.inputs().begin(), np.inputs().end());
    op.outputs.assign(np.outputs().begin(), np.outputs().end());
    op.stride_h = static_cast<int>(np.stride_h());
    op.stride_w = static_cast<int>(np.stride_w());
    op.filter_h = static_cast<int>(np.filter_h());
    op.filter_w = static_cast<int>(np.filter_w());
    op.depth_multiplier = static_cast<int>(np.depth_multiplier());
    if (np.padding() > 1) throw UnsupportedFormat("unknown padding code");
    op.padding = static_cast<Padding>(np.padding());
    if (np.activation() > 2) throw UnsupportedFormat("unknown activation code");
    op.activation = static_cast<Activation>(np.activation());
    op.new_shape.assign(np.new_shape().begin(), np.new_shape().end());
    op.custom_name = np.custom_name();
    model.ops.push_back(std::move(op));
  }
  model.inputs.assign(msg.inputs().begin(), msg.inputs().end());
  model.outputs.assign(msg.outputs().begin(), msg.outputs().end());
  check_structure(model);
  return model;
}

}  // namespace odm::model

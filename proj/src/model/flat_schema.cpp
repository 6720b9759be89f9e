#include <cstring>

#include "odm/errors.hpp"
#include "odm/model/ondevice.hpp"

// Binary flat-schema codec, schema version 1. The byte layout is pinned by
// schema/flat_model_v1.md; bump kVersion on any change.

namespace odm::model {

namespace {

constexpr char kMagic[4] = {'O', 'D', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxCount = 1u << 20;
constexpr std::uint8_t kMaxDims = 8;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v & 0xff));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void str16(const std::string& s) {
    if (s.size() > 0xffff) throw UnsupportedFormat("string too long for schema");
    u16(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(const std::vector<std::uint8_t>& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str16() {
    const std::uint16_t len = u16();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::vector<std::uint8_t> bytes(std::uint64_t len) {
    need(len);
    std::vector<std::uint8_t> b(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return b;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (pos_ + n > data_.size()) throw UnsupportedFormat("flat-schema stream truncated");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_flat_schema(const OnDeviceModel& model) {
  check_structure(model);
  Writer w;
  w.bytes({kMagic[0], kMagic[1], kMagic[2], kMagic[3]});
  w.u32(kVersion);
  w.str16(model.producer);

  w.u32(static_cast<std::uint32_t>(model.tensors.size()));
  for (const auto& t : model.tensors) {
    w.str16(t.name);
    w.u8(static_cast<std::uint8_t>(t.dtype));
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (const int d : t.shape) w.i32(d);
    w.u8(t.quant.has_value() ? 1 : 0);
    if (t.quant) {
      w.f32(t.quant->scale);
      w.i32(t.quant->zero_point);
    }
    w.u64(t.data.size());
    w.bytes(t.data);
  }

  w.u32(static_cast<std::uint32_t>(model.ops.size()));
  for (const auto& op : model.ops) {
    w.u8(static_cast<std::uint8_t>(op.opcode));
    w.str16(op.name);
    w.u8(static_cast<std::uint8_t>(op.stride_h));
    w.u8(static_cast<std::uint8_t>(op.stride_w));
    w.u8(static_cast<std::uint8_t>(op.filter_h));
    w.u8(static_cast<std::uint8_t>(op.filter_w));
    w.u8(static_cast<std::uint8_t>(op.depth_multiplier));
    w.u8(static_cast<std::uint8_t>(op.padding));
    w.u8(static_cast<std::uint8_t>(op.activation));
    w.u8(static_cast<std::uint8_t>(op.new_shape.size()));
    for (const int d : op.new_shape) w.i32(d);
    w.str16(op.custom_name);
    w.u16(static_cast<std::uint16_t>(op.inputs.size()));
    for (const auto id : op.inputs) w.i32(id);
    w.u16(static_cast<std::uint16_t>(op.outputs.size()));
    for (const auto id : op.outputs) w.i32(id);
  }

  w.u16(static_cast<std::uint16_t>(model.inputs.size()));
  for (const auto id : model.inputs) w.i32(id);
  w.u16(static_cast<std::uint16_t>(model.outputs.size()));
  for (const auto id : model.outputs) w.i32(id);
  return w.take();
}

OnDeviceModel parse_flat_schema(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw UnsupportedFormat("flat-schema magic mismatch");
  }
  OnDeviceModel model;
  model.schema_version = r.u32();
  if (model.schema_version != kVersion) {
    throw UnsupportedFormat("flat-schema version unsupported");
  }
  model.producer = r.str16();

  const std::uint32_t n_tensors = r.u32();
  if (n_tensors > kMaxCount) throw UnsupportedFormat("tensor count exceeds schema limit");
  model.tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorBlob t;
    t.name = r.str16();
    const std::uint8_t dtype = r.u8();
    if (dtype > 3 && dtype != 255) throw UnsupportedFormat("unknown dtype code");
    t.dtype = static_cast<DType>(dtype);
    const std::uint8_t n_dims = r.u8();
    if (n_dims > kMaxDims) throw UnsupportedFormat("rank exceeds schema limit");
    t.shape.resize(n_dims);
    for (auto& d : t.shape) d = r.i32();
    if (r.u8()) {
      Quantization q;
      q.scale = r.f32();
      q.zero_point = r.i32();
      t.quant = q;
    }
    const std::uint64_t data_len = r.u64();
    t.data = r.bytes(data_len);
    model.tensors.push_back(std::move(t));
  }

  const std::uint32_t n_ops = r.u32();
  if (n_ops > kMaxCount) throw UnsupportedFormat("op count exceeds schema limit");
  model.ops.reserve(n_ops);
  for (std::uint32_t i = 0; i < n_ops; ++i) {
    OpNode op;
    const std::uint8_t opcode = r.u8();
    if (opcode > 9 && opcode != 200) throw UnsupportedFormat("unknown opcode");
    op.opcode = static_cast<OpCode>(opcode);
    op.name = r.str16();
    op.stride_h = r.u8();
    op.stride_w = r.u8();
    op.filter_h = r.u8();
    op.filter_w = r.u8();
    op.depth_multiplier = r.u8();
    const std::uint8_t padding = r.u8();
    if (padding > 1) throw UnsupportedFormat("unknown padding code");
    op.padding = static_cast<Padding>(padding);
    const std::uint8_t act = r.u8();
    if (act > 2) throw UnsupportedFormat("unknown activation code");
    op.activation = static_cast<Activation>(act);
    op.new_shape.resize(r.u8());
    for (auto& d : op.new_shape) d = r.i32();
    op.custom_name = r.str16();
    op.inputs.resize(r.u16());
    for (auto& id : op.inputs) id = r.i32();
    op.outputs.resize(r.u16());
    for (auto& id : op.outputs) id = r.i32();
    model.ops.push_back(std::move(op));
  }

  model.inputs.resize(r.u16());
  for (auto& id : model.inputs) id = r.i32();
  model.outputs.resize(r.u16());
  for (auto& id : model.outputs) id = r.i32();
  if (!r.at_end()) throw UnsupportedFormat("trailing bytes after flat-schema payload");

  check_structure(model);
  return model;
}

}  // namespace odm::model

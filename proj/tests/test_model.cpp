#include <cmath>
#include <cstring>

#include "doctest.h"
#include "odm/errors.hpp"
#include "odm/model/analysis.hpp"
#include "odm/model/interp.hpp"
#include "odm/model/ondevice.hpp"
#include "odm/util/rng.hpp"
#include "src/fixtures/fixture_models.hpp"

using namespace odm;
using namespace odm::model;

namespace {

bool models_equal(const OnDeviceModel& a, const OnDeviceModel& b) {
  if (a.tensors.size() != b.tensors.size() || a.ops.size() != b.ops.size()) return false;
  if (a.inputs != b.inputs || a.outputs != b.outputs) return false;
  if (a.producer != b.producer) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (x.name != y.name || x.dtype != y.dtype || x.shape != y.shape || x.data != y.data) {
      return false;
    }
    if (x.quant.has_value() != y.quant.has_value()) return false;
    if (x.quant &&
        (x.quant->scale != y.quant->scale || x.quant->zero_point != y.quant->zero_point)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.ops.size(); ++i) {
    const auto& x = a.ops[i];
    const auto& y = b.ops[i];
    if (x.opcode != y.opcode || x.name != y.name || x.inputs != y.inputs ||
        x.outputs != y.outputs || x.stride_h != y.stride_h || x.stride_w != y.stride_w ||
        x.filter_h != y.filter_h || x.filter_w != y.filter_w ||
        x.depth_multiplier != y.depth_multiplier || x.padding != y.padding ||
        x.activation != y.activation || x.new_shape != y.new_shape ||
        x.custom_name != y.custom_name) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("flat-schema and graph-proto round-trip random models losslessly") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto m = fix::random_whitelist_model(seed);
    m.producer = "digest-" + std::to_string(seed);
    const auto flat = serialize_flat_schema(m);
    CHECK(models_equal(parse_flat_schema(flat), m));
    const auto proto = serialize_graph_proto(m);
    CHECK(models_equal(parse_graph_proto(proto), m));
  }
}

TEST_CASE("quantized tensors survive both formats") {
  const auto m = fix::quantized_cnn(11);
  CHECK(models_equal(parse_flat_schema(serialize_flat_schema(m)), m));
  CHECK(models_equal(parse_graph_proto(serialize_graph_proto(m)), m));
}

TEST_CASE("parsers survive byte fuzzing without crashing") {
  const auto flat = serialize_flat_schema(fix::tiny_cnn(2));
  auto gen = rng::make(42);
  for (int trial = 0; trial < 300; ++trial) {
    auto corrupted = flat;
    const int flips = 1 + static_cast<int>(rng::uniform_index(gen, 8));
    for (int f = 0; f < flips; ++f) {
      corrupted[rng::uniform_index(gen, corrupted.size())] ^=
          static_cast<std::uint8_t>(1 + rng::uniform_index(gen, 255));
    }
    try {
      (void)parse_flat_schema(corrupted);  // accepted mutations must still load
    } catch (const Error&) {
      // rejected mutations must raise a typed error, nothing else
    }
  }
}

TEST_CASE("structural validation rejects broken graphs") {
  auto m = fix::tiny_cnn(5);
  SUBCASE("no inputs") {
    m.inputs.clear();
    CHECK_THROWS_AS(check_structure(m), UnsupportedFormat);
  }
  SUBCASE("tensor id out of range") {
    m.outputs = {static_cast<std::int32_t>(m.tensors.size())};
    CHECK_THROWS_AS(check_structure(m), UnsupportedFormat);
  }
  SUBCASE("op consumes a tensor before it exists") {
    std::swap(m.ops.front(), m.ops.back());
    CHECK_THROWS_AS(check_structure(m), UnsupportedFormat);
  }
}

TEST_CASE("interpreter matches hand-computed marginal cases") {
  SUBCASE("1x1 conv is an affine map") {
    OnDeviceModel m;
    TensorBlob in;
    in.name = "input";
    in.shape = {-1, 2, 2, 1};
    m.tensors.push_back(in);
    TensorBlob w;
    w.name = "w";
    w.shape = {1, 1, 1, 1};
    w.data.resize(4);
    const float wv = 3.f;
    std::memcpy(w.data.data(), &wv, 4);
    m.tensors.push_back(w);
    TensorBlob b;
    b.name = "b";
    b.shape = {1};
    b.data.resize(4);
    const float bv = -1.f;
    std::memcpy(b.data.data(), &bv, 4);
    m.tensors.push_back(b);
    TensorBlob out;
    out.name = "out";
    out.shape = {-1, 2, 2, 1};
    m.tensors.push_back(out);
    OpNode op;
    op.opcode = OpCode::Conv2D;
    op.name = "conv";
    op.inputs = {0, 1, 2};
    op.outputs = {3};
    m.ops.push_back(op);
    m.inputs = {0};
    m.outputs = {3};

    const Interpreter interp(m);
    const auto got = interp.run({{0.f, 1.f, 2.f, 3.f}});
    CHECK(got[0] == std::vector<float>{-1.f, 2.f, 5.f, 8.f});
  }

  SUBCASE("maxpool picks window maxima") {
    OnDeviceModel m;
    TensorBlob in;
    in.name = "input";
    in.shape = {-1, 2, 2, 1};
    m.tensors.push_back(in);
    TensorBlob out;
    out.name = "out";
    out.shape = {-1, 1, 1, 1};
    m.tensors.push_back(out);
    OpNode op;
    op.opcode = OpCode::MaxPool2D;
    op.name = "pool";
    op.inputs = {0};
    op.outputs = {1};
    op.filter_h = op.filter_w = 2;
    op.stride_h = op.stride_w = 2;
    op.padding = Padding::Valid;
    m.ops.push_back(op);
    m.inputs = {0};
    m.outputs = {1};
    const Interpreter interp(m);
    CHECK(interp.run({{0.4f, -2.f, 7.f, 1.f}})[0] == std::vector<float>{7.f});
  }

  SUBCASE("softmax normalizes") {
    OnDeviceModel m;
    TensorBlob in;
    in.name = "input";
    in.shape = {-1, 3};
    m.tensors.push_back(in);
    TensorBlob out;
    out.name = "probs";
    out.shape = {-1, 3};
    m.tensors.push_back(out);
    OpNode op;
    op.opcode = OpCode::Softmax;
    op.name = "softmax";
    op.inputs = {0};
    op.outputs = {1};
    m.ops.push_back(op);
    m.inputs = {0};
    m.outputs = {1};
    const Interpreter interp(m);
    const auto probs = interp.run({{0.f, 1.f, 2.f}})[0];
    double sum = 0;
    for (const auto p : probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(probs[2] > probs[1]);
    CHECK(probs[1] > probs[0]);
  }
}

TEST_CASE("interpreter refuses custom operators") {
  const auto m = fix::custom_op_model(1);
  CHECK_THROWS_AS((void)Interpreter(m), UnsupportedOperator);
}

TEST_CASE("graph summary: histogram, edges and determinism") {
  SUBCASE("small cnn census") {
    const auto summary = analysis::summarize_graph(fix::tiny_cnn(6));
    CHECK(summary.node_count == 5);
    CHECK(summary.operator_histogram.at("Conv2D") == 1);
    CHECK(summary.operator_histogram.at("MaxPool2D") == 1);
    CHECK(summary.operator_histogram.at("FullyConnected") == 1);
    CHECK(summary.operator_histogram.at("Softmax") == 1);
    CHECK(summary.operator_histogram.at("Reshape") == 1);
    int total = 0;
    for (const auto& [op, count] : summary.operator_histogram) total += count;
    CHECK(total == summary.node_count);
    CHECK(summary.edges.size() == 4);
    for (const auto& [from, to] : summary.edges) CHECK(from + 1 == to);
  }

  SUBCASE("single-node identity graph") {
    const auto summary = analysis::summarize_graph(fix::identity_model());
    CHECK(summary.node_count == 1);
    CHECK(summary.edges.empty());
  }

  SUBCASE("depthwise-dominated census") {
    const auto summary = analysis::summarize_graph(fix::depthwise_cnn(7));
    int depthwise = summary.operator_histogram.at("DepthwiseConv2D");
    for (const auto& [op, count] : summary.operator_histogram) {
      if (op != "DepthwiseConv2D" && op != "Conv2D") CHECK(depthwise >= count);
    }
    CHECK(depthwise == 3);
  }

  SUBCASE("deterministic for fixed bytes") {
    const auto m = fix::residual_cnn(8);
    const auto a = analysis::summarize_graph(m);
    const auto b = analysis::summarize_graph(m);
    CHECK(a.operator_histogram == b.operator_histogram);
    CHECK(a.edges == b.edges);
  }
}

TEST_CASE("io signature reports loader facts verbatim") {
  SUBCASE("float classifier") {
    const auto [ins, outs] = analysis::io_signature(fix::victim_cnn(9, 10));
    REQUIRE(ins.size() == 1);
    REQUIRE(outs.size() == 1);
    CHECK(ins[0].dtype == DType::Float32);
    CHECK(ins[0].shape == std::vector<int>{-1, 32, 32, 3});
    CHECK(ins[0].symbolic_batch);
    CHECK(outs[0].shape == std::vector<int>{-1, 10});
  }
  SUBCASE("quantized model reports uint8 input") {
    const auto [ins, outs] = analysis::io_signature(fix::quantized_cnn(10));
    CHECK(ins[0].dtype == DType::UInt8);
  }
  SUBCASE("two outputs preserve order") {
    const auto [ins, outs] = analysis::io_signature(fix::two_head_model(11));
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].name.find("boxes") == 0);
    CHECK(outs[1].name.find("scores") == 0);
  }
}

TEST_CASE("label binding by class-count match") {
  auto info = analysis::analyze_model(fix::victim_cnn(12, 10), "pkg!assets/model.tflite");

  inventory::LabelFileRecord ten;
  ten.archive_path = "assets/labels.txt";
  for (int i = 0; i < 10; ++i) ten.labels.push_back("c" + std::to_string(i));
  ten.label_count = 10;

  inventory::LabelFileRecord five;
  five.archive_path = "assets/labels5.txt";
  for (int i = 0; i < 5; ++i) five.labels.push_back("c" + std::to_string(i));
  five.label_count = 5;

  SUBCASE("unique match binds") {
    const auto bound = analysis::bind_labels(info, {ten, five});
    REQUIRE(bound.labels.has_value());
    CHECK(bound.labels->size() == 10);
    CHECK(bound.label_source == "assets/labels.txt");
  }
  SUBCASE("count mismatch stays unbound with a note") {
    const auto bound = analysis::bind_labels(info, {five});
    CHECK(!bound.labels.has_value());
    REQUIRE(!bound.notes.empty());
    CHECK(bound.notes.back().find("label-count-mismatch") != std::string::npos);
  }
  SUBCASE("ambiguity refuses to guess") {
    auto ten2 = ten;
    ten2.archive_path = "assets/other_labels.txt";
    const auto bound = analysis::bind_labels(info, {ten, ten2});
    CHECK(!bound.labels.has_value());
    REQUIRE(!bound.notes.empty());
    CHECK(bound.notes.back().find("ambiguous-label-binding") != std::string::npos);
  }
}

TEST_CASE("task inference heuristics") {
  auto task_of = [](const OnDeviceModel& m) {
    const auto summary = analysis::summarize_graph(m);
    const auto [ins, outs] = analysis::io_signature(m);
    return analysis::infer_task(summary, ins, outs);
  };
  CHECK(task_of(fix::victim_cnn(13, 10)) == analysis::Task::ImageClassification);
  CHECK(task_of(fix::two_head_model(14)) == analysis::Task::ObjectDetection);
  CHECK(task_of(fix::stylize_model(15)) == analysis::Task::Stylization);
  CHECK(task_of(fix::keypoint_model(16)) == analysis::Task::PoseDetection);
  CHECK(task_of(fix::identity_model()) == analysis::Task::Unknown);
}

TEST_CASE("classification inference implies a single rank<=2 output") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto m = fix::random_whitelist_model(seed);
    const auto summary = analysis::summarize_graph(m);
    const auto [ins, outs] = analysis::io_signature(m);
    if (analysis::infer_task(summary, ins, outs) == analysis::Task::ImageClassification) {
      CHECK(outs.size() == 1);
      CHECK(outs[0].shape.size() <= 2);
    }
  }
}

TEST_CASE("model info serializes with task and graph summary") {
  auto info = analysis::analyze_model(fix::victim_cnn(17, 10), "test!model.tflite");
  const auto summary = analysis::summarize_graph(fix::victim_cnn(17, 10));
  const auto line = analysis::to_jsonl(info, &summary);
  CHECK(line.find("\"task\":\"image-classification\"") != std::string::npos);
  CHECK(line.find("\"node_count\":10") != std::string::npos);
}

#include <cstring>

#include "doctest.h"
#include "odm/convert/convert.hpp"
#include "odm/errors.hpp"
#include "odm/model/interp.hpp"
#include "odm/util/rng.hpp"
#include "src/fixtures/fixture_models.hpp"

using namespace odm;
using namespace odm::convert;

namespace {

std::vector<float> tensor_floats(const model::TensorBlob& t) { return t.as_floats(); }

TrainableModel rebuild(const model::OnDeviceModel& m) {
  auto t = reconstruct_trainable(m);
  map_parameters(m, t);
  return t;
}

}  // namespace

TEST_CASE("reconstruction mirrors the operator sequence one-to-one") {
  const auto m = fix::victim_cnn(21, 10);
  const auto t = reconstruct_trainable(m);
  REQUIRE(t.layers.size() == m.ops.size());
  for (std::size_t i = 0; i < m.ops.size(); ++i) {
    CHECK(t.layers[i].layer_type == m.ops[i].opcode);
    CHECK(t.layers[i].name == m.ops[i].name);
    CHECK(t.layers[i].activation == m.ops[i].activation);
    CHECK(t.layers[i].padding == m.ops[i].padding);
  }
  CHECK(!t.params_filled);
  for (const auto& layer : t.layers) {
    for (const auto& slot : layer.slots) CHECK(!slot.filled);
  }
  // ~100k parameter budget for the desk-scale victim
  CHECK(t.graph.param_count() > 80000);
  CHECK(t.graph.param_count() < 120000);
}

TEST_CASE("custom operators abort reconstruction with a full listing") {
  const auto m = fix::custom_op_model(22);
  try {
    (void)reconstruct_trainable(m);
    FAIL("expected UnsupportedOperator");
  } catch (const UnsupportedOperator& e) {
    CHECK(std::string(e.what()).find("FusedMagicBlock") != std::string::npos);
  }
}

TEST_CASE("empty graphs cannot be reconstructed") {
  const auto m = fix::identity_model();
  auto broken = m;
  broken.ops.clear();
  broken.outputs = broken.inputs;
  CHECK_THROWS_AS((void)reconstruct_trainable(broken), UnsupportedFormat);
}

TEST_CASE("parameter mapping preserves values under the layout permutation") {
  const auto m = fix::victim_cnn(23, 10);
  auto t = reconstruct_trainable(m);
  map_parameters(m, t);
  CHECK(t.params_filled);

  // conv kernel: source [out,kh,kw,in] vs trainable [kh,kw,in,out], checked
  // element by element with independent index arithmetic
  const auto& layer = t.layers.front();
  REQUIRE(layer.layer_type == model::OpCode::Conv2D);
  const auto& slot = layer.slots.front();
  const auto src = tensor_floats(m.tensors[static_cast<std::size_t>(slot.source_tensor_id)]);
  const auto& dst = t.graph.params()[static_cast<std::size_t>(slot.param_index)].value;
  const int O = slot.source_shape[0], KH = slot.source_shape[1], KW = slot.source_shape[2],
            I = slot.source_shape[3];
  REQUIRE(dst.shape == std::vector<int>{KH, KW, I, O});
  for (int o = 0; o < O; ++o) {
    for (int y = 0; y < KH; ++y) {
      for (int x = 0; x < KW; ++x) {
        for (int c = 0; c < I; ++c) {
          const float a = src[static_cast<std::size_t>(((o * KH + y) * KW + x) * I + c)];
          const float b = dst.data[static_cast<std::size_t>(((y * KW + x) * I + c) * O + o)];
          REQUIRE(a == b);
        }
      }
    }
  }

  // bias copied verbatim
  const auto& bias_slot = layer.slots.back();
  const auto bias_src =
      tensor_floats(m.tensors[static_cast<std::size_t>(bias_slot.source_tensor_id)]);
  CHECK(t.graph.params()[static_cast<std::size_t>(bias_slot.param_index)].value.data ==
        bias_src);

  // multiset of values preserved per slot (permutation property)
  for (const auto& l : t.layers) {
    for (const auto& s : l.slots) {
      auto a = tensor_floats(m.tensors[static_cast<std::size_t>(s.source_tensor_id)]);
      auto b = t.graph.params()[static_cast<std::size_t>(s.param_index)].value.data;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("mismatched kernels raise ShapeMismatch naming the slot") {
  const auto m = fix::victim_cnn(24, 10);
  auto t = reconstruct_trainable(m);
  auto tampered = m;
  // swap the 3x3 kernel for a 5x5 one
  auto& w = tampered.tensors[static_cast<std::size_t>(t.layers[0].slots[0].source_tensor_id)];
  w.shape = {16, 5, 5, 3};
  w.data.assign(16 * 5 * 5 * 3 * 4, 0);
  try {
    map_parameters(tampered, t);
    FAIL("expected ShapeMismatch");
  } catch (const ShapeMismatch& e) {
    CHECK(std::string(e.what()).find("conv1/w") != std::string::npos);
  }
}

TEST_CASE("dual-path equivalence across the fixture family") {
  for (const auto& m : {fix::victim_cnn(25, 10, 16), fix::tiny_cnn(26), fix::depthwise_cnn(27),
                        fix::residual_cnn(28)}) {
    auto t = rebuild(m);
    const auto report = verify_equivalence(m, t, 100, kFloatEquivalenceTol, 77);
    CAPTURE(report.max_abs_diff);
    CHECK(report.samples_tested == 100);
    CHECK(report.argmax_agreement == 1.0);
    CHECK(report.max_abs_diff <= kFloatEquivalenceTol);
    CHECK(report.passed);
  }
}

TEST_CASE("quantized sources verify after dequantization") {
  const auto m = fix::quantized_cnn(29);
  auto t = rebuild(m);
  CHECK(has_quantized_parameters(m));
  const auto report = verify_equivalence(m, t, 50, kQuantizedEquivalenceTol, 78);
  CHECK(report.passed);
}

TEST_CASE("a perturbed weight breaks argmax agreement") {
  const auto m = fix::tiny_cnn(30);
  auto t = rebuild(m);
  // push one logit row far away via the dense weights
  for (auto& p : t.graph.params()) {
    if (p.name.find("dense/w") != std::string::npos) {
      for (std::size_t i = 0; i < p.value.data.size(); i += 5) p.value.data[i] += 0.5f;
    }
  }
  const auto report = verify_equivalence(m, t, 100, kFloatEquivalenceTol, 79);
  CHECK(report.argmax_agreement < 1.0);
  CHECK(!report.passed);
}

TEST_CASE("signature mismatches are detected") {
  const auto m = fix::tiny_cnn(31);
  const auto other = fix::victim_cnn(32, 10);
  auto t = rebuild(other);
  CHECK_THROWS_AS((void)verify_equivalence(m, t, 10, 1e-5, 80), SignatureMismatch);
}

TEST_CASE("export requires filled parameters") {
  const auto m = fix::tiny_cnn(33);
  auto t = reconstruct_trainable(m);
  CHECK_THROWS_AS((void)export_deployable(t, "x"), Error);
}

TEST_CASE("export round trip: bytes validate and verify against the source") {
  // property over random whitelist architectures
  for (std::uint64_t seed = 40; seed < 48; ++seed) {
    const auto m = fix::random_whitelist_model(seed);
    auto t = rebuild(m);
    const auto bytes = export_deployable(t, "roundtrip-test");
    const auto reloaded = model::parse_flat_schema(bytes);
    CHECK(reloaded.producer == "roundtrip-test");

    auto t2 = rebuild(reloaded);
    const auto report = verify_equivalence(reloaded, t2, 50, kFloatEquivalenceTol, seed);
    CAPTURE(seed);
    CHECK(report.passed);

    // exported bytes equal the original model's behavior as well
    const auto cross = verify_equivalence(m, t2, 50, kFloatEquivalenceTol, seed + 1);
    CHECK(cross.passed);
  }
}

TEST_CASE("equivalence reports serialize to json") {
  EquivalenceReport r;
  r.samples_tested = 10;
  r.max_abs_diff = 1e-7;
  r.argmax_agreement = 1.0;
  r.passed = true;
  r.tolerance = 1e-5;
  r.seed = 7;
  const auto j = to_json(r);
  CHECK(j.find("\"passed\": true") != std::string::npos);
  CHECK(j.find("\"samples_tested\": 10") != std::string::npos);
}

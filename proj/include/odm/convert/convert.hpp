#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odm/model/ondevice.hpp"
#include "odm/nn/graph.hpp"

namespace odm::convert {

// Named parameter slot of a reconstructed layer. source layouts: "OHWI"
// (conv), "1HWC" (depthwise), "OI" (fully connected), "bias".
struct ParamSlot {
  std::string name;
  std::string layout;
  std::vector<int> source_shape;
  std::vector<int> trainable_shape;
  int source_tensor_id = -1;
  int param_index = -1;  // index into graph params
  bool trainable = true;
  bool filled = false;
};

// One reconstructed layer, mirroring a source operator one-to-one.
struct LayerSpec {
  model::OpCode layer_type = model::OpCode::Custom;
  std::string name;
  int out_channels = 0;
  int kh = 0, kw = 0;
  int filter_h = 0, filter_w = 0;
  int stride_h = 1, stride_w = 1;
  int depth_multiplier = 1;
  model::Padding padding = model::Padding::Same;
  model::Activation activation = model::Activation::None;
  std::vector<int> new_shape;
  std::vector<ParamSlot> slots;
  std::vector<int> input_tensor_ids;
  int output_tensor_id = -1;
};

struct TrainableModel {
  std::vector<LayerSpec> layers;
  nn::Graph graph;
  std::vector<int> tensor_to_node;  // source tensor id -> nn node id (-1 for params)
  model::OnDeviceModel skeleton;    // source structure, parameter data cleared
  bool params_filled = false;

  std::vector<int> input_nodes() const;
  std::vector<int> output_nodes() const;
};

struct EquivalenceReport {
  int samples_tested = 0;
  double max_abs_diff = 0.0;
  double argmax_agreement = 0.0;
  bool passed = false;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kFloatEquivalenceTol = 1e-5;
inline constexpr double kQuantizedEquivalenceTol = 1e-2;

// Mirrors layer count, operator sequence, and per-layer config of the source
// graph; parameters stay unfilled. Throws UnsupportedOperator naming every
// operator outside the supported set rather than approximating.
TrainableModel reconstruct_trainable(const model::OnDeviceModel& m);

// Fills every parameter slot from the source tensors, transposing between
// the on-device and trainable layouts and dequantizing quantized sources.
void map_parameters(const model::OnDeviceModel& source, TrainableModel& target);

// Dual-path inference comparison on seeded uniform random inputs. diff and
// argmax agreement are measured on the primary output.
EquivalenceReport verify_equivalence(const model::OnDeviceModel& original,
                                     const TrainableModel& reconstructed, int n_samples,
                                     double tolerance, std::uint64_t seed = 0x5eed);

// True when any parameter tensor of the model is quantized (selects the
// post-dequantization tolerance).
bool has_quantized_parameters(const model::OnDeviceModel& m);

// Re-export to the deployable structure: same architecture, float32 weights
// written back in the source layouts. Requires all slots filled.
model::OnDeviceModel export_deployable_model(const TrainableModel& m,
                                             const std::string& producer = "");
std::vector<std::uint8_t> export_deployable(const TrainableModel& m,
                                            const std::string& producer = "");

std::string to_json(const EquivalenceReport& r);

}  // namespace odm::convert

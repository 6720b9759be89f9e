#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odm/inventory/scan.hpp"
#include "odm/model/ondevice.hpp"

namespace odm::analysis {

struct TensorSpec {
  std::string name;
  model::DType dtype = model::DType::Float32;
  std::vector<int> shape;  // leading -1 marks a symbolic batch
  bool symbolic_batch = false;
};

struct GraphSummary {
  int node_count = 0;
  std::map<std::string, int> operator_histogram;
  std::vector<std::pair<int, int>> edges;  // (producer op, consumer op)
};

enum class Task { ImageClassification, ObjectDetection, Stylization, PoseDetection, Unknown };
const char* to_string(Task t);

struct ModelInfo {
  std::vector<TensorSpec> inputs;
  std::vector<TensorSpec> outputs;
  std::optional<std::vector<std::string>> labels;
  std::string label_source;  // archive path the labels were bound from
  Task task = Task::Unknown;
  std::string source_path;   // the originating ModelCandidate
  std::vector<std::string> notes;
};

// Heuristic table for task inference; kept as configuration.
struct TaskRules {
  std::vector<std::string> detection_tokens = {"box", "score", "class", "detection"};
  std::vector<std::string> pose_tokens = {"keypoint", "pose", "heatmap"};
  int min_image_side = 8;
};

// Deterministic operator census in stored (topological) order.
GraphSummary summarize_graph(const model::OnDeviceModel& m);

// Loader-reported I/O tensor specs, order preserved, symbolic batch marked.
std::pair<std::vector<TensorSpec>, std::vector<TensorSpec>> io_signature(
    const model::OnDeviceModel& m);

// Binds the unique label file whose count matches the class dimension of the
// primary output; ambiguity and mismatches are recorded, never guessed.
ModelInfo bind_labels(ModelInfo info, const std::vector<inventory::LabelFileRecord>& candidates);

Task infer_task(const GraphSummary& summary, const std::vector<TensorSpec>& inputs,
                const std::vector<TensorSpec>& outputs, const TaskRules& rules = {});

// Full analysis convenience: summary + signature + task (labels unbound).
ModelInfo analyze_model(const model::OnDeviceModel& m, const std::string& source_path,
                        const TaskRules& rules = {});

// Class dimension of the primary output when classification-shaped.
std::optional<int> class_dimension(const ModelInfo& info);

std::string to_jsonl(const ModelInfo& info, const GraphSummary* summary = nullptr);

}  // namespace odm::analysis

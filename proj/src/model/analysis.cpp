#include "odm/model/analysis.hpp"

#include <algorithm>

#include "nlohmann/json.hpp"
#include "odm/util/strings.hpp"

namespace odm::analysis {

using nlohmann::ordered_json;

const char* to_string(Task t) {
  switch (t) {
    case Task::ImageClassification: return "image-classification";
    case Task::ObjectDetection: return "object-detection";
    case Task::Stylization: return "stylization";
    case Task::PoseDetection: return "pose-detection";
    case Task::Unknown: return "unknown";
  }
  return "unknown";
}

namespace {

std::string op_label(const model::OpNode& op) {
  if (op.opcode == model::OpCode::Custom) return "Custom(" + op.custom_name + ")";
  return model::to_string(op.opcode);
}

TensorSpec spec_of(const model::TensorBlob& t) {
  TensorSpec s;
  s.name = t.name;
  s.dtype = t.dtype;
  s.shape = t.shape;
  s.symbolic_batch = !t.shape.empty() && t.shape[0] == -1;
  return s;
}

int effective_rank(const TensorSpec& s) { return static_cast<int>(s.shape.size()); }

}  // namespace

GraphSummary summarize_graph(const model::OnDeviceModel& m) {
  model::check_structure(m);
  GraphSummary out;
  out.node_count = static_cast<int>(m.ops.size());
  // producer op per tensor id
  std::vector<int> producer(m.tensors.size(), -1);
  for (std::size_t i = 0; i < m.ops.size(); ++i) {
    for (const auto t : m.ops[i].outputs) {
      producer[static_cast<std::size_t>(t)] = static_cast<int>(i);
    }
    ++out.operator_histogram[op_label(m.ops[i])];
  }
  for (std::size_t i = 0; i < m.ops.size(); ++i) {
    for (const auto t : m.ops[i].inputs) {
      const int p = producer[static_cast<std::size_t>(t)];
      if (p >= 0) out.edges.emplace_back(p, static_cast<int>(i));
    }
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  return out;
}

std::pair<std::vector<TensorSpec>, std::vector<TensorSpec>> io_signature(
    const model::OnDeviceModel& m) {
  model::check_structure(m);
  std::vector<TensorSpec> ins, outs;
  for (const auto id : m.inputs) ins.push_back(spec_of(m.tensors[static_cast<std::size_t>(id)]));
  for (const auto id : m.outputs) {
    outs.push_back(spec_of(m.tensors[static_cast<std::size_t>(id)]));
  }
  return {ins, outs};
}

std::optional<int> class_dimension(const ModelInfo& info) {
  if (info.outputs.empty()) return std::nullopt;
  const auto& primary = info.outputs.front();
  const int rank = effective_rank(primary);
  if (rank == 1 && !primary.symbolic_batch) return primary.shape[0];
  if (rank == 2 && primary.shape.back() > 0) return primary.shape.back();
  return std::nullopt;
}

ModelInfo bind_labels(ModelInfo info, const std::vector<inventory::LabelFileRecord>& candidates) {
  const auto c = class_dimension(info);
  if (!c) {
    info.notes.push_back("label-binding-skipped: primary output is not classification-shaped");
    return info;
  }
  std::vector<const inventory::LabelFileRecord*> matches;
  for (const auto& rec : candidates) {
    if (rec.error.empty() && static_cast<int>(rec.label_count) == *c) matches.push_back(&rec);
  }
  if (matches.size() == 1) {
    info.labels = matches[0]->labels;
    info.label_source = matches[0]->archive_path;
  } else if (matches.size() > 1) {
    std::string note = "ambiguous-label-binding:";
    for (const auto* rec : matches) note += " " + rec->archive_path;
    info.notes.push_back(note);
  } else if (!candidates.empty()) {
    info.notes.push_back("label-count-mismatch: no file with " + std::to_string(*c) +
                         " labels");
  }
  return info;
}

Task infer_task(const GraphSummary& summary, const std::vector<TensorSpec>& inputs,
                const std::vector<TensorSpec>& outputs, const TaskRules& rules) {
  (void)inputs;
  auto name_has_token = [](const TensorSpec& s, const std::vector<std::string>& tokens) {
    const std::string lower = util::to_lower(s.name);
    for (const auto& tok : tokens) {
      if (util::contains(lower, tok)) return true;
    }
    return false;
  };

  if (outputs.size() >= 2) {
    for (const auto& out : outputs) {
      if (name_has_token(out, rules.detection_tokens)) return Task::ObjectDetection;
    }
  }
  if (outputs.size() == 1) {
    const auto& out = outputs.front();
    const int rank = effective_rank(out);
    const bool classification_shape =
        (rank == 1 && !out.symbolic_batch) || (rank == 2 && out.symbolic_batch) || rank == 2;
    const bool terminal_logits = summary.operator_histogram.count("Softmax") ||
                                 summary.operator_histogram.count("FullyConnected");
    if (classification_shape && rank <= 2 && terminal_logits && out.shape.back() >= 2) {
      return Task::ImageClassification;
    }
    if (rank == 4 && out.shape[3] > 0 && (out.shape[3] == 1 || out.shape[3] == 3) &&
        out.shape[1] >= rules.min_image_side && out.shape[2] >= rules.min_image_side) {
      return Task::Stylization;
    }
  }
  for (const auto& out : outputs) {
    if (name_has_token(out, rules.pose_tokens)) return Task::PoseDetection;
    const int rank = effective_rank(out);
    if (rank == 3 && (out.shape[2] == 2 || out.shape[2] == 3) && out.shape[1] >= 4) {
      return Task::PoseDetection;  // [batch, K, 2|3] keypoint coordinates
    }
  }
  return Task::Unknown;
}

ModelInfo analyze_model(const model::OnDeviceModel& m, const std::string& source_path,
                        const TaskRules& rules) {
  ModelInfo info;
  const auto [ins, outs] = io_signature(m);
  info.inputs = ins;
  info.outputs = outs;
  info.source_path = source_path;
  const auto summary = summarize_graph(m);
  info.task = infer_task(summary, ins, outs, rules);
  for (const auto& spec : info.inputs) {
    if (spec.dtype == model::DType::Other) {
      info.notes.push_back("warning: input tensor with unrecognized dtype: " + spec.name);
    }
  }
  return info;
}

namespace {

ordered_json spec_json(const TensorSpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["dtype"] = model::to_string(s.dtype);
  j["shape"] = s.shape;
  j["symbolic_batch"] = s.symbolic_batch;
  return j;
}

}  // namespace

std::string to_jsonl(const ModelInfo& info, const GraphSummary* summary) {
  ordered_json j;
  j["source_path"] = info.source_path;
  j["task"] = to_string(info.task);
  j["inputs"] = ordered_json::array();
  for (const auto& s : info.inputs) j["inputs"].push_back(spec_json(s));
  j["outputs"] = ordered_json::array();
  for (const auto& s : info.outputs) j["outputs"].push_back(spec_json(s));
  if (info.labels) {
    j["labels"] = *info.labels;
    j["label_source"] = info.label_source;
  } else {
    j["labels"] = nullptr;
  }
  if (summary) {
    j["graph"]["node_count"] = summary->node_count;
    j["graph"]["operator_histogram"] = summary->operator_histogram;
    j["graph"]["edge_count"] = summary->edges.size();
  }
  j["notes"] = info.notes;
  return j.dump();
}

}  // namespace odm::analysis

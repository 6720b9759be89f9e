#pragma once

#include "odm/eval/metrics.hpp"
#include "odm/model/interp.hpp"
#include "odm/nn/graph.hpp"

namespace odm::eval {

// Batched argmax classifier over the trainable graph (primary output).
Classifier classifier_from_graph(const nn::Graph& graph, int batch_size = 64);

// Per-sample classifier over the reference interpreter, fanned out across
// worker threads.
Classifier classifier_from_interpreter(const model::Interpreter& interp);

}  // namespace odm::eval

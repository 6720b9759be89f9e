#pragma once

#include <string>
#include <vector>

#include "odm/nn/tensor.hpp"
#include "odm/util/rng.hpp"

namespace odm::nn {

enum class Pad { Same, Valid };
enum class Act { None, Relu, Relu6, Sigmoid, Tanh };

struct Param {
  std::string name;
  Tensor value;
};

enum class NodeKind {
  Input,
  Conv2D,
  DepthwiseConv2D,
  Dense,
  MaxPool2D,
  AvgPool2D,
  Activation,  // standalone activation node
  Softmax,
  Add,
  Concat,      // channel axis
  Upsample2x,  // nearest neighbour
  Reshape,
};

struct Node {
  NodeKind kind = NodeKind::Input;
  std::string name;
  std::vector<int> inputs;  // node ids

  int out_channels = 0;
  int kh = 0, kw = 0;
  int stride_h = 1, stride_w = 1;
  int depth_multiplier = 1;
  Pad padding = Pad::Same;
  Act act = Act::None;          // fused for Conv/Dense/Add, the op for Activation
  std::vector<int> out_sample_shape;  // shape without batch dim
  int weight = -1, bias = -1;   // param indices
};

// Static computation graph. Built once, executed by any number of Runners.
// Parameters live on the graph; Runners only read them.
class Graph {
 public:
  int add_input(std::vector<int> sample_shape, std::string name = "input");
  int conv2d(int in, int out_ch, int kh, int kw, int sh, int sw, Pad pad, Act act,
             std::string name = "");
  int depthwise_conv2d(int in, int mult, int kh, int kw, int sh, int sw, Pad pad, Act act,
                       std::string name = "");
  int dense(int in, int out_dim, Act act, std::string name = "");
  int max_pool(int in, int fh, int fw, int sh, int sw, Pad pad, std::string name = "");
  int avg_pool(int in, int fh, int fw, int sh, int sw, Pad pad, std::string name = "");
  int activation(int in, Act act, std::string name = "");
  int softmax(int in, std::string name = "");
  int add(int a, int b, Act act = Act::None, std::string name = "");
  int concat(int a, int b, std::string name = "");
  int upsample2x(int in, std::string name = "");
  int reshape(int in, std::vector<int> sample_shape, std::string name = "");

  void mark_output(int node);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& outputs() const { return outputs_; }
  const std::vector<int>& input_nodes() const { return input_nodes_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  const std::vector<int>& sample_shape(int node) const {
    return nodes_.at(static_cast<std::size_t>(node)).out_sample_shape;
  }
  std::size_t param_count() const;  // total scalar parameters

  // He-uniform weights, zero biases.
  void init_params(rng::Engine& gen);

 private:
  int push(Node n);
  int new_param(const std::string& name, std::vector<int> shape);

  std::vector<Node> nodes_;
  std::vector<Param> params_;
  std::vector<int> outputs_;
  std::vector<int> input_nodes_;
};

// Per-execution state: node values, gradients, pooling argmax. One Runner per
// thread; concurrent Runners over one Graph are safe (params are read-only).
class Runner {
 public:
  explicit Runner(const Graph& g);

  // Values for every graph input, batch-major. Computes all nodes.
  void forward(const std::vector<Tensor>& inputs);

  const Tensor& value(int node) const { return values_.at(static_cast<std::size_t>(node)); }

  // Seeds d(loss)/d(node) and back-propagates to parameters and inputs.
  // Call after forward; gradients accumulate until zero_grads().
  void backward(int node, const Tensor& grad);

  const Tensor& grad(int node) const { return grads_.at(static_cast<std::size_t>(node)); }
  std::vector<Tensor>& param_grads() { return param_grads_; }
  void zero_grads();

 private:
  void compute(int id);
  void compute_grad(int id);

  const Graph& g_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<std::vector<int>> pool_argmax_;
  std::vector<Tensor> param_grads_;
  int batch_ = 0;
};

// Convenience single-shot inference: one Runner, returns the values of all
// graph outputs in order.
std::vector<Tensor> infer(const Graph& g, const std::vector<Tensor>& inputs);

}  // namespace odm::nn

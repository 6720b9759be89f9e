#pragma once

#include <vector>

#include "odm/nn/graph.hpp"
#include "odm/nn/tensor.hpp"

namespace odm::nn {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // grads must align with params; state is lazily sized on first step.
  void step(std::vector<Param>& params, const std::vector<Tensor>& grads);
  void set_lr(float lr) { cfg_.lr = lr; }
  float lr() const { return cfg_.lr; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

// Mean softmax cross-entropy over the batch from raw logits [N, C].
// d_logits gets (softmax - onehot) / N.
float softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            Tensor* d_logits);

// Mean per-element sigmoid binary cross-entropy from logits [N, L] against
// targets in {0,1}; numerically stable form. d_logits gets (sigmoid-t)/(N*L).
float sigmoid_bce(const Tensor& logits, const Tensor& targets, Tensor* d_logits);

// Mean squared error; d_a gets 2*(a-b)/count.
float mse(const Tensor& a, const Tensor& b, Tensor* d_a);

// Element-wise sums of per-thread gradient buffers into the first buffer,
// in thread-index order (deterministic for a fixed worker count).
void merge_param_grads(std::vector<std::vector<Tensor>*> per_thread);

std::vector<int> argmax_rows(const Tensor& t);  // [N, C] -> N row argmaxes

}  // namespace odm::nn

#include "odm/nn/optim.hpp"

#include <cmath>

#include "odm/errors.hpp"

namespace odm::nn {

void Adam::step(std::vector<Param>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ShapeMismatch("optimizer grads misaligned");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Tensor(params[i].value.shape);
      v_[i] = Tensor(params[i].value.shape);
    }
  }
  ++t_;
  const float b1t = 1.f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float b2t = 1.f - std::pow(cfg_.beta2, static_cast<float>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.data;
    const auto& g = grads[i].data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.f - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.f - cfg_.beta2) * g[j] * g[j];
      const float mhat = m[j] / b1t;
      const float vhat = v[j] / b2t;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

float softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            Tensor* d_logits) {
  const int n = logits.dim(0);
  const int c = logits.dim(1);
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ShapeMismatch("label count does not match batch");
  }
  if (d_logits) *d_logits = Tensor(logits.shape);
  double loss = 0.0;
  for (int b = 0; b < n; ++b) {
    const float* row = logits.ptr() + static_cast<std::size_t>(b) * c;
    float mx = row[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, row[i]);
    double denom = 0.0;
    for (int i = 0; i < c; ++i) denom += std::exp(static_cast<double>(row[i] - mx));
    const int y = labels[static_cast<std::size_t>(b)];
    loss += std::log(denom) - static_cast<double>(row[y] - mx);
    if (d_logits) {
      float* drow = d_logits->ptr() + static_cast<std::size_t>(b) * c;
      for (int i = 0; i < c; ++i) {
        const float p = static_cast<float>(std::exp(static_cast<double>(row[i] - mx)) / denom);
        drow[i] = (p - (i == y ? 1.f : 0.f)) / static_cast<float>(n);
      }
    }
  }
  return static_cast<float>(loss / n);
}

float sigmoid_bce(const Tensor& logits, const Tensor& targets, Tensor* d_logits) {
  if (!logits.same_shape(targets)) throw ShapeMismatch("bce target shape mismatch");
  const std::size_t count = logits.count();
  if (d_logits) *d_logits = Tensor(logits.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = logits.data[i];
    const double z = targets.data[i];
    loss += std::max(x, 0.0) - x * z + std::log1p(std::exp(-std::abs(x)));
    if (d_logits) {
      const double s = 1.0 / (1.0 + std::exp(-x));
      d_logits->data[i] = static_cast<float>((s - z) / static_cast<double>(count));
    }
  }
  return static_cast<float>(loss / static_cast<double>(count));
}

float mse(const Tensor& a, const Tensor& b, Tensor* d_a) {
  if (!a.same_shape(b)) throw ShapeMismatch("mse shape mismatch");
  const std::size_t count = a.count();
  if (d_a) *d_a = Tensor(a.shape);
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
    if (d_a) d_a->data[i] = static_cast<float>(2.0 * d / static_cast<double>(count));
  }
  return static_cast<float>(sum / static_cast<double>(count));
}

void merge_param_grads(std::vector<std::vector<Tensor>*> per_thread) {
  if (per_thread.size() < 2) return;
  auto& base = *per_thread[0];
  for (std::size_t t = 1; t < per_thread.size(); ++t) {
    const auto& other = *per_thread[t];
    for (std::size_t i = 0; i < base.size(); ++i) add_inplace(base[i], other[i]);
  }
}

std::vector<int> argmax_rows(const Tensor& t) {
  const int n = t.dim(0);
  const int c = t.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    const float* row = t.ptr() + static_cast<std::size_t>(b) * c;
    int best = 0;
    for (int i = 1; i < c; ++i) {
      if (row[i] > row[best]) best = i;
    }
    out[static_cast<std::size_t>(b)] = best;
  }
  return out;
}

}  // namespace odm::nn

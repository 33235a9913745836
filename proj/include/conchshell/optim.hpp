/* Copyright 2026 The ConchShell Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "conchshell/autograd.hpp"

namespace conchshell {

struct OptimizerConfig {
  double lr0 = 1e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double lr_decay = 1.0;  // multiplier applied once per decay_every steps
  uint64_t decay_every = 20000;
};

// Piecewise-constant decay: lr0 * decay^floor(step / decay_every).
inline double lr_at_step(double lr0, double decay, uint64_t decay_every,
                         uint64_t step) {
  if (decay_every == 0) return lr0;
  return lr0 * std::pow(decay, static_cast<double>(step / decay_every));
}

// AdamW with decoupled weight decay:
//   m <- b1 m + (1-b1) g        v <- b2 v + (1-b2) g^2
//   p <- p - lr (m/(1-b1^t) / (sqrt(v/(1-b2^t)) + eps) + wd p)
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Var<T>> params, OptimizerConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  // Applies one update using the scheduled lr for the current step index
  // (step 0 uses lr0), then advances the step counter.
  void step() {
    const double lr =
        lr_at_step(cfg_.lr0, cfg_.lr_decay, cfg_.decay_every, steps_);
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto node = params_[i].node();
      if (!node->requires_grad) continue;
      node->ensure_grad();
      T* p = node->value.data();
      const T* g = node->grad.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const size_t n = node->value.numel();
      for (size_t j = 0; j < n; ++j) {
        const T gj = g[j];
        m[j] = static_cast<T>(cfg_.beta1) * m[j] +
               static_cast<T>(1.0 - cfg_.beta1) * gj;
        v[j] = static_cast<T>(cfg_.beta2) * v[j] +
               static_cast<T>(1.0 - cfg_.beta2) * gj * gj;
        const double mhat = static_cast<double>(m[j]) / bc1;
        const double vhat = static_cast<double>(v[j]) / bc2;
        p[j] -= static_cast<T>(
            lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                  cfg_.weight_decay * static_cast<double>(p[j])));
      }
    }
  }

  void zero_grad() const {
    for (const auto& p : params_) p.zero_grad();
  }

  uint64_t steps() const { return steps_; }
  double current_lr() const {
    return lr_at_step(cfg_.lr0, cfg_.lr_decay, cfg_.decay_every, steps_);
  }
  const OptimizerConfig& config() const { return cfg_; }
  const Tensor<T>& moment1(size_t i) const { return m_[i]; }
  const Tensor<T>& moment2(size_t i) const { return v_[i]; }

 private:
  std::vector<Var<T>> params_;
  OptimizerConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  uint64_t steps_ = 0;
};

}  // namespace conchshell

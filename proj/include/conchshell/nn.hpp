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
#include <string>
#include <utility>
#include <vector>

#include "conchshell/autograd.hpp"
#include "conchshell/checkpoint.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

// Named parameter registry for one model. Registration order is the
// serialization order, so checkpoints are reproducible byte for byte.
template <typename T>
class Params {
 public:
  Var<T> add(std::string name, Tensor<T> init, bool trainable = true) {
    for (const auto& it : items_)
      if (it.first == name) throw Error(strf("duplicate parameter ", name));
    Var<T> v = Var<T>::leaf(std::move(init), trainable);
    items_.emplace_back(std::move(name), v);
    return v;
  }

  // Weights: centered uniform with half-width gain/sqrt(fan_in). gain > 1
  // (Kaiming-style) counters the per-layer variance shrink of rectifier
  // cascades; the default matches plain fan-in scaling.
  Var<T> uniform(std::string name, const std::vector<size_t>& shape,
                 size_t fan_in, Rng& rng, bool trainable = true,
                 double gain = 1.0) {
    Tensor<T> t(shape);
    t.fill_uniform(rng,
                   static_cast<T>(gain / std::sqrt(static_cast<double>(fan_in))));
    return add(std::move(name), std::move(t), trainable);
  }

  Var<T> zeros(std::string name, const std::vector<size_t>& shape,
               bool trainable = true) {
    return add(std::move(name), Tensor<T>(shape), trainable);
  }

  const std::vector<std::pair<std::string, Var<T>>>& all() const {
    return items_;
  }

  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    out.reserve(items_.size());
    for (const auto& it : items_) out.push_back(it.second);
    return out;
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& it : items_) n += it.second.numel();
    return n;
  }

  size_t trainable_scalar_count() const {
    size_t n = 0;
    for (const auto& it : items_)
      if (it.second.requires_grad()) n += it.second.numel();
    return n;
  }

  void zero_grad() const {
    for (const auto& it : items_) it.second.zero_grad();
  }

  void freeze() const {
    for (const auto& it : items_) {
      it.second.node()->requires_grad = false;
      it.second.node()->grad = Tensor<T>();
    }
  }

  // FNV-1a over the value bytes of every parameter, in registration order.
  uint64_t content_hash() const {
    uint64_t h = 1469598103934665603ull;
    for (const auto& it : items_) {
      const auto& t = it.second.value();
      const unsigned char* p =
          reinterpret_cast<const unsigned char*>(t.data());
      for (size_t i = 0; i < t.numel() * sizeof(T); ++i)
        h = (h ^ p[i]) * 1099511628211ull;
    }
    return h;
  }

  void save_into(Checkpoint* ck, const std::string& prefix) const {
    for (const auto& it : items_) {
      CheckpointArray arr;
      arr.name = prefix + it.first;
      arr.shape = it.second.shape();
      const auto& t = it.second.value();
      arr.data.resize(t.numel());
      for (size_t i = 0; i < t.numel(); ++i)
        arr.data[i] = static_cast<float>(t[i]);
      ck->arrays.push_back(std::move(arr));
    }
  }

  void load_from(const Checkpoint& ck, const std::string& prefix) const {
    for (const auto& it : items_) {
      const CheckpointArray* arr = ck.find(prefix + it.first);
      if (!arr)
        throw DataError(strf("checkpoint missing array ", prefix, it.first));
      if (arr->shape != it.second.shape())
        throw DataError(strf("checkpoint array ", prefix, it.first,
                             " shape mismatch: file ",
                             Tensor<T>::shape_str(arr->shape), " vs model ",
                             Tensor<T>::shape_str(it.second.shape())));
      Tensor<T>& dst = it.second.mutable_value();
      for (size_t i = 0; i < dst.numel(); ++i)
        dst[i] = static_cast<T>(arr->data[i]);
    }
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> items_;
};

// Exact scalar counts for one model's parameter set.
struct ModelStats {
  size_t parameters = 0;
  size_t trainable = 0;
};

template <typename T>
ModelStats model_stats(const Params<T>& params) {
  return ModelStats{params.scalar_count(), params.trainable_scalar_count()};
}

}  // namespace conchshell

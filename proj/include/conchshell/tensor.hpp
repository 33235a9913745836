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
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "conchshell/common.hpp"
#include "conchshell/rng.hpp"

namespace conchshell {

// Dense row-major n-d array. Plain value type; all the math that needs a
// derivative lives in autograd.hpp, everything else works on these directly.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), v_(count(shape_), fill) {}

  static Tensor from(std::vector<size_t> shape, std::vector<T> values) {
    if (count(shape) != values.size())
      throw DataError(strf("tensor shape ", shape_str(shape), " wants ",
                           count(shape), " values, got ", values.size()));
    Tensor t;
    t.shape_ = std::move(shape);
    t.v_ = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_[i]; }
  size_t numel() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  std::vector<T>& vec() { return v_; }
  const std::vector<T>& vec() const { return v_; }

  T& operator[](size_t i) { return v_[i]; }
  const T& operator[](size_t i) const { return v_[i]; }

  T& at(size_t i) { return v_[i]; }
  T& at(size_t i, size_t j) { return v_[i * shape_[1] + j]; }
  T& at(size_t i, size_t j, size_t k) {
    return v_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(size_t i, size_t j, size_t k, size_t l) {
    return v_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  T& at(size_t i, size_t j, size_t k, size_t l, size_t m) {
    return v_[(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l) *
                  shape_[4] +
              m];
  }
  const T& at(size_t i) const { return v_[i]; }
  const T& at(size_t i, size_t j) const { return v_[i * shape_[1] + j]; }
  const T& at(size_t i, size_t j, size_t k) const {
    return v_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(size_t i, size_t j, size_t k, size_t l) const {
    return v_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& at(size_t i, size_t j, size_t k, size_t l, size_t m) const {
    return v_[(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l) *
                  shape_[4] +
              m];
  }

  void fill(T x) { std::fill(v_.begin(), v_.end(), x); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T x : v_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  // Uniform fill in [-a, a]; the init used throughout the models.
  void fill_uniform(Rng& rng, T a) {
    for (T& x : v_) x = static_cast<T>(rng.uniform(-a, a));
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    std::vector<U> w(v_.size());
    for (size_t i = 0; i < v_.size(); ++i) w[i] = static_cast<U>(v_[i]);
    return Tensor<U>::from(shape_, std::move(w));
  }

  static size_t count(const std::vector<size_t>& shape) {
    size_t n = shape.empty() ? 0 : 1;
    for (const size_t d : shape) n *= d;
    return n;
  }

  static std::string shape_str(const std::vector<size_t>& shape) {
    std::string s;
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s.empty() ? "()" : s;
  }

 private:
  std::vector<size_t> shape_;
  std::vector<T> v_;
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  return Tensor<T>::shape_str(t.shape());
}

}  // namespace conchshell

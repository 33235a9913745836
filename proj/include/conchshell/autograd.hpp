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
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "conchshell/common.hpp"
#include "conchshell/tensor.hpp"

namespace conchshell {

// Reverse-mode autodiff over eagerly evaluated tensors. Every op builds a
// node holding its forward value and a closure that scatters the node's
// gradient into its parents. Nodes whose subtree contains no trainable leaf
// skip the closure entirely, so frozen-model forwards cost no graph state.
template <typename T>
struct AgNode {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<AgNode>> parents;
  std::function<void(AgNode&)> backprop;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
  }
};

template <typename T>
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor<T> value, bool requires_grad) {
    Var v;
    v.node_ = std::make_shared<AgNode<T>>();
    v.node_->value = std::move(value);
    v.node_->requires_grad = requires_grad;
    return v;
  }

  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  // Direct write access to a leaf's payload (optimizer updates, state load).
  Tensor<T>& mutable_value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  void zero_grad() const {
    node_->ensure_grad();
    node_->grad.fill(T(0));
  }

  const std::vector<size_t>& shape() const { return node_->value.shape(); }
  size_t numel() const { return node_->value.numel(); }

  std::shared_ptr<AgNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<AgNode<T>> node_;
};

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(AgNode<T>&)> backprop) {
  auto v = Var<T>::leaf(std::move(value), false);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  if (rg) {
    auto node = v.node();
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return v;
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw DataError(strf(op, ": shape mismatch ", shape_str(a.value()), " vs ",
                         shape_str(b.value())));
}

}  // namespace detail

// Runs reverse-mode accumulation from a scalar loss. Grad buffers of interior
// nodes belong to the graph and are fresh per forward pass; leaf grads
// accumulate until explicitly zeroed.
template <typename T>
void backward(const Var<T>& loss) {
  if (loss.numel() != 1)
    throw DataError(strf("backward: loss must be scalar, got shape ",
                         shape_str(loss.value())));
  AgNode<T>* root = loss.node().get();
  if (!root->requires_grad) return;

  std::vector<AgNode<T>*> order;
  std::unordered_set<AgNode<T>*> visited;
  struct Frame {
    AgNode<T>* n;
    size_t next;
  };
  std::vector<Frame> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      AgNode<T>* p = f.n->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.fill(T(0));
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const size_t n = out.numel();
  for (size_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](AgNode<T>& self) {
    for (int s = 0; s < 2; ++s) {
      auto& p = *self.parents[s];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const size_t n = out.numel();
  for (size_t i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](AgNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.numel(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.numel(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  const size_t n = out.numel();
  for (size_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](AgNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.numel(); ++i)
        pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.numel(); ++i)
        pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

// a*x + b with scalar coefficients.
template <typename T>
Var<T> affine(const Var<T>& x, T a, T b) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = a * x.value()[i] + b;
  return detail::make_op<T>(std::move(out), {x}, [a](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += a * self.grad[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T a) {
  return affine(x, a, T(0));
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  return affine(x, T(-1), T(0));
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = x.value()[i] > T(0) ? x.value()[i] : T(0);
  return detail::make_op<T>(std::move(out), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      if (p.value[i] > T(0)) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = x.value()[i] > T(0) ? x.value()[i] : slope * x.value()[i];
  return detail::make_op<T>(std::move(out), {x}, [slope](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += (p.value[i] > T(0) ? T(1) : slope) * self.grad[i];
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x.value()[i]);
  return detail::make_op<T>(std::move(out), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += (T(1) - self.value[i] * self.value[i]) * self.grad[i];
  });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::log(x.value()[i]);
  return detail::make_op<T>(std::move(out), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += self.grad[i] / p.value[i];
  });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::abs(x.value()[i]);
  return detail::make_op<T>(std::move(out), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i) {
      const T v = p.value[i];
      if (v > T(0))
        p.grad[i] += self.grad[i];
      else if (v < T(0))
        p.grad[i] -= self.grad[i];
    }
  });
}

// max(x, floor): the clamp used for the log-mel floor.
template <typename T>
Var<T> clamp_min(const Var<T>& x, T floor) {
  Tensor<T> out(x.shape());
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = x.value()[i] > floor ? x.value()[i] : floor;
  return detail::make_op<T>(std::move(out), {x}, [floor](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i)
      if (p.value[i] > floor) p.grad[i] += self.grad[i];
  });
}

// Cuts the graph: value is shared, gradient stops here.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return Var<T>::constant(x.value());
}

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<size_t> shape) {
  if (Tensor<T>::count(shape) != x.numel())
    throw DataError(strf("reshape: ", shape_str(x.value()), " to ",
                         Tensor<T>::shape_str(shape), " changes element count"));
  Tensor<T> out = Tensor<T>::from(std::move(shape), x.value().vec());
  return detail::make_op<T>(std::move(out), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (size_t i = 0; i < x.numel(); ++i) s += x.value()[i];
  return detail::make_op<T>(Tensor<T>::scalar(s), {x}, [](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const T g = self.grad[0];
    for (size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const size_t n = x.numel();
  T s = 0;
  for (size_t i = 0; i < n; ++i) s += x.value()[i];
  s /= static_cast<T>(n);
  return detail::make_op<T>(Tensor<T>::scalar(s), {x}, [n](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const T g = self.grad[0] / static_cast<T>(n);
    for (size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  });
}

// Mean absolute difference; the L1 used by the wave/mel/feature losses.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mean_abs_diff");
  return mean(abs(sub(a, b)));
}

// Mean squared difference; the L2 used by the codebook/commitment losses.
template <typename T>
Var<T> mean_sq_diff(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mean_sq_diff");
  Var<T> d = sub(a, b);
  return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    throw DataError(strf("matmul: incompatible shapes ", shape_str(a.value()),
                         " and ", shape_str(b.value())));
  const size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor<T> out({m, n});
  const T* A = a.value().data();
  const T* B = b.value().data();
  T* C = out.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T* brow = B + p * n;
      T* crow = C + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  return detail::make_op<T>(
      std::move(out), {a, b}, [m, k, n](AgNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* G = self.grad.data();
        if (pa.requires_grad) {
          pa.ensure_grad();
          const T* B = pb.value.data();
          for (size_t i = 0; i < m; ++i)
            for (size_t p = 0; p < k; ++p) {
              T acc = 0;
              const T* grow = G + i * n;
              const T* brow = B + p * n;
              for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              pa.grad[i * k + p] += acc;
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          const T* A = pa.value.data();
          for (size_t i = 0; i < m; ++i)
            for (size_t p = 0; p < k; ++p) {
              const T av = A[i * k + p];
              const T* grow = G + i * n;
              T* brow = pb.grad.data() + p * n;
              for (size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
        }
      });
}

// x:(N,in) w:(out,in) b:(out) -> (N,out)
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2 ||
      x.shape()[1] != w.shape()[1] || b.shape() != std::vector<size_t>{w.shape()[0]})
    throw DataError(strf("linear: incompatible shapes x=", shape_str(x.value()),
                         " w=", shape_str(w.value()), " b=", shape_str(b.value())));
  const size_t n = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[0];
  Tensor<T> out({n, out_dim});
  for (size_t i = 0; i < n; ++i)
    for (size_t o = 0; o < out_dim; ++o) {
      T acc = b.value()[o];
      const T* xrow = x.value().data() + i * in;
      const T* wrow = w.value().data() + o * in;
      for (size_t p = 0; p < in; ++p) acc += xrow[p] * wrow[p];
      out.at(i, o) = acc;
    }
  return detail::make_op<T>(
      std::move(out), {x, w, b}, [n, in, out_dim](AgNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* G = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          for (size_t i = 0; i < n; ++i)
            for (size_t o = 0; o < out_dim; ++o) {
              const T g = G[i * out_dim + o];
              const T* wrow = pw.value.data() + o * in;
              T* xg = px.grad.data() + i * in;
              for (size_t p = 0; p < in; ++p) xg[p] += g * wrow[p];
            }
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          for (size_t i = 0; i < n; ++i)
            for (size_t o = 0; o < out_dim; ++o) {
              const T g = G[i * out_dim + o];
              const T* xrow = px.value.data() + i * in;
              T* wg = pw.grad.data() + o * in;
              for (size_t p = 0; p < in; ++p) wg[p] += g * xrow[p];
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (size_t i = 0; i < n; ++i)
            for (size_t o = 0; o < out_dim; ++o)
              pb.grad[o] += G[i * out_dim + o];
        }
      });
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy
// ---------------------------------------------------------------------------

// Row softmax over the last dim of a (N,K) tensor.
template <typename T>
Var<T> softmax(const Var<T>& x) {
  if (x.shape().size() != 2)
    throw DataError(strf("softmax: want rank-2 input, got ",
                         shape_str(x.value())));
  const size_t n = x.shape()[0], k = x.shape()[1];
  Tensor<T> out({n, k});
  for (size_t i = 0; i < n; ++i) {
    const T* row = x.value().data() + i * k;
    T mx = row[0];
    for (size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T z = 0;
    for (size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (size_t j = 0; j < k; ++j) out.at(i, j) = std::exp(row[j] - mx) / z;
  }
  return detail::make_op<T>(std::move(out), {x}, [n, k](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < n; ++i) {
      const T* prow = self.value.data() + i * k;
      const T* grow = self.grad.data() + i * k;
      T dot = 0;
      for (size_t j = 0; j < k; ++j) dot += prow[j] * grow[j];
      for (size_t j = 0; j < k; ++j)
        p.grad[i * k + j] += prow[j] * (grow[j] - dot);
    }
  });
}

// Mean negative log-likelihood of integer labels under softmax(logits).
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2 || logits.shape()[0] != labels.size())
    throw DataError(strf("cross_entropy: logits ", shape_str(logits.value()),
                         " vs ", labels.size(), " labels"));
  const size_t n = logits.shape()[0], k = logits.shape()[1];
  Tensor<T> probs({n, k});
  T loss = 0;
  for (size_t i = 0; i < n; ++i) {
    const T* row = logits.value().data() + i * k;
    T mx = row[0];
    for (size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T z = 0;
    for (size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const T logz = std::log(z) + mx;
    for (size_t j = 0; j < k; ++j) probs.at(i, j) = std::exp(row[j] - logz);
    const int y = labels[i];
    if (y < 0 || static_cast<size_t>(y) >= k)
      throw DataError(strf("cross_entropy: label ", y, " out of range [0,", k, ")"));
    loss += logz - row[y];
  }
  loss /= static_cast<T>(n);
  return detail::make_op<T>(
      Tensor<T>::scalar(loss), {logits},
      [n, k, probs = std::move(probs), labels](AgNode<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        const T g = self.grad[0] / static_cast<T>(n);
        for (size_t i = 0; i < n; ++i) {
          for (size_t j = 0; j < k; ++j)
            p.grad[i * k + j] += g * probs.at(i, j);
          p.grad[i * k + labels[i]] -= g;
        }
      });
}

// Row lookup into a codebook: codes (N,T) selecting rows of cb (K,D),
// emitted as latents (N,D,T). Gradient scatter-adds into the codebook.
template <typename T>
Var<T> embed_codes(const Var<T>& cb, const Tensor<int>& codes) {
  if (cb.shape().size() != 2 || codes.rank() != 2)
    throw DataError("embed_codes: codebook must be (K,D) and codes (N,T)");
  const size_t K = cb.shape()[0], D = cb.shape()[1];
  const size_t N = codes.dim(0), L = codes.dim(1);
  Tensor<T> out({N, D, L});
  for (size_t n = 0; n < N; ++n)
    for (size_t t = 0; t < L; ++t) {
      const int c = codes.at(n, t);
      if (c < 0 || static_cast<size_t>(c) >= K)
        throw DataError(strf("embed_codes: code ", c, " out of range [0,", K, ")"));
      for (size_t d = 0; d < D; ++d)
        out.at(n, d, t) = cb.value().at(c, d);
    }
  return detail::make_op<T>(
      std::move(out), {cb}, [N, D, L, codes](AgNode<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t n = 0; n < N; ++n)
          for (size_t t = 0; t < L; ++t) {
            const int c = codes.at(n, t);
            for (size_t d = 0; d < D; ++d)
              p.grad[c * D + d] += self.grad[(n * D + d) * L + t];
          }
      });
}

}  // namespace conchshell

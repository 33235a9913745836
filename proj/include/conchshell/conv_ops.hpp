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

#include <algorithm>
#include <cstdint>

#include "conchshell/autograd.hpp"

namespace conchshell {

namespace detail {

// Valid output range [lo_min, lo_max] so that lo*stride + off lands in
// [0, limit). Empty range is signaled by lo_min > lo_max.
inline void conv_bounds(int64_t off, int64_t stride, int64_t limit,
                        int64_t out_len, int64_t* lo_min, int64_t* lo_max) {
  *lo_min = off >= 0 ? 0 : (-off + stride - 1) / stride;
  *lo_max = limit - 1 - off < 0 ? -1
                                : std::min(out_len - 1, (limit - 1 - off) / stride);
}

}  // namespace detail

// 1-D convolution. x:(N,Ci,L) w:(Co,Ci,K) b:(Co) -> (N,Co,Lo) with
// Lo = (L + pad_l + pad_r - K)/stride + 1. Asymmetric padding keeps
// even kernels (the generator's kernel-40 blocks) length-preserving.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              int64_t stride, int64_t pad_l, int64_t pad_r) {
  if (x.shape().size() != 3 || w.shape().size() != 3 ||
      x.shape()[1] != w.shape()[1] || b.shape() != std::vector<size_t>{w.shape()[0]})
    throw DataError(strf("conv1d: incompatible shapes x=", shape_str(x.value()),
                         " w=", shape_str(w.value())));
  const int64_t N = x.shape()[0], Ci = x.shape()[1], L = x.shape()[2];
  const int64_t Co = w.shape()[0], K = w.shape()[2];
  const int64_t Lo = (L + pad_l + pad_r - K) / stride + 1;
  if (Lo < 1)
    throw DataError(strf("conv1d: input length ", L, " too short for kernel ",
                         K, " stride ", stride));
  Tensor<T> out({(size_t)N, (size_t)Co, (size_t)Lo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Co; ++co) {
      T* yrow = out.data() + (n * Co + co) * Lo;
      const T bv = b.value()[co];
      for (int64_t lo = 0; lo < Lo; ++lo) yrow[lo] = bv;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const T* xrow = x.value().data() + (n * Ci + ci) * L;
        const T* wrow = w.value().data() + (co * Ci + ci) * K;
        for (int64_t k = 0; k < K; ++k) {
          const T wv = wrow[k];
          const int64_t off = k - pad_l;
          int64_t lo0, lo1;
          detail::conv_bounds(off, stride, L, Lo, &lo0, &lo1);
          for (int64_t lo = lo0; lo <= lo1; ++lo)
            yrow[lo] += wv * xrow[lo * stride + off];
        }
      }
    }
  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [N, Ci, L, Co, K, Lo, stride, pad_l](AgNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* G = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* grow = G + (n * Co + co) * Lo;
              for (int64_t ci = 0; ci < Ci; ++ci) {
                T* xg = px.grad.data() + (n * Ci + ci) * L;
                const T* wrow = pw.value.data() + (co * Ci + ci) * K;
                for (int64_t k = 0; k < K; ++k) {
                  const T wv = wrow[k];
                  const int64_t off = k - pad_l;
                  int64_t lo0, lo1;
                  detail::conv_bounds(off, stride, L, Lo, &lo0, &lo1);
                  for (int64_t lo = lo0; lo <= lo1; ++lo)
                    xg[lo * stride + off] += wv * grow[lo];
                }
              }
            }
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* grow = G + (n * Co + co) * Lo;
              for (int64_t ci = 0; ci < Ci; ++ci) {
                const T* xrow = px.value.data() + (n * Ci + ci) * L;
                T* wg = pw.grad.data() + (co * Ci + ci) * K;
                for (int64_t k = 0; k < K; ++k) {
                  const int64_t off = k - pad_l;
                  int64_t lo0, lo1;
                  detail::conv_bounds(off, stride, L, Lo, &lo0, &lo1);
                  T acc = 0;
                  for (int64_t lo = lo0; lo <= lo1; ++lo)
                    acc += xrow[lo * stride + off] * grow[lo];
                  wg[k] += acc;
                }
              }
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* grow = G + (n * Co + co) * Lo;
              T acc = 0;
              for (int64_t lo = 0; lo < Lo; ++lo) acc += grow[lo];
              pb.grad[co] += acc;
            }
        }
      });
}

// Transposed 1-D convolution. x:(N,Ci,L) w:(Ci,Co,K) b:(Co) -> (N,Co,Lo)
// with Lo = (L-1)*stride + K - 2*pad. With K = 2*stride, pad = stride/2 it
// upsamples exactly by the stride factor.
template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                        int64_t stride, int64_t pad) {
  if (x.shape().size() != 3 || w.shape().size() != 3 ||
      x.shape()[1] != w.shape()[0] || b.shape() != std::vector<size_t>{w.shape()[1]})
    throw DataError(strf("conv_transpose1d: incompatible shapes x=",
                         shape_str(x.value()), " w=", shape_str(w.value())));
  const int64_t N = x.shape()[0], Ci = x.shape()[1], L = x.shape()[2];
  const int64_t Co = w.shape()[1], K = w.shape()[2];
  const int64_t Lo = (L - 1) * stride + K - 2 * pad;
  if (Lo < 1) throw DataError("conv_transpose1d: empty output");
  Tensor<T> out({(size_t)N, (size_t)Co, (size_t)Lo});
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Co; ++co) {
      T* yrow = out.data() + (n * Co + co) * Lo;
      const T bv = b.value()[co];
      for (int64_t lo = 0; lo < Lo; ++lo) yrow[lo] = bv;
    }
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const T* xrow = x.value().data() + (n * Ci + ci) * L;
      for (int64_t co = 0; co < Co; ++co) {
        T* yrow = out.data() + (n * Co + co) * Lo;
        const T* wrow = w.value().data() + (ci * Co + co) * K;
        for (int64_t k = 0; k < K; ++k) {
          const T wv = wrow[k];
          const int64_t off = k - pad;
          int64_t li0, li1;
          detail::conv_bounds(off, stride, Lo, L, &li0, &li1);
          for (int64_t li = li0; li <= li1; ++li)
            yrow[li * stride + off] += wv * xrow[li];
        }
      }
    }
  }
  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [N, Ci, L, Co, K, Lo, stride, pad](AgNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* G = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t ci = 0; ci < Ci; ++ci) {
              T* xg = px.grad.data() + (n * Ci + ci) * L;
              for (int64_t co = 0; co < Co; ++co) {
                const T* grow = G + (n * Co + co) * Lo;
                const T* wrow = pw.value.data() + (ci * Co + co) * K;
                for (int64_t k = 0; k < K; ++k) {
                  const T wv = wrow[k];
                  const int64_t off = k - pad;
                  int64_t li0, li1;
                  detail::conv_bounds(off, stride, Lo, L, &li0, &li1);
                  for (int64_t li = li0; li <= li1; ++li)
                    xg[li] += wv * grow[li * stride + off];
                }
              }
            }
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t ci = 0; ci < Ci; ++ci) {
              const T* xrow = px.value.data() + (n * Ci + ci) * L;
              for (int64_t co = 0; co < Co; ++co) {
                const T* grow = G + (n * Co + co) * Lo;
                T* wg = pw.grad.data() + (ci * Co + co) * K;
                for (int64_t k = 0; k < K; ++k) {
                  const int64_t off = k - pad;
                  int64_t li0, li1;
                  detail::conv_bounds(off, stride, Lo, L, &li0, &li1);
                  T acc = 0;
                  for (int64_t li = li0; li <= li1; ++li)
                    acc += xrow[li] * grow[li * stride + off];
                  wg[k] += acc;
                }
              }
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* grow = G + (n * Co + co) * Lo;
              T acc = 0;
              for (int64_t lo = 0; lo < Lo; ++lo) acc += grow[lo];
              pb.grad[co] += acc;
            }
        }
      });
}

// 2-D convolution, square kernel semantics with shared stride/pad per axis.
// x:(N,Ci,H,W) w:(Co,Ci,Kh,Kw) b:(Co).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              int64_t stride, int64_t pad) {
  if (x.shape().size() != 4 || w.shape().size() != 4 ||
      x.shape()[1] != w.shape()[1] || b.shape() != std::vector<size_t>{w.shape()[0]})
    throw DataError(strf("conv2d: incompatible shapes x=", shape_str(x.value()),
                         " w=", shape_str(w.value())));
  const int64_t N = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2],
                W = x.shape()[3];
  const int64_t Co = w.shape()[0], Kh = w.shape()[2], Kw = w.shape()[3];
  const int64_t Ho = (H + 2 * pad - Kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - Kw) / stride + 1;
  if (Ho < 1 || Wo < 1) throw DataError("conv2d: empty output");
  Tensor<T> out({(size_t)N, (size_t)Co, (size_t)Ho, (size_t)Wo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Co; ++co) {
      T* yimg = out.data() + (n * Co + co) * Ho * Wo;
      const T bv = b.value()[co];
      for (int64_t i = 0; i < Ho * Wo; ++i) yimg[i] = bv;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const T* ximg = x.value().data() + (n * Ci + ci) * H * W;
        const T* wmat = w.value().data() + (co * Ci + ci) * Kh * Kw;
        for (int64_t kh = 0; kh < Kh; ++kh)
          for (int64_t kw = 0; kw < Kw; ++kw) {
            const T wv = wmat[kh * Kw + kw];
            const int64_t offh = kh - pad, offw = kw - pad;
            int64_t ho0, ho1, wo0, wo1;
            detail::conv_bounds(offh, stride, H, Ho, &ho0, &ho1);
            detail::conv_bounds(offw, stride, W, Wo, &wo0, &wo1);
            for (int64_t ho = ho0; ho <= ho1; ++ho) {
              const T* xrow = ximg + (ho * stride + offh) * W + offw;
              T* yrow = yimg + ho * Wo;
              for (int64_t wo = wo0; wo <= wo1; ++wo)
                yrow[wo] += wv * xrow[wo * stride];
            }
          }
      }
    }
  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [N, Ci, H, W, Co, Kh, Kw, Ho, Wo, stride, pad](AgNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* G = self.grad.data();
        if (px.requires_grad) {
          px.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* gimg = G + (n * Co + co) * Ho * Wo;
              for (int64_t ci = 0; ci < Ci; ++ci) {
                T* xg = px.grad.data() + (n * Ci + ci) * H * W;
                const T* wmat = pw.value.data() + (co * Ci + ci) * Kh * Kw;
                for (int64_t kh = 0; kh < Kh; ++kh)
                  for (int64_t kw = 0; kw < Kw; ++kw) {
                    const T wv = wmat[kh * Kw + kw];
                    const int64_t offh = kh - pad, offw = kw - pad;
                    int64_t ho0, ho1, wo0, wo1;
                    detail::conv_bounds(offh, stride, H, Ho, &ho0, &ho1);
                    detail::conv_bounds(offw, stride, W, Wo, &wo0, &wo1);
                    for (int64_t ho = ho0; ho <= ho1; ++ho) {
                      T* xrow = xg + (ho * stride + offh) * W + offw;
                      const T* grow = gimg + ho * Wo;
                      for (int64_t wo = wo0; wo <= wo1; ++wo)
                        xrow[wo * stride] += wv * grow[wo];
                    }
                  }
              }
            }
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* gimg = G + (n * Co + co) * Ho * Wo;
              for (int64_t ci = 0; ci < Ci; ++ci) {
                const T* ximg = px.value.data() + (n * Ci + ci) * H * W;
                T* wg = pw.grad.data() + (co * Ci + ci) * Kh * Kw;
                for (int64_t kh = 0; kh < Kh; ++kh)
                  for (int64_t kw = 0; kw < Kw; ++kw) {
                    const int64_t offh = kh - pad, offw = kw - pad;
                    int64_t ho0, ho1, wo0, wo1;
                    detail::conv_bounds(offh, stride, H, Ho, &ho0, &ho1);
                    detail::conv_bounds(offw, stride, W, Wo, &wo0, &wo1);
                    T acc = 0;
                    for (int64_t ho = ho0; ho <= ho1; ++ho) {
                      const T* xrow = ximg + (ho * stride + offh) * W + offw;
                      const T* grow = gimg + ho * Wo;
                      for (int64_t wo = wo0; wo <= wo1; ++wo)
                        acc += xrow[wo * stride] * grow[wo];
                    }
                    wg[kh * Kw + kw] += acc;
                  }
              }
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Co; ++co) {
              const T* gimg = G + (n * Co + co) * Ho * Wo;
              T acc = 0;
              for (int64_t i = 0; i < Ho * Wo; ++i) acc += gimg[i];
              pb.grad[co] += acc;
            }
        }
      });
}

// 3-D convolution. x:(N,Ci,D,H,W) w:(Co,Ci,Kd,Kh,Kw) b:(Co); independent
// stride/pad per axis so the spatio-temporal encoder can stride space only.
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int64_t sd,
              int64_t sh, int64_t sw, int64_t pd, int64_t ph, int64_t pw_) {
  if (x.shape().size() != 5 || w.shape().size() != 5 ||
      x.shape()[1] != w.shape()[1] || b.shape() != std::vector<size_t>{w.shape()[0]})
    throw DataError(strf("conv3d: incompatible shapes x=", shape_str(x.value()),
                         " w=", shape_str(w.value())));
  const int64_t N = x.shape()[0], Ci = x.shape()[1], D = x.shape()[2],
                H = x.shape()[3], W = x.shape()[4];
  const int64_t Co = w.shape()[0], Kd = w.shape()[2], Kh = w.shape()[3],
                Kw = w.shape()[4];
  const int64_t Do = (D + 2 * pd - Kd) / sd + 1;
  const int64_t Ho = (H + 2 * ph - Kh) / sh + 1;
  const int64_t Wo = (W + 2 * pw_ - Kw) / sw + 1;
  if (Do < 1 || Ho < 1 || Wo < 1) throw DataError("conv3d: empty output");
  Tensor<T> out({(size_t)N, (size_t)Co, (size_t)Do, (size_t)Ho, (size_t)Wo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Co; ++co) {
      T* yvol = out.data() + (n * Co + co) * Do * Ho * Wo;
      const T bv = b.value()[co];
      for (int64_t i = 0; i < Do * Ho * Wo; ++i) yvol[i] = bv;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const T* xvol = x.value().data() + (n * Ci + ci) * D * H * W;
        const T* wvol = w.value().data() + (co * Ci + ci) * Kd * Kh * Kw;
        for (int64_t kd = 0; kd < Kd; ++kd)
          for (int64_t kh = 0; kh < Kh; ++kh)
            for (int64_t kw = 0; kw < Kw; ++kw) {
              const T wv = wvol[(kd * Kh + kh) * Kw + kw];
              const int64_t od = kd - pd, oh = kh - ph, ow = kw - pw_;
              int64_t d0, d1, h0, h1, w0, w1;
              detail::conv_bounds(od, sd, D, Do, &d0, &d1);
              detail::conv_bounds(oh, sh, H, Ho, &h0, &h1);
              detail::conv_bounds(ow, sw, W, Wo, &w0, &w1);
              for (int64_t do_ = d0; do_ <= d1; ++do_)
                for (int64_t ho = h0; ho <= h1; ++ho) {
                  const T* xrow =
                      xvol + ((do_ * sd + od) * H + ho * sh + oh) * W + ow;
                  T* yrow = yvol + (do_ * Ho + ho) * Wo;
                  for (int64_t wo = w0; wo <= w1; ++wo)
                    yrow[wo] += wv * xrow[wo * sw];
                }
            }
      }
    }
  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [N, Ci, D, H, W, Co, Kd, Kh, Kw, Do, Ho, Wo, sd, sh, sw, pd, ph,
       pw_](AgNode<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* G = self.grad.data();
        const int64_t ovol = Do * Ho * Wo;
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        for (int64_t n = 0; n < N; ++n)
          for (int64_t co = 0; co < Co; ++co) {
            const T* gvol = G + (n * Co + co) * ovol;
            for (int64_t ci = 0; ci < Ci; ++ci) {
              const T* xvol = px.value.data() + (n * Ci + ci) * D * H * W;
              T* xgvol =
                  px.requires_grad ? px.grad.data() + (n * Ci + ci) * D * H * W
                                   : nullptr;
              const T* wvol = pw.value.data() + (co * Ci + ci) * Kd * Kh * Kw;
              T* wgvol = pw.requires_grad
                             ? pw.grad.data() + (co * Ci + ci) * Kd * Kh * Kw
                             : nullptr;
              for (int64_t kd = 0; kd < Kd; ++kd)
                for (int64_t kh = 0; kh < Kh; ++kh)
                  for (int64_t kw = 0; kw < Kw; ++kw) {
                    const T wv = wvol[(kd * Kh + kh) * Kw + kw];
                    const int64_t od = kd - pd, oh = kh - ph, ow = kw - pw_;
                    int64_t d0, d1, h0, h1, w0, w1;
                    detail::conv_bounds(od, sd, D, Do, &d0, &d1);
                    detail::conv_bounds(oh, sh, H, Ho, &h0, &h1);
                    detail::conv_bounds(ow, sw, W, Wo, &w0, &w1);
                    T wacc = 0;
                    for (int64_t do_ = d0; do_ <= d1; ++do_)
                      for (int64_t ho = h0; ho <= h1; ++ho) {
                        const int64_t xbase =
                            ((do_ * sd + od) * H + ho * sh + oh) * W + ow;
                        const T* grow = gvol + (do_ * Ho + ho) * Wo;
                        if (xgvol) {
                          T* xgrow = xgvol + xbase;
                          for (int64_t wo = w0; wo <= w1; ++wo)
                            xgrow[wo * sw] += wv * grow[wo];
                        }
                        if (wgvol) {
                          const T* xrow = xvol + xbase;
                          for (int64_t wo = w0; wo <= w1; ++wo)
                            wacc += xrow[wo * sw] * grow[wo];
                        }
                      }
                    if (wgvol) wgvol[(kd * Kh + kh) * Kw + kw] += wacc;
                  }
            }
            if (pb.requires_grad) {
              pb.ensure_grad();
              T acc = 0;
              for (int64_t i = 0; i < ovol; ++i) acc += gvol[i];
              pb.grad[co] += acc;
            }
          }
      });
}

// Non-overlapping average pooling along time; tail shorter than k is dropped.
template <typename T>
Var<T> avg_pool1d(const Var<T>& x, int64_t k) {
  if (x.shape().size() != 3)
    throw DataError("avg_pool1d: want (N,C,L) input");
  const int64_t N = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
  const int64_t Lo = L / k;
  if (Lo < 1)
    throw DataError(strf("avg_pool1d: length ", L, " below pooling footprint ", k));
  Tensor<T> out({(size_t)N, (size_t)C, (size_t)Lo});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xrow = x.value().data() + nc * L;
    T* yrow = out.data() + nc * Lo;
    for (int64_t lo = 0; lo < Lo; ++lo) {
      T acc = 0;
      for (int64_t j = 0; j < k; ++j) acc += xrow[lo * k + j];
      yrow[lo] = acc / static_cast<T>(k);
    }
  }
  return detail::make_op<T>(std::move(out), {x}, [N, C, L, Lo, k](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      T* xg = p.grad.data() + nc * L;
      const T* grow = self.grad.data() + nc * Lo;
      for (int64_t lo = 0; lo < Lo; ++lo) {
        const T g = grow[lo] / static_cast<T>(k);
        for (int64_t j = 0; j < k; ++j) xg[lo * k + j] += g;
      }
    }
  });
}

// k x k average pooling with stride k; odd remainders are dropped (floor).
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, int64_t k) {
  if (x.shape().size() != 4)
    throw DataError("avg_pool2d: want (N,C,H,W) input");
  const int64_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                W = x.shape()[3];
  const int64_t Ho = H / k, Wo = W / k;
  if (Ho < 1 || Wo < 1) throw DataError("avg_pool2d: input below footprint");
  Tensor<T> out({(size_t)N, (size_t)C, (size_t)Ho, (size_t)Wo});
  const T inv = T(1) / static_cast<T>(k * k);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* ximg = x.value().data() + nc * H * W;
    T* yimg = out.data() + nc * Ho * Wo;
    for (int64_t ho = 0; ho < Ho; ++ho)
      for (int64_t wo = 0; wo < Wo; ++wo) {
        T acc = 0;
        for (int64_t i = 0; i < k; ++i)
          for (int64_t j = 0; j < k; ++j)
            acc += ximg[(ho * k + i) * W + wo * k + j];
        yimg[ho * Wo + wo] = acc * inv;
      }
  }
  return detail::make_op<T>(
      std::move(out), {x}, [N, C, H, W, Ho, Wo, k, inv](AgNode<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int64_t nc = 0; nc < N * C; ++nc) {
          T* xg = p.grad.data() + nc * H * W;
          const T* gimg = self.grad.data() + nc * Ho * Wo;
          for (int64_t ho = 0; ho < Ho; ++ho)
            for (int64_t wo = 0; wo < Wo; ++wo) {
              const T g = gimg[ho * Wo + wo] * inv;
              for (int64_t i = 0; i < k; ++i)
                for (int64_t j = 0; j < k; ++j)
                  xg[(ho * k + i) * W + wo * k + j] += g;
            }
        }
      });
}

// Temporal mean: (N,C,L) -> (N,C).
template <typename T>
Var<T> mean_time(const Var<T>& x) {
  if (x.shape().size() != 3) throw DataError("mean_time: want (N,C,L)");
  const int64_t NC = x.shape()[0] * x.shape()[1], L = x.shape()[2];
  Tensor<T> out({x.shape()[0], x.shape()[1]});
  for (int64_t i = 0; i < NC; ++i) {
    const T* row = x.value().data() + i * L;
    T acc = 0;
    for (int64_t j = 0; j < L; ++j) acc += row[j];
    out[i] = acc / static_cast<T>(L);
  }
  return detail::make_op<T>(std::move(out), {x}, [NC, L](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t i = 0; i < NC; ++i) {
      const T g = self.grad[i] / static_cast<T>(L);
      T* row = p.grad.data() + i * L;
      for (int64_t j = 0; j < L; ++j) row[j] += g;
    }
  });
}

// Global spatial mean: (N,C,H,W) -> (N,C).
template <typename T>
Var<T> mean_hw(const Var<T>& x) {
  if (x.shape().size() != 4) throw DataError("mean_hw: want (N,C,H,W)");
  const int64_t N = x.shape()[0], C = x.shape()[1],
                A = x.shape()[2] * x.shape()[3];
  Tensor<T> out({(size_t)N, (size_t)C});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xrow = x.value().data() + nc * A;
    T acc = 0;
    for (int64_t i = 0; i < A; ++i) acc += xrow[i];
    out[nc] = acc / static_cast<T>(A);
  }
  return detail::make_op<T>(std::move(out), {x}, [N, C, A](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T g = self.grad[nc] / static_cast<T>(A);
      T* xg = p.grad.data() + nc * A;
      for (int64_t i = 0; i < A; ++i) xg[i] += g;
    }
  });
}

// Spatial mean keeping the temporal axis: (N,C,D,H,W) -> (N,C,D).
template <typename T>
Var<T> mean_hw3d(const Var<T>& x) {
  if (x.shape().size() != 5) throw DataError("mean_hw3d: want (N,C,D,H,W)");
  const int64_t NCD = x.shape()[0] * x.shape()[1] * x.shape()[2];
  const int64_t A = x.shape()[3] * x.shape()[4];
  Tensor<T> out({x.shape()[0], x.shape()[1], x.shape()[2]});
  for (int64_t i = 0; i < NCD; ++i) {
    const T* xrow = x.value().data() + i * A;
    T acc = 0;
    for (int64_t j = 0; j < A; ++j) acc += xrow[j];
    out[i] = acc / static_cast<T>(A);
  }
  return detail::make_op<T>(std::move(out), {x}, [NCD, A](AgNode<T>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int64_t i = 0; i < NCD; ++i) {
      const T g = self.grad[i] / static_cast<T>(A);
      T* xg = p.grad.data() + i * A;
      for (int64_t j = 0; j < A; ++j) xg[j] += g;
    }
  });
}

// Linear resampling along time, half-pixel convention: source position of
// output m is (m+0.5)*L/M - 0.5, clamped to the valid range.
template <typename T>
Var<T> interp_linear(const Var<T>& x, size_t out_len) {
  if (x.shape().size() != 3) throw DataError("interp_linear: want (N,C,L)");
  const int64_t N = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
  const int64_t M = static_cast<int64_t>(out_len);
  if (M < 1) throw DataError("interp_linear: empty output");
  std::vector<int64_t> i0(M), i1(M);
  std::vector<T> fr(M);
  for (int64_t m = 0; m < M; ++m) {
    double t = (static_cast<double>(m) + 0.5) * static_cast<double>(L) /
                   static_cast<double>(M) -
               0.5;
    t = std::clamp(t, 0.0, static_cast<double>(L - 1));
    i0[m] = static_cast<int64_t>(t);
    i1[m] = std::min(i0[m] + 1, L - 1);
    fr[m] = static_cast<T>(t - static_cast<double>(i0[m]));
  }
  Tensor<T> out({(size_t)N, (size_t)C, (size_t)M});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xrow = x.value().data() + nc * L;
    T* yrow = out.data() + nc * M;
    for (int64_t m = 0; m < M; ++m)
      yrow[m] = (T(1) - fr[m]) * xrow[i0[m]] + fr[m] * xrow[i1[m]];
  }
  return detail::make_op<T>(
      std::move(out), {x},
      [N, C, L, M, i0 = std::move(i0), i1 = std::move(i1),
       fr = std::move(fr)](AgNode<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int64_t nc = 0; nc < N * C; ++nc) {
          T* xg = p.grad.data() + nc * L;
          const T* grow = self.grad.data() + nc * M;
          for (int64_t m = 0; m < M; ++m) {
            xg[i0[m]] += (T(1) - fr[m]) * grow[m];
            xg[i1[m]] += fr[m] * grow[m];
          }
        }
      });
}

}  // namespace conchshell

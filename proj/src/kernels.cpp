// Copyright 2026 The nirv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nirv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nirv {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace kernels {

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& in, const Tensor<T>& weight,
                         const Tensor<T>& bias) {
  check(in.rank() == 2 && weight.rank() == 2, ErrorCode::kShapeMismatch,
        "linear expects rank-2 input and weight");
  const std::size_t batch = in.dim(0), fan_in = in.dim(1), fan_out = weight.dim(0);
  expect_shape(weight.shape, {fan_out, fan_in}, "linear weight");
  expect_shape(bias.shape, {fan_out}, "linear bias");
  Tensor<T> out({batch, fan_out});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = in.ptr() + b * fan_in;
    T* y = out.ptr() + b * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      const T* w = weight.ptr() + o * fan_in;
      T acc = 0;
      for (std::size_t i = 0; i < fan_in; ++i) acc += x[i] * w[i];
      y[o] = acc + bias[o];
    }
  }
  return out;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& in, const Tensor<T>& weight,
                          const Tensor<T>& grad_out, Tensor<T>& grad_weight,
                          Tensor<T>& grad_bias) {
  const std::size_t batch = in.dim(0), fan_in = in.dim(1), fan_out = weight.dim(0);
  expect_shape(grad_out.shape, {batch, fan_out}, "linear grad_out");
  expect_shape(grad_weight.shape, weight.shape, "linear grad_weight");
  expect_shape(grad_bias.shape, {fan_out}, "linear grad_bias");
  Tensor<T> grad_in({batch, fan_in});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = in.ptr() + b * fan_in;
    const T* g = grad_out.ptr() + b * fan_out;
    T* gx = grad_in.ptr() + b * fan_in;
    for (std::size_t o = 0; o < fan_out; ++o) {
      const T go = g[o];
      const T* w = weight.ptr() + o * fan_in;
      T* gw = grad_weight.ptr() + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) {
        gx[i] += go * w[i];
        gw[i] += go * x[i];
      }
      grad_bias[o] += go;
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> sine_forward(const Tensor<T>& x, T omega) {
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::sin(omega * x[i]);
  return out;
}

template <typename T>
Tensor<T> sine_backward(const Tensor<T>& x, T omega, const Tensor<T>& grad_out) {
  expect_shape(grad_out.shape, x.shape, "sine grad_out");
  Tensor<T> grad_in(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    grad_in[i] = omega * std::cos(omega * x[i]) * grad_out[i];
  }
  return grad_in;
}

namespace {

struct ConvDims {
  std::size_t n, c_in, c_out, h, w;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& in, const Tensor<T>& kernel) {
  check(in.rank() == 4 && kernel.rank() == 4, ErrorCode::kShapeMismatch,
        "conv3x3 expects rank-4 input and kernel");
  ConvDims d{in.dim(0), in.dim(1), kernel.dim(0), in.dim(2), in.dim(3)};
  check(d.h >= 1 && d.w >= 1, ErrorCode::kShapeMismatch, "conv3x3 on empty plane");
  expect_shape(kernel.shape, {d.c_out, d.c_in, 3, 3}, "conv3x3 kernel");
  return d;
}

// Output rows/cols [lo, hi) for which the tap offset stays inside the plane.
inline void tap_range(std::size_t extent, int offset, std::size_t& lo, std::size_t& hi) {
  lo = offset < 0 ? 1 : 0;
  hi = offset > 0 ? extent - 1 : extent;
  if (extent == 1 && offset != 0) hi = lo;  // no valid positions
}

}  // namespace

template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const Tensor<T>& kernel,
                          const Tensor<T>& bias) {
  const ConvDims d = conv_dims(in, kernel);
  expect_shape(bias.shape, {d.c_out}, "conv3x3 bias");
  const std::size_t plane = d.h * d.w;
  Tensor<T> out({d.n, d.c_out, d.h, d.w});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t co = 0; co < d.c_out; ++co) {
      T* dst = out.ptr() + (n * d.c_out + co) * plane;
      std::fill(dst, dst + plane, bias[co]);
      for (std::size_t ci = 0; ci < d.c_in; ++ci) {
        const T* src = in.ptr() + (n * d.c_in + ci) * plane;
        const T* k = kernel.ptr() + (co * d.c_in + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          std::size_t y0, y1;
          tap_range(d.h, ky - 1, y0, y1);
          for (int kx = 0; kx < 3; ++kx) {
            std::size_t x0, x1;
            tap_range(d.w, kx - 1, x0, x1);
            const T kv = k[ky * 3 + kx];
            for (std::size_t y = y0; y < y1; ++y) {
              T* row = dst + y * d.w;
              const T* srow = src + (y + ky - 1) * d.w + (kx - 1);
              for (std::size_t x = x0; x < x1; ++x) row[x] += kv * srow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& in, const Tensor<T>& kernel,
                           const Tensor<T>& grad_out, Tensor<T>& grad_kernel,
                           Tensor<T>& grad_bias) {
  const ConvDims d = conv_dims(in, kernel);
  expect_shape(grad_out.shape, {d.n, d.c_out, d.h, d.w}, "conv3x3 grad_out");
  expect_shape(grad_kernel.shape, kernel.shape, "conv3x3 grad_kernel");
  expect_shape(grad_bias.shape, {d.c_out}, "conv3x3 grad_bias");
  const std::size_t plane = d.h * d.w;
  Tensor<T> grad_in(in.shape);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t co = 0; co < d.c_out; ++co) {
      const T* g = grad_out.ptr() + (n * d.c_out + co) * plane;
      T bsum = 0;
      for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
      grad_bias[co] += bsum;
      for (std::size_t ci = 0; ci < d.c_in; ++ci) {
        const T* src = in.ptr() + (n * d.c_in + ci) * plane;
        T* gsrc = grad_in.ptr() + (n * d.c_in + ci) * plane;
        const T* k = kernel.ptr() + (co * d.c_in + ci) * 9;
        T* gk = grad_kernel.ptr() + (co * d.c_in + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          std::size_t y0, y1;
          tap_range(d.h, ky - 1, y0, y1);
          for (int kx = 0; kx < 3; ++kx) {
            std::size_t x0, x1;
            tap_range(d.w, kx - 1, x0, x1);
            const T kv = k[ky * 3 + kx];
            T acc = 0;
            for (std::size_t y = y0; y < y1; ++y) {
              const T* grow = g + y * d.w;
              const std::size_t off = (y + ky - 1) * d.w + (kx - 1);
              const T* srow = src + off;
              T* gsrow = gsrc + off;
              for (std::size_t x = x0; x < x1; ++x) {
                acc += grow[x] * srow[x];
                gsrow[x] += kv * grow[x];
              }
            }
            gk[ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& in, int r) {
  check(r >= 1 && in.rank() == 4, ErrorCode::kShapeMismatch, "pixel_shuffle input");
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  check(in.dim(1) % rr == 0, ErrorCode::kShapeMismatch,
        "pixel_shuffle channels not divisible by r^2");
  const std::size_t n = in.dim(0), c = in.dim(1) / rr, h = in.dim(2), w = in.dim(3);
  const std::size_t ow = w * r;
  Tensor<T> out({n, c, h * r, ow});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* dst = out.ptr() + (b * c + ch) * h * r * ow;
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
          const T* src = in.ptr() + ((b * c + ch) * rr + i * r + j) * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            T* drow = dst + (y * r + i) * ow + j;
            for (std::size_t x = 0; x < w; ++x) drow[x * r] = src[y * w + x];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& in, int r) {
  check(r >= 1 && in.rank() == 4, ErrorCode::kShapeMismatch, "pixel_unshuffle input");
  check(in.dim(2) % r == 0 && in.dim(3) % r == 0, ErrorCode::kShapeMismatch,
        "pixel_unshuffle spatial size not divisible by r");
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2) / r, w = in.dim(3) / r;
  const std::size_t iw = w * r;
  Tensor<T> out({n, c * rr, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = in.ptr() + (b * c + ch) * h * r * iw;
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
          T* dst = out.ptr() + ((b * c + ch) * rr + i * r + j) * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            const T* srow = src + (y * r + i) * iw + j;
            for (std::size_t x = 0; x < w; ++x) dst[y * w + x] = srow[x * r];
          }
        }
      }
    }
  }
  return out;
}

#define NIRV_INSTANTIATE_KERNELS(T)                                                   \
  template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&,               \
                                    const Tensor<T>&);                                \
  template Tensor<T> linear_backward(const Tensor<T>&, const Tensor<T>&,              \
                                     const Tensor<T>&, Tensor<T>&, Tensor<T>&);       \
  template Tensor<T> sine_forward(const Tensor<T>&, T);                               \
  template Tensor<T> sine_backward(const Tensor<T>&, T, const Tensor<T>&);            \
  template Tensor<T> conv3x3_forward(const Tensor<T>&, const Tensor<T>&,              \
                                     const Tensor<T>&);                               \
  template Tensor<T> conv3x3_backward(const Tensor<T>&, const Tensor<T>&,             \
                                      const Tensor<T>&, Tensor<T>&, Tensor<T>&);      \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, int);                            \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, int);

NIRV_INSTANTIATE_KERNELS(float)
NIRV_INSTANTIATE_KERNELS(double)

#undef NIRV_INSTANTIATE_KERNELS

}  // namespace kernels
}  // namespace nirv

/*
 * Copyright 2026 The dsvae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <string>

#include "dsvae/error.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae {

enum class LayerKind { conv2d, deconv2d, dense };
enum class Activation { none, relu, leaky_relu };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::deconv2d: return "deconv2d";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "?";
}

/// One row of a network table. `filters` doubles as `units` for dense layers;
/// kernel/stride/padding are ignored for dense layers.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t kernel = 1;
  std::size_t filters = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::none;
  double leaky_slope = 0.2;

  static LayerSpec conv(std::size_t kernel, std::size_t filters, std::size_t stride,
                        std::size_t padding, Activation act) {
    return {LayerKind::conv2d, kernel, filters, stride, padding, act};
  }
  static LayerSpec deconv(std::size_t kernel, std::size_t filters, std::size_t stride,
                          std::size_t padding, Activation act) {
    return {LayerKind::deconv2d, kernel, filters, stride, padding, act};
  }
  static LayerSpec dense(std::size_t units, Activation act) {
    return {LayerKind::dense, 1, units, 1, 0, act};
  }

  void validate() const {
    if (kernel < 1 || stride < 1 || filters < 1) {
      throw ConfigError(to_string(kind) + ": kernel, stride and filters must be >= 1");
    }
    if (activation == Activation::leaky_relu && !(leaky_slope > 0.0 && leaky_slope < 1.0)) {
      throw ConfigError("leaky ReLU slope must lie in (0,1)");
    }
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline std::size_t conv_out_extent(std::size_t in, const LayerSpec& spec) {
  if (in + 2 * spec.padding < spec.kernel) {
    throw ConfigError("conv2d: input extent " + std::to_string(in) + " with padding " +
                      std::to_string(spec.padding) + " smaller than kernel " +
                      std::to_string(spec.kernel));
  }
  return (in + 2 * spec.padding - spec.kernel) / spec.stride + 1;
}

inline std::size_t deconv_out_extent(std::size_t in, const LayerSpec& spec) {
  const std::size_t full = spec.stride * (in - 1) + spec.kernel;
  if (full <= 2 * spec.padding) throw ConfigError("deconv2d: padding consumes whole output");
  return full - 2 * spec.padding;
}

namespace kernels {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Sliding-window geometry between an NHWC image and the grid of window
/// positions. For conv2d the image is the input; for deconv2d it is the output.
struct WindowGeometry {
  std::size_t batch, img_h, img_w, channels, grid_h, grid_w, kernel, stride, padding;

  std::size_t patch() const { return kernel * kernel * channels; }
  std::size_t positions() const { return batch * grid_h * grid_w; }
};

/// cols[(b,gy,gx), (ky,kx,c)] = img[b, gy*s-p+ky, gx*s-p+kx, c] (zero outside).
template <typename T>
void im2col(const T* img, const WindowGeometry& g, T* cols) {
  const std::size_t patch = g.patch();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t gy = 0; gy < g.grid_h; ++gy) {
      for (std::size_t gx = 0; gx < g.grid_w; ++gx) {
        T* dst = cols + ((b * g.grid_h + gy) * g.grid_w + gx) * patch;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          const long iy = static_cast<long>(gy * g.stride + ky) - static_cast<long>(g.padding);
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const long ix = static_cast<long>(gx * g.stride + kx) - static_cast<long>(g.padding);
            T* d = dst + (ky * g.kernel + kx) * g.channels;
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.img_h) ||
                ix >= static_cast<long>(g.img_w)) {
              std::fill(d, d + g.channels, T(0));
            } else {
              const T* s = img + ((b * g.img_h + iy) * g.img_w + ix) * g.channels;
              std::copy(s, s + g.channels, d);
            }
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: accumulates window columns back into the image.
template <typename T>
void col2im_add(const T* cols, const WindowGeometry& g, T* img) {
  const std::size_t patch = g.patch();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t gy = 0; gy < g.grid_h; ++gy) {
      for (std::size_t gx = 0; gx < g.grid_w; ++gx) {
        const T* src = cols + ((b * g.grid_h + gy) * g.grid_w + gx) * patch;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          const long iy = static_cast<long>(gy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.img_h)) continue;
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const long ix = static_cast<long>(gx * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.img_w)) continue;
            const T* s = src + (ky * g.kernel + kx) * g.channels;
            T* d = img + ((b * g.img_h + iy) * g.img_w + ix) * g.channels;
            for (std::size_t c = 0; c < g.channels; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
}

/// Splits an NHWC or HWC shape into (batch, h, w, c).
inline void split_image_shape(const Shape& dims, std::size_t& b, std::size_t& h, std::size_t& w,
                              std::size_t& c, const char* what) {
  if (dims.size() == 3) {
    b = 1;
    h = dims[0];
    w = dims[1];
    c = dims[2];
  } else if (dims.size() == 4) {
    b = dims[0];
    h = dims[1];
    w = dims[2];
    c = dims[3];
  } else {
    throw ConfigError(std::string(what) + ": expected [H,W,C] or [B,H,W,C], got " +
                      shape_string(dims));
  }
}

inline Shape image_shape(const Shape& like, std::size_t b, std::size_t h, std::size_t w,
                         std::size_t c) {
  if (like.size() == 3) return {h, w, c};
  return {b, h, w, c};
}

template <typename T>
void add_bias_rows(T* out, std::size_t rows, const Tensor<T>& bias) {
  const std::size_t m = bias.size();
  for (std::size_t r = 0; r < rows; ++r) {
    T* o = out + r * m;
    for (std::size_t j = 0; j < m; ++j) o[j] += bias[j];
  }
}

template <typename T>
void accumulate_bias_grad(const T* dy, std::size_t rows, std::size_t m, T* db) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* d = dy + r * m;
    for (std::size_t j = 0; j < m; ++j) db[j] += d[j];
  }
}

template <typename T>
WindowGeometry conv_geometry(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                             const Tensor<T>& bias) {
  std::size_t b, h, w, c;
  split_image_shape(input.dims(), b, h, w, c, "conv2d");
  const Shape expect{spec.kernel, spec.kernel, c, spec.filters};
  if (weights.dims() != expect) {
    throw ConfigError("conv2d: weights " + shape_string(weights.dims()) + " do not match expected " +
                      shape_string(expect));
  }
  if (bias.dims() != Shape{spec.filters}) throw ConfigError("conv2d: bias shape mismatch");
  return {b, h, w, c, conv_out_extent(h, spec), conv_out_extent(w, spec), spec.kernel, spec.stride,
          spec.padding};
}

/// Linear part of conv2d. `cols` (optional) receives the im2col buffer for reuse in backward.
template <typename T>
Tensor<T> conv2d_linear(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                        const Tensor<T>& bias, std::vector<T>* cols_out = nullptr) {
  const WindowGeometry g = conv_geometry(input, spec, weights, bias);
  std::vector<T> cols(g.positions() * g.patch());
  im2col(input.data(), g, cols.data());
  Tensor<T> out(image_shape(input.dims(), g.batch, g.grid_h, g.grid_w, spec.filters));
  MatrixMap<T>(out.data(), g.positions(), spec.filters).noalias() =
      ConstMatrixMap<T>(cols.data(), g.positions(), g.patch()) *
      ConstMatrixMap<T>(weights.data(), g.patch(), spec.filters);
  add_bias_rows(out.data(), g.positions(), bias);
  if (cols_out) *cols_out = std::move(cols);
  return out;
}

/// Gradients of conv2d_linear. dx is overwritten, dw and db accumulated.
template <typename T>
void conv2d_linear_backward(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                            const Tensor<T>& bias, const std::vector<T>& cols, const Tensor<T>& dy,
                            Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const WindowGeometry g = conv_geometry(input, spec, weights, bias);
  ConstMatrixMap<T> dy_m(dy.data(), g.positions(), spec.filters);
  if (dw) {
    MatrixMap<T>(dw->data(), g.patch(), spec.filters).noalias() +=
        ConstMatrixMap<T>(cols.data(), g.positions(), g.patch()).transpose() * dy_m;
  }
  if (db) accumulate_bias_grad(dy.data(), g.positions(), spec.filters, db->data());
  if (dx) {
    std::vector<T> dcols(g.positions() * g.patch());
    MatrixMap<T>(dcols.data(), g.positions(), g.patch()).noalias() =
        dy_m * ConstMatrixMap<T>(weights.data(), g.patch(), spec.filters).transpose();
    dx->fill(T(0));
    col2im_add(dcols.data(), g, dx->data());
  }
}

template <typename T>
WindowGeometry deconv_geometry(const Tensor<T>& input, const LayerSpec& spec,
                               const Tensor<T>& weights, const Tensor<T>& bias) {
  std::size_t b, h, w, c;
  split_image_shape(input.dims(), b, h, w, c, "deconv2d");
  const Shape expect{spec.kernel, spec.kernel, spec.filters, c};
  if (weights.dims() != expect) {
    throw ConfigError("deconv2d: weights " + shape_string(weights.dims()) +
                      " do not match expected " + shape_string(expect));
  }
  if (bias.dims() != Shape{spec.filters}) throw ConfigError("deconv2d: bias shape mismatch");
  return {b, deconv_out_extent(h, spec), deconv_out_extent(w, spec), spec.filters, h, w,
          spec.kernel, spec.stride, spec.padding};
}

/// Transposed convolution: the exact adjoint of conv2d_linear (without bias)
/// for a conv mapping the output shape back to the input shape.
template <typename T>
Tensor<T> deconv2d_linear(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                          const Tensor<T>& bias) {
  const WindowGeometry g = deconv_geometry(input, spec, weights, bias);
  const std::size_t in_c = input.dims().back();
  std::vector<T> cols(g.positions() * g.patch());
  MatrixMap<T>(cols.data(), g.positions(), g.patch()).noalias() =
      ConstMatrixMap<T>(input.data(), g.positions(), in_c) *
      ConstMatrixMap<T>(weights.data(), g.patch(), in_c).transpose();
  Tensor<T> out(image_shape(input.dims(), g.batch, g.img_h, g.img_w, spec.filters));
  col2im_add(cols.data(), g, out.data());
  add_bias_rows(out.data(), g.batch * g.img_h * g.img_w, bias);
  return out;
}

template <typename T>
void deconv2d_linear_backward(const Tensor<T>& input, const LayerSpec& spec,
                              const Tensor<T>& weights, const Tensor<T>& bias, const Tensor<T>& dy,
                              Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const WindowGeometry g = deconv_geometry(input, spec, weights, bias);
  const std::size_t in_c = input.dims().back();
  std::vector<T> dcols(g.positions() * g.patch());
  im2col(dy.data(), g, dcols.data());
  ConstMatrixMap<T> dcols_m(dcols.data(), g.positions(), g.patch());
  if (dx) {
    MatrixMap<T>(dx->data(), g.positions(), in_c).noalias() =
        dcols_m * ConstMatrixMap<T>(weights.data(), g.patch(), in_c);
  }
  if (dw) {
    MatrixMap<T>(dw->data(), g.patch(), in_c).noalias() +=
        dcols_m.transpose() * ConstMatrixMap<T>(input.data(), g.positions(), in_c);
  }
  if (db) accumulate_bias_grad(dy.data(), g.batch * g.img_h * g.img_w, spec.filters, db->data());
}

/// y = x W + b over the leading axis: x [n] or [rows, n], W [n, m], b [m].
template <typename T>
Tensor<T> dense_linear(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (weights.rank() != 2) throw ConfigError("dense: weights must be rank 2");
  const std::size_t n = weights.dim(0), m = weights.dim(1);
  const std::size_t rows = input.rank() == 1 ? 1 : input.rows();
  if (input.size() != rows * n) {
    throw ConfigError("dense: input " + shape_string(input.dims()) + " does not match weights " +
                      shape_string(weights.dims()));
  }
  if (bias.dims() != Shape{m}) throw ConfigError("dense: bias shape mismatch");
  Tensor<T> out(input.rank() == 1 ? Shape{m} : Shape{rows, m});
  MatrixMap<T>(out.data(), rows, m).noalias() =
      ConstMatrixMap<T>(input.data(), rows, n) * ConstMatrixMap<T>(weights.data(), n, m);
  add_bias_rows(out.data(), rows, bias);
  return out;
}

template <typename T>
void dense_linear_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& dy,
                           Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const std::size_t n = weights.dim(0), m = weights.dim(1);
  const std::size_t rows = input.size() / n;
  ConstMatrixMap<T> dy_m(dy.data(), rows, m);
  if (dx) {
    MatrixMap<T>(dx->data(), rows, n).noalias() =
        dy_m * ConstMatrixMap<T>(weights.data(), n, m).transpose();
  }
  if (dw) {
    MatrixMap<T>(dw->data(), n, m).noalias() +=
        ConstMatrixMap<T>(input.data(), rows, n).transpose() * dy_m;
  }
  if (db) accumulate_bias_grad(dy.data(), rows, m, db->data());
}

}  // namespace kernels

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky ReLU slope must lie in (0,1)");
  Tensor<T> y = x;
  const T s = static_cast<T>(slope);
  for (auto& v : y.span()) v = v > T(0) ? v : s * v;
  return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.span()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation act, double slope) {
  switch (act) {
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, slope);
    case Activation::none: break;
  }
  return x;
}

/// Cross-correlation with zero padding; input [H,W,Cin] or [B,H,W,Cin],
/// weights [k,k,Cin,Cout], bias [Cout]. Applies spec.activation.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                         const Tensor<T>& bias) {
  spec.validate();
  if (spec.kind != LayerKind::conv2d) throw ConfigError("conv2d_forward given a non-conv spec");
  return activate(kernels::conv2d_linear(input, spec, weights, bias), spec.activation,
                  spec.leaky_slope);
}

/// Transposed convolution, weights [k,k,Cout,Cin]. Output extent s(H-1)+k-2p.
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const LayerSpec& spec, const Tensor<T>& weights,
                           const Tensor<T>& bias) {
  spec.validate();
  if (spec.kind != LayerKind::deconv2d) throw ConfigError("deconv2d_forward given a non-deconv spec");
  return activate(kernels::deconv2d_linear(input, spec, weights, bias), spec.activation,
                  spec.leaky_slope);
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                        Activation act = Activation::none, double slope = 0.2) {
  return activate(kernels::dense_linear(input, weights, bias), act, slope);
}

}  // namespace dsvae

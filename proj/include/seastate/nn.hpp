#pragma once

// Dense kernels for the small convolutional backbones trained in-process.
// Feature maps are channels x (height*width), row-major, one plane per row.

#include <cassert>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace seastate::nn {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  RowMatrix<Scalar> data;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(c, h * w) {}

  static Tensor zeros(int c, int h, int w) {
    Tensor t(c, h, w);
    t.data.setZero();
    return t;
  }
  int pixels() const noexcept { return height * width; }
};

/// 3x3 patches with zero padding 1, stride 1: (channels*9) x (h*w).
template <typename Scalar>
void im2col3x3(const Tensor<Scalar>& in, RowMatrix<Scalar>& cols) {
  const int h = in.height;
  const int w = in.width;
  cols.resize(in.channels * 9, h * w);
  for (int c = 0; c < in.channels; ++c) {
    const Scalar* src = in.data.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          Scalar* out = dst + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, Scalar(0));
            continue;
          }
          const Scalar* row = src + sy * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            out[x] = (sx >= 0 && sx < w) ? row[sx] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: scatters patch gradients back onto the input.
template <typename Scalar>
void col2im3x3(const RowMatrix<Scalar>& cols, Tensor<Scalar>& grad_in) {
  const int h = grad_in.height;
  const int w = grad_in.width;
  grad_in.data.setZero();
  for (int c = 0; c < grad_in.channels; ++c) {
    Scalar* dst = grad_in.data.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          Scalar* row = dst + sy * w;
          const Scalar* in = src + y * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < w) row[sx] += in[x];
          }
        }
      }
    }
  }
}

/// weights: out x (in*9), bias: out. Optional ReLU on the output.
template <typename Scalar, typename W, typename B>
Tensor<Scalar> conv3x3_forward(const Tensor<Scalar>& in, const Eigen::MatrixBase<W>& weights,
                               const Eigen::MatrixBase<B>& bias, bool relu,
                               RowMatrix<Scalar>& cols) {
  im2col3x3(in, cols);
  Tensor<Scalar> out(static_cast<int>(weights.rows()), in.height, in.width);
  out.data.noalias() = weights * cols;
  out.data.colwise() += bias;
  if (relu) out.data = out.data.cwiseMax(Scalar(0));
  return out;
}

/// Non-overlapping average pooling; trailing rows/columns that do not fill a window are dropped.
template <typename Scalar>
Tensor<Scalar> avg_pool(const Tensor<Scalar>& in, int factor) {
  const int oh = in.height / factor;
  const int ow = in.width / factor;
  Tensor<Scalar> out = Tensor<Scalar>::zeros(in.channels, oh, ow);
  const Scalar scale = Scalar(1) / Scalar(factor * factor);
  for (int c = 0; c < in.channels; ++c) {
    const Scalar* src = in.data.row(c).data();
    Scalar* dst = out.data.row(c).data();
    for (int y = 0; y < oh * factor; ++y) {
      Scalar* orow = dst + (y / factor) * ow;
      const Scalar* irow = src + y * in.width;
      for (int x = 0; x < ow * factor; ++x) orow[x / factor] += irow[x];
    }
    out.data.row(c) *= scale;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> avg_pool_backward(const Tensor<Scalar>& grad_out, int factor, int in_height,
                                 int in_width) {
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(grad_out.channels, in_height, in_width);
  const Scalar scale = Scalar(1) / Scalar(factor * factor);
  for (int c = 0; c < grad.channels; ++c) {
    const Scalar* src = grad_out.data.row(c).data();
    Scalar* dst = grad.data.row(c).data();
    for (int y = 0; y < grad_out.height * factor; ++y) {
      const Scalar* orow = src + (y / factor) * grad_out.width;
      Scalar* irow = dst + y * in_width;
      for (int x = 0; x < grad_out.width * factor; ++x) irow[x] = orow[x / factor] * scale;
    }
  }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& in) {
  Tensor<Scalar> out(in.channels, 1, 1);
  out.data = in.data.rowwise().mean();
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad_out, int height, int width) {
  Tensor<Scalar> grad(grad_out.channels, height, width);
  const Scalar scale = Scalar(1) / Scalar(height * width);
  for (int c = 0; c < grad.channels; ++c) grad.data.row(c).setConstant(grad_out.data(c, 0) * scale);
  return grad;
}

/// Divisive normalization across channels at each pixel:
/// y_c = x_c / (eps + mean_k x_k). Intended for non-negative inputs.
template <typename Scalar>
Tensor<Scalar> channel_norm(const Tensor<Scalar>& in, Scalar eps) {
  Tensor<Scalar> out(in.channels, in.height, in.width);
  const auto denom = (in.data.colwise().mean().array() + eps).eval();
  out.data = in.data.array().rowwise() / denom;
  return out;
}

template <typename Scalar>
Tensor<Scalar> channel_norm_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& in,
                                     const Tensor<Scalar>& out, Scalar eps) {
  Tensor<Scalar> grad(in.channels, in.height, in.width);
  const auto denom = (in.data.colwise().mean().array() + eps).eval();
  const auto proj =
      (grad_out.data.cwiseProduct(out.data).colwise().sum().array() / Scalar(in.channels)).eval();
  grad.data = (grad_out.data.array().rowwise() - proj).rowwise() / denom;
  return grad;
}

/// Exact (erf) GELU.
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Scalar> /
                     std::numbers::sqrt2_v<Scalar>;
  return cdf + x * pdf;
}

template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = logits.maxCoeff();
  const Scalar log_sum = std::log((logits.array() - peak).exp().sum()) + peak;
  return (logits.array() - log_sum).matrix().eval();
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax(logits).array().exp().matrix().eval();
}

/// Categorical cross-entropy against a one-hot target; grad is d loss / d logits.
template <typename Derived, typename G>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& logits, int target,
                                       Eigen::MatrixBase<G>& grad) {
  const auto lsm = log_softmax(logits);
  grad = lsm.array().exp().matrix();
  grad(target) -= typename Derived::Scalar(1);
  return -lsm(target);
}

/// Cross-entropy of a probability vector against a one-hot target.
template <typename Derived>
typename Derived::Scalar cross_entropy_from_probabilities(const Eigen::MatrixBase<Derived>& probs,
                                                          int target) {
  return -std::log(probs(target));
}

}  // namespace seastate::nn

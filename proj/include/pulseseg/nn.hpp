#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "pulseseg/rng.hpp"
#include "pulseseg/tensor.hpp"

namespace pulseseg {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Named view of a learnable tensor and its gradient buffer. The order in
// which modules hand these out is fixed, which keeps the optimizer state
// and checkpoints stable.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// --- convolution ------------------------------------------------------

// 3x3-style convolution with stride / dilation / zero padding, lowered to
// a single GEMM per batch via im2col.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int dilation, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), dil_(dilation), pad_(pad) {
    w = Tensor({out_ch, in_ch * ksize * ksize});
    b = Tensor({out_ch});
    gw = Tensor::zeros_like(w);
    gb = Tensor::zeros_like(b);
  }

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / (in_ch_ * k_ * k_));
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
    b.fill(0.0);
  }

  int out_extent(int in) const { return (in + 2 * pad_ - dil_ * (k_ - 1) - 1) / stride_ + 1; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

  Tensor forward(const Tensor& x) {
    const int n = x.dim(0), h = x.dim(2), wdt = x.dim(3);
    if (x.dim(1) != in_ch_)
      throw std::runtime_error("Conv2d: input has " + std::to_string(x.dim(1)) + " channels, layer expects " +
                               std::to_string(in_ch_));
    oh_ = out_extent(h);
    ow_ = out_extent(wdt);
    n_ = n;
    ih_ = h;
    iw_ = wdt;
    im2col(x);
    Tensor out({n, out_ch_, oh_, ow_});
    const std::int64_t cols_n = static_cast<std::int64_t>(n) * oh_ * ow_;
    ConstMatMap wm(w.data(), out_ch_, in_ch_ * k_ * k_);
    ConstMatMap cm(cols_.data(), in_ch_ * k_ * k_, cols_n);
    // output layout (n, oc, oh, ow) != gemm layout (oc, n*oh*ow); go through a scratch
    scratch_ = Tensor({out_ch_, static_cast<int>(cols_n)});
    MatMap om(scratch_.data(), out_ch_, cols_n);
    om.noalias() = wm * cm;
    for (int i = 0; i < n; ++i)
      for (int oc = 0; oc < out_ch_; ++oc) {
        const double bias = b[oc];
        const double* src = scratch_.data() + (static_cast<std::int64_t>(oc) * n + 0) * oh_ * ow_ +
                            static_cast<std::int64_t>(i) * oh_ * ow_;
        double* dst = out.slice(i) + static_cast<std::int64_t>(oc) * oh_ * ow_;
        for (int p = 0; p < oh_ * ow_; ++p) dst[p] = src[p] + bias;
      }
    return out;
  }

  // Accumulates gw/gb, returns gradient w.r.t. the input.
  Tensor backward(const Tensor& gout) {
    const std::int64_t cols_n = static_cast<std::int64_t>(n_) * oh_ * ow_;
    // regroup gout into (oc, n*oh*ow)
    Tensor gmat({out_ch_, static_cast<int>(cols_n)});
    for (int i = 0; i < n_; ++i)
      for (int oc = 0; oc < out_ch_; ++oc) {
        const double* src = gout.slice(i) + static_cast<std::int64_t>(oc) * oh_ * ow_;
        double* dst = gmat.data() + static_cast<std::int64_t>(oc) * cols_n + static_cast<std::int64_t>(i) * oh_ * ow_;
        std::copy(src, src + oh_ * ow_, dst);
      }
    ConstMatMap gm(gmat.data(), out_ch_, cols_n);
    ConstMatMap cm(cols_.data(), in_ch_ * k_ * k_, cols_n);
    MatMap gwm(gw.data(), out_ch_, in_ch_ * k_ * k_);
    gwm.noalias() += gm * cm.transpose();
    for (int oc = 0; oc < out_ch_; ++oc) gb[oc] += gm.row(oc).sum();

    Tensor gcols({in_ch_ * k_ * k_, static_cast<int>(cols_n)});
    MatMap gcm(gcols.data(), in_ch_ * k_ * k_, cols_n);
    ConstMatMap wm(w.data(), out_ch_, in_ch_ * k_ * k_);
    gcm.noalias() = wm.transpose() * gm;
    return col2im(gcols);
  }

  std::vector<ParamRef> params(const std::string& prefix) {
    return {{prefix + ".w", &w, &gw}, {prefix + ".b", &b, &gb}};
  }

  Tensor w, b, gw, gb;

 private:
  void im2col(const Tensor& x) {
    const std::int64_t cols_n = static_cast<std::int64_t>(n_) * oh_ * ow_;
    cols_ = Tensor({in_ch_ * k_ * k_, static_cast<int>(cols_n)});
    for (int c = 0; c < in_ch_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          double* row = cols_.data() + static_cast<std::int64_t>((c * k_ + ky) * k_ + kx) * cols_n;
          for (int i = 0; i < n_; ++i) {
            const double* src = x.slice(i) + static_cast<std::int64_t>(c) * ih_ * iw_;
            double* dst = row + static_cast<std::int64_t>(i) * oh_ * ow_;
            for (int oy = 0; oy < oh_; ++oy) {
              const int sy = oy * stride_ - pad_ + ky * dil_;
              if (sy < 0 || sy >= ih_) {
                std::fill(dst + static_cast<std::int64_t>(oy) * ow_, dst + static_cast<std::int64_t>(oy + 1) * ow_, 0.0);
                continue;
              }
              for (int ox = 0; ox < ow_; ++ox) {
                const int sx = ox * stride_ - pad_ + kx * dil_;
                dst[static_cast<std::int64_t>(oy) * ow_ + ox] =
                    (sx >= 0 && sx < iw_) ? src[static_cast<std::int64_t>(sy) * iw_ + sx] : 0.0;
              }
            }
          }
        }
  }

  Tensor col2im(const Tensor& gcols) const {
    Tensor gx({n_, in_ch_, ih_, iw_});
    const std::int64_t cols_n = static_cast<std::int64_t>(n_) * oh_ * ow_;
    for (int c = 0; c < in_ch_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const double* row = gcols.data() + static_cast<std::int64_t>((c * k_ + ky) * k_ + kx) * cols_n;
          for (int i = 0; i < n_; ++i) {
            double* dst = gx.slice(i) + static_cast<std::int64_t>(c) * ih_ * iw_;
            const double* src = row + static_cast<std::int64_t>(i) * oh_ * ow_;
            for (int oy = 0; oy < oh_; ++oy) {
              const int sy = oy * stride_ - pad_ + ky * dil_;
              if (sy < 0 || sy >= ih_) continue;
              for (int ox = 0; ox < ow_; ++ox) {
                const int sx = ox * stride_ - pad_ + kx * dil_;
                if (sx >= 0 && sx < iw_) dst[static_cast<std::int64_t>(sy) * iw_ + sx] += src[static_cast<std::int64_t>(oy) * ow_ + ox];
              }
            }
          }
        }
    return gx;
  }

  int in_ch_ = 0, out_ch_ = 0, k_ = 3, stride_ = 1, dil_ = 1, pad_ = 1;
  int n_ = 0, ih_ = 0, iw_ = 0, oh_ = 0, ow_ = 0;
  Tensor cols_, scratch_;
};

// --- batch normalization ----------------------------------------------

// Per-channel batch statistics in training mode, frozen running stats in
// eval mode so inference is a pure function of (input, params).
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels) : ch_(channels) {
    gamma = Tensor({channels}, 1.0);
    beta = Tensor({channels}, 0.0);
    ggamma = Tensor::zeros_like(gamma);
    gbeta = Tensor::zeros_like(beta);
    running_mean = Tensor({channels}, 0.0);
    running_var = Tensor({channels}, 1.0);
  }

  Tensor forward(const Tensor& x, bool training) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::int64_t m = static_cast<std::int64_t>(n) * h * w;
    Tensor out({n, ch_, h, w});
    if (training) {
      mean_ = Tensor({ch_});
      inv_std_ = Tensor({ch_});
      for (int c = 0; c < ch_; ++c) {
        double mu = 0;
        for (int i = 0; i < n; ++i) {
          const double* p = x.slice(i) + static_cast<std::int64_t>(c) * h * w;
          for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j) mu += p[j];
        }
        mu /= static_cast<double>(m);
        double var = 0;
        for (int i = 0; i < n; ++i) {
          const double* p = x.slice(i) + static_cast<std::int64_t>(c) * h * w;
          for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j) var += (p[j] - mu) * (p[j] - mu);
        }
        var /= static_cast<double>(m);
        mean_[c] = mu;
        inv_std_[c] = 1.0 / std::sqrt(var + eps_);
        running_mean[c] = (1 - momentum_) * running_mean[c] + momentum_ * mu;
        running_var[c] = (1 - momentum_) * running_var[c] + momentum_ * var;
      }
      xhat_ = Tensor({n, ch_, h, w});
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < ch_; ++c) {
          const double* p = x.slice(i) + static_cast<std::int64_t>(c) * h * w;
          double* xh = xhat_.slice(i) + static_cast<std::int64_t>(c) * h * w;
          double* o = out.slice(i) + static_cast<std::int64_t>(c) * h * w;
          for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j) {
            xh[j] = (p[j] - mean_[c]) * inv_std_[c];
            o[j] = gamma[c] * xh[j] + beta[c];
          }
        }
      m_ = m;
    } else {
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < ch_; ++c) {
          const double inv = 1.0 / std::sqrt(running_var[c] + eps_);
          const double* p = x.slice(i) + static_cast<std::int64_t>(c) * h * w;
          double* o = out.slice(i) + static_cast<std::int64_t>(c) * h * w;
          for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j)
            o[j] = gamma[c] * (p[j] - running_mean[c]) * inv + beta[c];
        }
    }
    return out;
  }

  // Training-mode backward (batch statistics participate in the graph).
  Tensor backward(const Tensor& gout) {
    const int n = gout.dim(0), h = gout.dim(2), w = gout.dim(3);
    Tensor gx({n, ch_, h, w});
    const double m = static_cast<double>(m_);
    for (int c = 0; c < ch_; ++c) {
      double sum_g = 0, sum_gx = 0;
      for (int i = 0; i < n; ++i) {
        const double* g = gout.slice(i) + static_cast<std::int64_t>(c) * h * w;
        const double* xh = xhat_.slice(i) + static_cast<std::int64_t>(c) * h * w;
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j) {
          sum_g += g[j];
          sum_gx += g[j] * xh[j];
        }
      }
      ggamma[c] += sum_gx;
      gbeta[c] += sum_g;
      const double k = gamma[c] * inv_std_[c] / m;
      for (int i = 0; i < n; ++i) {
        const double* g = gout.slice(i) + static_cast<std::int64_t>(c) * h * w;
        const double* xh = xhat_.slice(i) + static_cast<std::int64_t>(c) * h * w;
        double* o = gx.slice(i) + static_cast<std::int64_t>(c) * h * w;
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(h) * w; ++j)
          o[j] = k * (m * g[j] - sum_g - xh[j] * sum_gx);
      }
    }
    return gx;
  }

  std::vector<ParamRef> params(const std::string& prefix) {
    return {{prefix + ".gamma", &gamma, &ggamma}, {prefix + ".beta", &beta, &gbeta}};
  }
  // running stats are state, not learnable parameters
  std::vector<Tensor*> buffers() { return {&running_mean, &running_var}; }

  Tensor gamma, beta, ggamma, gbeta, running_mean, running_var;

 private:
  int ch_ = 0;
  double eps_ = 1e-5, momentum_ = 0.1;
  Tensor mean_, inv_std_, xhat_;
  std::int64_t m_ = 0;
};

// --- fully connected ---------------------------------------------------

class Linear {
 public:
  Linear() = default;
  Linear(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
    w = Tensor({out_dim, in_dim});
    b = Tensor({out_dim});
    gw = Tensor::zeros_like(w);
    gb = Tensor::zeros_like(b);
  }

  void init_xavier(Rng& rng) {
    const double std = std::sqrt(1.0 / in_);
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
    b.fill(0.0);
  }

  // x: (n, in) -> (n, out)
  Tensor forward(const Tensor& x) {
    x_ = x;
    const int n = x.dim(0);
    Tensor out({n, out_});
    ConstMatMap xm(x.data(), n, in_);
    ConstMatMap wm(w.data(), out_, in_);
    MatMap om(out.data(), n, out_);
    om.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) out.at(i, o) += b[o];
    return out;
  }

  Tensor backward(const Tensor& gout) {
    const int n = gout.dim(0);
    ConstMatMap gm(gout.data(), n, out_);
    ConstMatMap xm(x_.data(), n, in_);
    MatMap gwm(gw.data(), out_, in_);
    gwm.noalias() += gm.transpose() * xm;
    for (int o = 0; o < out_; ++o) gb[o] += gm.col(o).sum();
    Tensor gx({n, in_});
    MatMap gxm(gx.data(), n, in_);
    ConstMatMap wm(w.data(), out_, in_);
    gxm.noalias() = gm * wm;
    return gx;
  }

  std::vector<ParamRef> params(const std::string& prefix) {
    return {{prefix + ".w", &w, &gw}, {prefix + ".b", &b, &gb}};
  }

  Tensor w, b, gw, gb;

 private:
  int in_ = 0, out_ = 0;
};

// --- optimizer ----------------------------------------------------------

// SGD with classical momentum and decoupled-from-nothing weight decay
// (decay added to the raw gradient, as in the usual SGD formulation).
class Sgd {
 public:
  Sgd() = default;
  Sgd(std::vector<ParamRef> params, double momentum, double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& p : params_) velocity_.push_back(Tensor::zeros_like(*p.value));
  }

  void zero_grad() {
    for (auto& p : params_) p.grad->fill(0.0);
  }

  void step(double lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& w = *params_[i].value;
      Tensor& g = *params_[i].grad;
      Tensor& v = velocity_[i];
      for (std::int64_t j = 0; j < w.size(); ++j) {
        v[j] = momentum_ * v[j] + g[j] + weight_decay_ * w[j];
        w[j] -= lr * v[j];
      }
    }
  }

  const std::vector<ParamRef>& params() const { return params_; }
  std::vector<Tensor>& velocity() { return velocity_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Tensor> velocity_;
  double momentum_ = 0.9, weight_decay_ = 0.0;
};

// --- small shared pieces -------------------------------------------------

inline void relu_inplace(Tensor& x) {
  for (std::int64_t i = 0; i < x.size(); ++i)
    if (x[i] < 0) x[i] = 0;
}

// gradient of relu given the cached *output* (out > 0 <=> pre > 0)
inline void relu_backward_inplace(Tensor& g, const Tensor& out) {
  for (std::int64_t i = 0; i < g.size(); ++i)
    if (out[i] <= 0) g[i] = 0;
}

// channel-wise softmax at every pixel: (n, L, h, w)
inline Tensor softmax_channels(const Tensor& logits) {
  const int n = logits.dim(0), L = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  Tensor out({n, L, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const double* src = logits.slice(i);
    double* dst = out.slice(i);
    for (std::int64_t p = 0; p < hw; ++p) {
      double mx = src[p];
      for (int c = 1; c < L; ++c) mx = std::max(mx, src[c * hw + p]);
      double z = 0;
      for (int c = 0; c < L; ++c) {
        double e = std::exp(src[c * hw + p] - mx);
        dst[c * hw + p] = e;
        z += e;
      }
      for (int c = 0; c < L; ++c) dst[c * hw + p] /= z;
    }
  }
  return out;
}

// dL/dlogits from dL/dprobs for a channel softmax
inline Tensor softmax_channels_backward(const Tensor& gprobs, const Tensor& probs) {
  const int n = probs.dim(0), L = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  Tensor glogits({n, L, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const double* p = probs.slice(i);
    const double* g = gprobs.slice(i);
    double* o = glogits.slice(i);
    for (std::int64_t q = 0; q < hw; ++q) {
      double dot = 0;
      for (int c = 0; c < L; ++c) dot += p[c * hw + q] * g[c * hw + q];
      for (int c = 0; c < L; ++c) o[c * hw + q] = p[c * hw + q] * (g[c * hw + q] - dot);
    }
  }
  return glogits;
}

}  // namespace pulseseg

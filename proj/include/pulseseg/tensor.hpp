#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pulseseg {

// Dense row-major tensor of doubles, rank 1..4. Small and explicit on
// purpose: every layer in this library owns its buffers and the shapes
// are known at call sites.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> dims, double fill = 0.0) : dims_(std::move(dims)) {
    for (int d : dims_) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
    }
    v_.assign(count(), fill);
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.dims_); }

  bool empty() const { return v_.empty(); }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
  const std::vector<int>& dims() const { return dims_; }

  std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](std::int64_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return v_[static_cast<size_t>(i)]; }

  // rank-4 (n, c, h, w)
  double& at(int n, int c, int h, int w) { return v_[idx4(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return v_[idx4(n, c, h, w)]; }

  // rank-3 (c, h, w)
  double& at(int c, int h, int w) { return v_[idx3(c, h, w)]; }
  double at(int c, int h, int w) const { return v_[idx3(c, h, w)]; }

  // rank-2 (i, j)
  double& at(int i, int j) { return v_[idx2(i, j)]; }
  double at(int i, int j) const { return v_[idx2(i, j)]; }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  void add_scaled(const Tensor& other, double scale) {
    assert(other.size() == size());
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += scale * other.v_[i];
  }

  double sum() const { return std::accumulate(v_.begin(), v_.end(), 0.0); }

  bool all_finite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  // flat slice view helpers for the leading dimension
  std::int64_t slice_size() const {
    std::int64_t s = 1;
    for (size_t i = 1; i < dims_.size(); ++i) s *= dims_[i];
    return s;
  }
  double* slice(int n) { return v_.data() + static_cast<size_t>(n) * slice_size(); }
  const double* slice(int n) const { return v_.data() + static_cast<size_t>(n) * slice_size(); }

  // Copies slice n of a rank-4 tensor into a rank-3 tensor (c,h,w).
  Tensor slice3(int n) const {
    assert(rank() == 4);
    Tensor out({dims_[1], dims_[2], dims_[3]});
    const double* src = slice(n);
    std::copy(src, src + out.size(), out.data());
    return out;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + ")";
  }

 private:
  std::int64_t count() const {
    std::int64_t n = 1;
    for (int d : dims_) n *= d;
    return n;
  }
  size_t idx4(int n, int c, int h, int w) const {
    assert(rank() == 4);
    assert(n >= 0 && n < dims_[0] && c >= 0 && c < dims_[1]);
    assert(h >= 0 && h < dims_[2] && w >= 0 && w < dims_[3]);
    return static_cast<size_t>(((static_cast<std::int64_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w);
  }
  size_t idx3(int c, int h, int w) const {
    assert(rank() == 3);
    assert(c >= 0 && c < dims_[0] && h >= 0 && h < dims_[1] && w >= 0 && w < dims_[2]);
    return static_cast<size_t>((static_cast<std::int64_t>(c) * dims_[1] + h) * dims_[2] + w);
  }
  size_t idx2(int i, int j) const {
    assert(rank() == 2);
    assert(i >= 0 && i < dims_[0] && j >= 0 && j < dims_[1]);
    return static_cast<size_t>(static_cast<std::int64_t>(i) * dims_[1] + j);
  }

  std::vector<int> dims_;
  std::vector<double> v_;
};

}  // namespace pulseseg

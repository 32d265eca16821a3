#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ezcrop {

using Complex = std::complex<double>;

/// Dense row-major matrix. Rows and columns are both at least one.
template <typename T>
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_shape();
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape();
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_shape() const {
    if (rows_ == 0 || cols_ == 0) {
      throw std::invalid_argument("matrix dimensions must be positive");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

inline bool all_finite(const RealMatrix& m) noexcept {
  for (double v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Convolution weights laid out D x D x S x T (last index fastest), matching
/// the usual (row, col, in, out) kernel convention.
class KernelTensor {
 public:
  KernelTensor() = default;
  KernelTensor(std::size_t size, std::size_t in_channels, std::size_t out_channels,
               double fill = 0.0);
  KernelTensor(std::size_t size, std::size_t in_channels, std::size_t out_channels,
               std::vector<double> data);

  std::size_t size() const noexcept { return size_; }
  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }

  double& at(std::size_t u, std::size_t v, std::size_t i, std::size_t j) noexcept {
    return data_[((u * size_ + v) * in_ + i) * out_ + j];
  }
  double at(std::size_t u, std::size_t v, std::size_t i, std::size_t j) const noexcept {
    return data_[((u * size_ + v) * in_ + i) * out_ + j];
  }

  /// The D x D slice connecting input channel i to output channel j (0-based).
  RealMatrix slice(std::size_t i, std::size_t j) const;

  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const KernelTensor&, const KernelTensor&) = default;

 private:
  std::size_t size_ = 0;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::vector<double> data_;
};

inline KernelTensor::KernelTensor(std::size_t size, std::size_t in_channels,
                                  std::size_t out_channels, double fill)
    : KernelTensor(size, in_channels, out_channels,
                   std::vector<double>(size * size * in_channels * out_channels, fill)) {}

inline KernelTensor::KernelTensor(std::size_t size, std::size_t in_channels,
                                  std::size_t out_channels, std::vector<double> data)
    : size_(size), in_(in_channels), out_(out_channels), data_(std::move(data)) {
  if (size_ == 0 || in_ == 0 || out_ == 0) {
    throw std::invalid_argument("kernel dimensions must be positive");
  }
  if (data_.size() != size_ * size_ * in_ * out_) {
    throw std::invalid_argument("kernel data length does not match D*D*S*T");
  }
}

inline RealMatrix KernelTensor::slice(std::size_t i, std::size_t j) const {
  RealMatrix out(size_, size_);
  for (std::size_t u = 0; u < size_; ++u) {
    for (std::size_t v = 0; v < size_; ++v) out(u, v) = at(u, v, i, j);
  }
  return out;
}

/// Kernel slices embedded on an H x W torus; slice (i, j) is stored at i * T + j.
struct ExpandedKernel {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<RealMatrix> slices;

  const RealMatrix& slice(std::size_t i, std::size_t j) const {
    return slices[i * out_channels + j];
  }
};

}  // namespace ezcrop

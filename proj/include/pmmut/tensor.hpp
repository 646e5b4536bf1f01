// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmmut {

// All runtime failures surface as Error; the CLI maps them to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major tensor of 64-bit floats, rank 1..3.
// Axis convention: (batch, time, feature) for rank 3, (time, feature) for
// rank 2, flat for rank 1. A scalar is a rank-1 tensor of length 1.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 3) {
      throw Error("tensor rank must be 1..3");
    }
    long long n = 1;
    for (int d : shape_) {
      if (d <= 0) throw Error("tensor dims must be positive");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
  }

  static Tensor scalar(double v) {
    Tensor t(std::vector<int>{1});
    t.data_[0] = v;
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double& at(int i, int j) {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  double at(int i, int j) const {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  double& at(int b, int i, int j) {
    return data_[(static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j];
  }
  double at(int b, int i, int j) const {
    return data_[(static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j];
  }

  // Number of rows when the tensor is viewed as a stack of last-axis rows.
  int rows() const { return static_cast<int>(numel()) / last_dim(); }
  int last_dim() const { return shape_.back(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;

  double scalar_value() const {
    if (numel() != 1) throw Error("tensor is not a scalar");
    return data_[0];
  }

  // Bit-exact equality (shape and payload bytes).
  bool bit_equal(const Tensor& o) const {
    return shape_ == o.shape_ && data_.size() == o.data_.size() &&
           (data_.empty() ||
            std::memcmp(data_.data(), o.data_.data(),
                        data_.size() * sizeof(double)) == 0);
  }

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace pmmut

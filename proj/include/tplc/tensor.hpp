#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tplc {

// Dense row-major tensor of rank 1..3. Sequences are (time x channels);
// dense weights (in x out); conv kernels (taps x in x out).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  // Leading dimension, and the product of the remaining ones.
  std::size_t rows() const { return dims_.empty() ? 0 : dims_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool all_finite() const;
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

}  // namespace tplc

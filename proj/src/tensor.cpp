#include "tplc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tplc/errors.hpp"

namespace tplc {
namespace {

std::size_t element_count(const std::vector<std::size_t>& dims) {
  if (dims.empty() || dims.size() > 3) throw InvalidArgument("tensor rank must be 1..3");
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (data_.size() != element_count(dims_))
    throw InvalidArgument("tensor data length does not match shape " + shape_string());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

}  // namespace tplc

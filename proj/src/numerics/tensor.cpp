#include "elearn/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace elearn {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                elearn::shape_string(rows_, cols_));
  }
}

Tensor Tensor::column(std::vector<double> v) {
  const auto n = v.size();
  return Tensor(n, 1, std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) throw Error("item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) {
    throw Error("cannot reshape " + shape_string() + " to " + elearn::shape_string(rows, cols));
  }
  rows_ = rows;
  cols_ = cols;
}

std::string Tensor::shape_string() const { return elearn::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
}

}  // namespace elearn

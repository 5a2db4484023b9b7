#include "qedgix/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "qedgix/error.hpp"

namespace qedgix::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t trailing_cols(const Shape& shape) {
  if (shape.empty()) return 1;
  return shape.back();
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill), cols_(trailing_cols(shape_)) {
  for (auto d : shape_) require(d > 0, [&] { return "tensor dimensions must be positive, got " + shape_string(shape_); });
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()), cols_(trailing_cols(shape_)) {
  for (auto d : shape_) require(d > 0, [&] { return "tensor dimensions must be positive, got " + shape_string(shape_); });
  require(values_.size() == shape_size(shape_), [&] { return
          "tensor value count " + std::to_string(values_.size()) + " does not match shape " +
              shape_string(shape_); });
  require(all_finite(), "tensor values must be finite");
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

std::size_t Tensor::rows() const {
  require(rank() == 1 || rank() == 2, [&] { return "rank-2 view requested on " + shape_string(shape_); });
  return rank() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const {
  require(rank() == 1 || rank() == 2, [&] { return "rank-2 view requested on " + shape_string(shape_); });
  return cols_;
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == size(), [&] { return "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape); });
  Tensor out = *this;
  out.shape_ = std::move(shape);
  out.cols_ = trailing_cols(out.shape_);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace qedgix::nn

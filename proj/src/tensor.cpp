#include "dfal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dfal/errors.hpp"

namespace dfal {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || std::find(shape.begin(), shape.end(), 0u) != shape.end())
    throw InvalidInput("tensor shape " + shape_string(shape) + " must have positive dimensions");
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (shape_size(shape_) != values_.size())
    throw InvalidInput("tensor shape " + shape_string(shape_) + " does not hold " +
                       std::to_string(values_.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double norm_l2(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double norm_l1(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += std::abs(x);
  return sum;
}

double norm_linf(std::span<const double> v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::abs(x));
  return best;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace dfal

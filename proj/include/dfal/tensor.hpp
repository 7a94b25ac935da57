#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dfal {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an explicit shape.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape);
  /// Throws InvalidInput when the value count does not match the shape.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

double norm_l2(std::span<const double> v);
double norm_l1(std::span<const double> v);
double norm_linf(std::span<const double> v);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace dfal

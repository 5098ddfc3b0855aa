#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vburst {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles, rank 1 to 3. Scalars are shape {1}.
// Values are immutable once built except through mutable_data(), which the
// optimizer uses on parameter leaves. All arithmetic is 64-bit; 32-bit
// narrowing happens only in the serialized file formats.
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor zeros_like(const Tensor& other) { return zeros(other.shape_); }
  static Tensor scalar(double value);
  static Tensor from_vector(std::initializer_list<double> values);
  static Tensor from_matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }
  std::size_t numel() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }

  // Throws NumericError naming `what` and the first offending index if any
  // entry is NaN or infinite.
  void validate(const std::string& what) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace vburst

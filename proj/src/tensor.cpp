#include "vburst/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vburst/errors.hpp"

namespace vburst {

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t checked_numel(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw ShapeError("tensor rank must be 1..3, got shape " + shape_str(shape));
  }
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be positive, got shape " + shape_str(shape));
    }
    n *= extent;
  }
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = checked_numel(shape_);
  if (n != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " wants " + std::to_string(n) +
                     " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = checked_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = checked_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::from_vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::from_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::at(std::size_t i) const {
  if (rank() != 1) throw ShapeError("1-index access on shape " + shape_str(shape_));
  return data_[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw ShapeError("2-index access on shape " + shape_str(shape_));
  return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  if (rank() != 3) throw ShapeError("3-index access on shape " + shape_str(shape_));
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

void Tensor::validate(const std::string& what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(what + ": non-finite value " + std::to_string(data_[i]) +
                         " at flat index " + std::to_string(i) + " in shape " +
                         shape_str(shape_));
    }
  }
}

}  // namespace vburst

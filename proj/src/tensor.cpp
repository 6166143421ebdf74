#include "srl/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "srl/error.hpp"

namespace srl {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw Error("tensor shape must have at least one axis");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw Error("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  data_.assign(checked_product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_product(shape_) != data_.size()) {
    throw Error("tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_string());
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw Error("from_rows needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error("ragged rows in from_rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) throw Error("item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace srl

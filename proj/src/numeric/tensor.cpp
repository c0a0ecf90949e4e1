#include "cachemt/numeric/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "cachemt/error.hpp"

namespace cachemt::numeric {
namespace {

std::size_t extent_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(extent_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (extent_product(shape_) != data_.size()) {
    throw ContractError("tensor data length does not match shape");
  }
}

Tensor Tensor::from_vector(const Vector& v) {
  return Tensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<double>(m.data(), m.data() + m.size()));
}

std::size_t Tensor::rows() const {
  if (rank() == 0 || rank() > 2) throw ContractError("rows() needs a rank-1 or rank-2 tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() == 0 || rank() > 2) throw ContractError("cols() needs a rank-1 or rank-2 tensor");
  return rank() == 1 ? 1 : shape_[1];
}

MatrixView Tensor::matrix() {
  return MatrixView(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatrixView Tensor::matrix() const {
  return ConstMatrixView(data_.data(), static_cast<Eigen::Index>(rows()),
                         static_cast<Eigen::Index>(cols()));
}

VectorView Tensor::flat() { return VectorView(data_.data(), static_cast<Eigen::Index>(data_.size())); }

ConstVectorView Tensor::flat() const {
  return ConstVectorView(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

bool Tensor::bit_equal(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

}  // namespace cachemt::numeric

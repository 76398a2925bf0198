#pragma once

#include <numeric>
#include <sstream>

#include "hydra/common.hpp"

namespace hydra {

/// Dense n-dimensional array with row-major flat storage.
///
/// Shapes are small (rank <= 4 in practice); data lives in a flat Eigen
/// vector so that layers can map it as matrices without copies.
template <typename Scalar>
class TensorT {
 public:
  using Index = Eigen::Index;

  TensorT() = default;

  explicit TensorT(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(VectorT<Scalar>::Zero(count(shape_))) {
    check_shape(shape_);
  }

  TensorT(std::vector<Index> shape, VectorT<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != count(shape_))
      throw ContractError("Tensor: data length does not match shape product");
  }

  static TensorT zeros(std::vector<Index> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<Index> shape, Scalar v) {
    TensorT t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  /// Rank-1 tensor wrapping a vector (used for metadata and score vectors).
  static TensorT from_vector(VectorT<Scalar> v) {
    const Index n = v.size();
    if (n == 0) return TensorT();
    return TensorT({n}, std::move(v));
  }

  static TensorT from_values(std::vector<Index> shape, std::initializer_list<Scalar> vals) {
    TensorT t(std::move(shape));
    if (static_cast<Index>(vals.size()) != t.size())
      throw ContractError("Tensor::from_values: value count does not match shape");
    Index i = 0;
    for (Scalar v : vals) t.data_[i++] = v;
    return t;
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }

  VectorT<Scalar>& data() { return data_; }
  const VectorT<Scalar>& data() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Element access for rank-3 tensors laid out as (row, col, channel).
  Scalar& at(Index r, Index c, Index ch) { return data_[offset3(r, c, ch)]; }
  Scalar at(Index r, Index c, Index ch) const { return data_[offset3(r, c, ch)]; }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.allFinite(); }

  /// Reinterprets the flat data with a new shape of equal element count.
  TensorT reshaped(std::vector<Index> shape) const {
    if (count(shape) != size()) throw ContractError("Tensor::reshaped: element count mismatch");
    return TensorT(std::move(shape), data_);
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ")";
    return os.str();
  }

  static Index count(const std::vector<Index>& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  }

 private:
  static void check_shape(const std::vector<Index>& shape) {
    for (Index d : shape)
      if (d <= 0) throw ContractError("Tensor: dimensions must be positive");
  }

  Index offset3(Index r, Index c, Index ch) const {
    return (r * shape_[1] + c) * shape_[2] + ch;
  }

  std::vector<Index> shape_;
  VectorT<Scalar> data_;
};

using Tensor = TensorT<Real>;

template <typename Scalar>
TensorT<Scalar> operator+(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (!a.same_shape(b)) throw ContractError("tensor add: shape mismatch");
  return TensorT<Scalar>(a.shape(), a.data() + b.data());
}

template <typename Scalar>
TensorT<Scalar> operator-(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (!a.same_shape(b)) throw ContractError("tensor sub: shape mismatch");
  return TensorT<Scalar>(a.shape(), a.data() - b.data());
}

template <typename Scalar>
TensorT<Scalar> operator*(Scalar s, const TensorT<Scalar>& t) {
  return TensorT<Scalar>(t.shape(), (s * t.data()).eval());
}

/// Channel-wise concatenation of rank-3 tensors with equal spatial dims.
template <typename Scalar>
TensorT<Scalar> concat_channels(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 3 || b.rank() != 3) throw ContractError("concat_channels: rank-3 tensors required");
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
    throw ContractError("concat_channels: spatial dims differ");
  const auto h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
  TensorT<Scalar> out({h, w, ca + cb});
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      for (Eigen::Index k = 0; k < ca; ++k) out.at(r, c, k) = a.at(r, c, k);
      for (Eigen::Index k = 0; k < cb; ++k) out.at(r, c, ca + k) = b.at(r, c, k);
    }
  return out;
}

/// Fills a tensor with He-style normal initialization given a fan-in.
template <typename Scalar>
void he_init(TensorT<Scalar>& t, Eigen::Index fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<Scalar>(stddev * rng.normal());
}

}  // namespace hydra

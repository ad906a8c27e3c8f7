#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace fdz::nn {

// N x C x H x W numeric array with an optional gradient buffer of the same
// shape. Data is contiguous, W fastest.
template <typename Scalar>
class Tensor4 {
 public:
  using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using VecMap = Eigen::Map<Vec>;
  using ConstVecMap = Eigen::Map<const Vec>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, Scalar fill = Scalar(0)) : dims_{n, c, h, w} {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw std::invalid_argument("Tensor4: all dims must be >= 1");
    data_.assign(count(), fill);
  }

  static Tensor4 zeros_like(const Tensor4& t) {
    return Tensor4(t.n(), t.c(), t.h(), t.w());
  }

  int n() const { return dims_[0]; }
  int c() const { return dims_[1]; }
  int h() const { return dims_[2]; }
  int w() const { return dims_[3]; }
  const std::array<int, 4>& dims() const { return dims_; }
  size_t count() const {
    return static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2] * dims_[3];
  }
  bool same_shape(const Tensor4& o) const { return dims_ == o.dims_; }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  Scalar at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  VecMap flat() { return VecMap(data_.data(), static_cast<Eigen::Index>(data_.size())); }
  ConstVecMap flat() const {
    return ConstVecMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  // Gradient buffer management.
  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad() {
    if (grad_.empty()) grad_.assign(count(), Scalar(0));
  }
  void zero_grad() {
    grad_.assign(count(), Scalar(0));
  }
  Scalar* grad_data() { return grad_.data(); }
  const Scalar* grad_data() const { return grad_.data(); }
  VecMap grad_flat() {
    ensure_grad();
    return VecMap(grad_.data(), static_cast<Eigen::Index>(grad_.size()));
  }
  ConstVecMap grad_flat() const {
    return ConstVecMap(grad_.data(), static_cast<Eigen::Index>(grad_.size()));
  }

  bool all_finite() const {
    for (const Scalar& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(n(), c(), h(), w());
    for (size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<Other>(data_[i]);
    return out;
  }

  size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x;
  }

 private:
  std::array<int, 4> dims_{0, 0, 0, 0};
  std::vector<Scalar> data_;
  std::vector<Scalar> grad_;
};

template <typename Scalar>
Tensor4<Scalar> random_uniform(int n, int c, int h, int w, Scalar lo, Scalar hi,
                               std::uint64_t seed) {
  Tensor4<Scalar> t(n, c, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(static_cast<double>(lo), static_cast<double>(hi));
  for (size_t i = 0; i < t.count(); ++i) t.data()[i] = static_cast<Scalar>(d(rng));
  return t;
}

}  // namespace fdz::nn

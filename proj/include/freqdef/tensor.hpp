#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <utility>

#include "freqdef/common.hpp"

namespace freqdef {

using Eigen::Index;

// Dense rank-3 tensor (height x width x channel) over one flat Eigen array,
// row-major with channel fastest: index(h, w, c) = (h*W + w)*C + c.
template <typename Scalar>
class Tensor3 {
 public:
  using ArrayType = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor3() = default;

  Tensor3(Index h, Index w, Index c) : h_(h), w_(w), c_(c) {
    check_dims(h, w, c);
    data_ = ArrayType::Zero(h * w * c);
  }

  Tensor3(Index h, Index w, Index c, ArrayType data)
      : h_(h), w_(w), c_(c), data_(std::move(data)) {
    check_dims(h, w, c);
    if (data_.size() != h * w * c)
      throw ShapeError("tensor data size does not match dimensions");
  }

  static Tensor3 constant(Index h, Index w, Index c, Scalar v) {
    Tensor3 t(h, w, c);
    t.data_.setConstant(v);
    return t;
  }

  Index height() const { return h_; }
  Index width() const { return w_; }
  Index channels() const { return c_; }
  Index size() const { return data_.size(); }

  Index index(Index h, Index w, Index c) const { return (h * w_ + w) * c_ + c; }

  Scalar operator()(Index h, Index w, Index c) const {
    return data_[index(h, w, c)];
  }
  Scalar& operator()(Index h, Index w, Index c) {
    return data_[index(h, w, c)];
  }

  const ArrayType& array() const { return data_; }
  ArrayType& array() { return data_; }

  bool same_shape(const Tensor3& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

 private:
  static void check_dims(Index h, Index w, Index c) {
    if (h <= 0 || w <= 0 || c <= 0)
      throw ShapeError("tensor dimensions must be positive");
  }

  Index h_ = 0, w_ = 0, c_ = 0;
  ArrayType data_;
};

using ImageTensor = Tensor3<double>;
using Spectrum = Tensor3<std::complex<double>>;

// Per-pixel integer class labels, indexed (row, col).
using ClassMap = Eigen::ArrayXXi;

template <typename Scalar>
Tensor3<Scalar> zeros_like(const Tensor3<Scalar>& t) {
  return Tensor3<Scalar>(t.height(), t.width(), t.channels());
}

template <typename Scalar>
void require_same_shape(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b,
                        const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

template <typename Scalar>
Tensor3<Scalar> operator+(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  require_same_shape(a, b, "operator+");
  return {a.height(), a.width(), a.channels(), a.array() + b.array()};
}

template <typename Scalar>
Tensor3<Scalar> operator-(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  require_same_shape(a, b, "operator-");
  return {a.height(), a.width(), a.channels(), a.array() - b.array()};
}

template <typename Scalar>
Tensor3<Scalar> operator*(const Tensor3<Scalar>& a, Scalar s) {
  return {a.height(), a.width(), a.channels(), a.array() * s};
}

template <typename Scalar>
Tensor3<Scalar> operator*(Scalar s, const Tensor3<Scalar>& a) {
  return a * s;
}

inline ImageTensor clip(const ImageTensor& x, double lo, double hi) {
  return {x.height(), x.width(), x.channels(), x.array().max(lo).min(hi)};
}

inline ImageTensor sign(const ImageTensor& x) {
  return {x.height(), x.width(), x.channels(), x.array().sign()};
}

inline double linf_norm(const ImageTensor& x) {
  return x.array().abs().maxCoeff();
}

inline double l2_norm(const ImageTensor& x) {
  return std::sqrt((x.array() * x.array()).sum());
}

inline double l1_norm(const ImageTensor& x) { return x.array().abs().sum(); }

inline bool all_finite(const ImageTensor& x) {
  return x.array().isFinite().all();
}

inline Spectrum to_complex(const ImageTensor& x) {
  return {x.height(), x.width(), x.channels(),
          x.array().cast<std::complex<double>>()};
}

inline ImageTensor real_part(const Spectrum& s) {
  return {s.height(), s.width(), s.channels(), s.array().real()};
}

inline ImageTensor magnitude(const Spectrum& s) {
  return {s.height(), s.width(), s.channels(), s.array().abs()};
}

// Mean over channels, keeping a single-channel tensor.
inline ImageTensor channel_mean(const ImageTensor& x) {
  ImageTensor out(x.height(), x.width(), 1);
  const double inv = 1.0 / static_cast<double>(x.channels());
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w) {
      double acc = 0.0;
      for (Index c = 0; c < x.channels(); ++c) acc += x(h, w, c);
      out(h, w, 0) = acc * inv;
    }
  return out;
}

}  // namespace freqdef

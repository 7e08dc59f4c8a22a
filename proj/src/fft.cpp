#include "freqdef/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace freqdef {

namespace {

using Complex = std::complex<double>;

constexpr Index kLargestSmallPrime = 13;

Index smallest_prime_factor(Index n) {
  for (Index p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

bool factors_smoothly(Index n) {
  for (Index p = 2; p <= kLargestSmallPrime; ++p)
    while (n % p == 0) n /= p;
  return n == 1;
}

std::vector<Complex> unit_roots(Index n) {
  std::vector<Complex> roots(n);
  for (Index k = 0; k < n; ++k) {
    // Exact values on the axes so that symmetric inputs cancel exactly.
    if (4 * k % n == 0) {
      switch (4 * k / n) {
        case 0: roots[k] = Complex(1.0, 0.0); continue;
        case 1: roots[k] = Complex(0.0, -1.0); continue;
        case 2: roots[k] = Complex(-1.0, 0.0); continue;
        case 3: roots[k] = Complex(0.0, 1.0); continue;
      }
    }
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    roots[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return roots;
}

void conjugate_all(Complex* data, Index n) {
  for (Index i = 0; i < n; ++i) data[i] = std::conj(data[i]);
}

}  // namespace

Fft1d::Fft1d(Index n) : n_(n) {
  if (n <= 0) throw ShapeError("transform length must be positive");
  smooth_ = factors_smoothly(n);
  if (smooth_) {
    roots_ = unit_roots(n);
    return;
  }
  pad_ = 1;
  while (pad_ < 2 * n - 1) pad_ *= 2;
  roots_ = unit_roots(pad_);
  chirp_.resize(n);
  for (Index j = 0; j < n; ++j) {
    // j^2 reduced mod 2n keeps the angle argument small.
    const long long q = (static_cast<long long>(j) * j) % (2 * n);
    const double angle =
        -std::numbers::pi * static_cast<double>(q) / static_cast<double>(n);
    chirp_[j] = Complex(std::cos(angle), std::sin(angle));
  }
  chirp_spectrum_.assign(pad_, Complex(0.0, 0.0));
  chirp_spectrum_[0] = Complex(1.0, 0.0);
  for (Index j = 1; j < n; ++j) {
    chirp_spectrum_[j] = std::conj(chirp_[j]);
    chirp_spectrum_[pad_ - j] = std::conj(chirp_[j]);
  }
  std::vector<Complex> scratch(pad_);
  smooth_run(chirp_spectrum_.data(), pad_, 1, scratch.data());
}

void Fft1d::smooth_run(Complex* buf, Index m, Index root_stride,
                       Complex* scratch) const {
  if (m == 1) return;
  const Index p = smallest_prime_factor(m);
  const Index sub = m / p;
  for (Index r = 0; r < p; ++r)
    for (Index t = 0; t < sub; ++t) scratch[r * sub + t] = buf[t * p + r];
  for (Index r = 0; r < p; ++r)
    smooth_run(scratch + r * sub, sub, root_stride * p, buf + r * sub);
  for (Index j = 0; j < m; ++j) {
    Complex acc = scratch[j % sub];
    for (Index r = 1; r < p; ++r)
      acc += roots_[((j * r) % m) * root_stride] * scratch[r * sub + j % sub];
    buf[j] = acc;
  }
}

void Fft1d::pad_forward(Complex* data) const {
  std::vector<Complex> scratch(pad_);
  smooth_run(data, pad_, 1, scratch.data());
}

void Fft1d::pad_inverse(Complex* data) const {
  conjugate_all(data, pad_);
  pad_forward(data);
  const double inv = 1.0 / static_cast<double>(pad_);
  for (Index i = 0; i < pad_; ++i) data[i] = std::conj(data[i]) * inv;
}

void Fft1d::forward(Complex* data) const {
  if (smooth_) {
    std::vector<Complex> scratch(n_);
    smooth_run(data, n_, 1, scratch.data());
    return;
  }
  std::vector<Complex> work(pad_, Complex(0.0, 0.0));
  for (Index j = 0; j < n_; ++j) work[j] = data[j] * chirp_[j];
  pad_forward(work.data());
  for (Index k = 0; k < pad_; ++k) work[k] *= chirp_spectrum_[k];
  pad_inverse(work.data());
  for (Index k = 0; k < n_; ++k) data[k] = work[k] * chirp_[k];
}

void Fft1d::inverse(Complex* data) const {
  conjugate_all(data, n_);
  forward(data);
  conjugate_all(data, n_);
}

namespace {

enum class Axis { kHeight, kWidth, kChannel };

void transform_axis(Spectrum& t, Axis axis, bool forward) {
  const Index H = t.height(), W = t.width(), C = t.channels();
  Index len = 0, stride = 0, outer_a = 0, outer_b = 0;
  switch (axis) {
    case Axis::kHeight:
      len = H; stride = W * C; outer_a = W; outer_b = C;
      break;
    case Axis::kWidth:
      len = W; stride = C; outer_a = H; outer_b = C;
      break;
    case Axis::kChannel:
      len = C; stride = 1; outer_a = H; outer_b = W;
      break;
  }
  if (len == 1) return;
  Fft1d plan(len);
  std::vector<Complex> line(len);
  auto* data = t.array().data();
  for (Index a = 0; a < outer_a; ++a)
    for (Index b = 0; b < outer_b; ++b) {
      Index base = 0;
      switch (axis) {
        case Axis::kHeight: base = a * C + b; break;
        case Axis::kWidth: base = a * W * C + b; break;
        case Axis::kChannel: base = (a * W + b) * C; break;
      }
      for (Index i = 0; i < len; ++i) line[i] = data[base + i * stride];
      if (forward)
        plan.forward(line.data());
      else
        plan.inverse(line.data());
      for (Index i = 0; i < len; ++i) data[base + i * stride] = line[i];
    }
}

void check_budget(Index size, Index max_elements) {
  if (size > max_elements)
    throw SizeError("transform input exceeds the element budget");
}

}  // namespace

Spectrum dft3(const Spectrum& x, Index max_elements) {
  check_budget(x.size(), max_elements);
  Spectrum X = x;
  transform_axis(X, Axis::kHeight, true);
  transform_axis(X, Axis::kWidth, true);
  transform_axis(X, Axis::kChannel, true);
  return X;
}

Spectrum dft3(const ImageTensor& x, Index max_elements) {
  return dft3(to_complex(x), max_elements);
}

Spectrum idft3_complex(const Spectrum& X, Index max_elements) {
  check_budget(X.size(), max_elements);
  Spectrum x = X;
  transform_axis(x, Axis::kHeight, false);
  transform_axis(x, Axis::kWidth, false);
  transform_axis(x, Axis::kChannel, false);
  const double inv = 1.0 / static_cast<double>(x.size());
  x.array() *= Complex(inv, 0.0);
  return x;
}

ImageTensor idft3(const Spectrum& X, Index max_elements) {
  const Spectrum x = idft3_complex(X, max_elements);
  const double residue = x.array().imag().abs().maxCoeff();
  const double scale = std::max(1.0, x.array().real().abs().maxCoeff());
  if (residue >= 1e-6 * scale)
    throw SymmetryError("inverse transform of a non-symmetric spectrum "
                        "produced a complex result");
  return real_part(x);
}

ImageTensor fftshift_log_magnitude(const Spectrum& X) {
  const Index H = X.height(), W = X.width(), C = X.channels();
  ImageTensor out(H, W, C);
  for (Index k = 0; k < H; ++k)
    for (Index l = 0; l < W; ++l)
      for (Index m = 0; m < C; ++m)
        out((k + H / 2) % H, (l + W / 2) % W, m) =
            std::log1p(std::abs(X(k, l, m)));
  for (Index m = 0; m < C; ++m) {
    double lo = out(0, 0, m), hi = out(0, 0, m);
    for (Index k = 0; k < H; ++k)
      for (Index l = 0; l < W; ++l) {
        lo = std::min(lo, out(k, l, m));
        hi = std::max(hi, out(k, l, m));
      }
    const double span = hi - lo;
    for (Index k = 0; k < H; ++k)
      for (Index l = 0; l < W; ++l)
        out(k, l, m) = span > 0.0 ? (out(k, l, m) - lo) / span * 255.0 : 0.0;
  }
  return out;
}

}  // namespace freqdef

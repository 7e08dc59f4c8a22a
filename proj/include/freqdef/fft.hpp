#pragma once

#include <complex>
#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

// Unnormalized 1D DFT of a fixed length. Mixed-radix Cooley-Tukey for sizes
// whose prime factors are small; Bluestein's chirp-z algorithm otherwise, so
// every length is supported in O(n log n).
class Fft1d {
 public:
  explicit Fft1d(Index n);

  Index length() const { return n_; }

  // In-place, e^{-2*pi*i*jk/n} kernel, no scaling.
  void forward(std::complex<double>* data) const;

  // In-place, e^{+2*pi*i*jk/n} kernel, no scaling.
  void inverse(std::complex<double>* data) const;

 private:
  void smooth_run(std::complex<double>* buf, Index m, Index root_stride,
                  std::complex<double>* scratch) const;
  void pad_forward(std::complex<double>* data) const;
  void pad_inverse(std::complex<double>* data) const;

  Index n_ = 0;
  bool smooth_ = true;
  // Roots e^{-2*pi*i*k/len} for the smooth transform length (n_ itself, or
  // the power-of-two padding inside Bluestein).
  std::vector<std::complex<double>> roots_;
  Index pad_ = 0;
  std::vector<std::complex<double>> chirp_;
  std::vector<std::complex<double>> chirp_spectrum_;
};

// Largest element count dft3/idft3 will accept before raising SizeError.
inline constexpr Index kMaxTransformElements = Index{1} << 24;

// 3D DFT over height, width and channel axes:
//   X[k,l,m] = sum_{h,w,c} x[h,w,c] * exp(-2*pi*i*(kh/H + lw/W + mc/C))
Spectrum dft3(const ImageTensor& x, Index max_elements = kMaxTransformElements);
Spectrum dft3(const Spectrum& x, Index max_elements = kMaxTransformElements);

// Inverse transform with the 1/(HWC) factor. The result must be real: the
// imaginary residue is discarded below tolerance and raises SymmetryError at
// or above 1e-6 (relative to the output magnitude).
ImageTensor idft3(const Spectrum& X, Index max_elements = kMaxTransformElements);

// Inverse transform without the real-output assertion.
Spectrum idft3_complex(const Spectrum& X,
                       Index max_elements = kMaxTransformElements);

// Per-channel log-magnitude display transform: log(1 + |X|) with the zero
// frequency shifted to the center, rescaled to [0, 255] channel by channel.
ImageTensor fftshift_log_magnitude(const Spectrum& X);

}  // namespace freqdef

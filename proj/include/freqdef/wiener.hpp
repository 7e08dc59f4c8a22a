#pragma once

#include <string>
#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

enum class FilterProvenance { kPerImageUpperLimit, kSingleAttack, kCombined };

// Frequency-domain gain mask estimated from clean/perturbation pairs:
//   G = |X|^2 / (|X|^2 + |R|^2)
// with untouched bins (0/0) passed through at gain 1. Gains are real, lie in
// [0, 1] and inherit the conjugate symmetry of the spectra they came from.
struct WienerFilter {
  ImageTensor gains;
  FilterProvenance provenance = FilterProvenance::kPerImageUpperLimit;
  std::string attack_label;  // set for single-attack filters
  double training_epsilon = 0.0;
};

struct TrainPair {
  ImageTensor image;
  ImageTensor perturbation;
};

// Per-image filter from one known pair; the upper-limit configuration.
WienerFilter filter_from_pair(const ImageTensor& x, const ImageTensor& r);

// Arithmetic mean of the per-pair gains over a training set.
WienerFilter filter_single_attack(const std::vector<TrainPair>& pairs,
                                  const std::string& attack_label,
                                  double training_epsilon);

// Mean of single-attack filters; they must share shape and epsilon.
WienerFilter combine_filters(const std::vector<WienerFilter>& filters);

// x_hat = idft3(G .* dft3(x)) clipped to [0, 255]. Raises SymmetryError when
// the gains are not conjugate-symmetric within 1e-9.
ImageTensor apply_filter(const WienerFilter& filter, const ImageTensor& x);

// Largest deviation |G[k,l,m] - G[-k,-l,-m]| over all bins.
double filter_symmetry_residual(const ImageTensor& gains);

// Binary container: magic "WFLT", version, provenance byte, training epsilon,
// dimensions, then row-major float64 gains.
void save_filter(const std::string& path, const WienerFilter& filter);
WienerFilter load_filter(const std::string& path);

}  // namespace freqdef

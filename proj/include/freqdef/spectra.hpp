#pragma once

#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

// Per-bin mean of |dft3(r)| over a set of equally shaped perturbations.
ImageTensor average_amplitude_spectrum(
    const std::vector<ImageTensor>& perturbations);

// Grid-artifact strength: mean magnitude of bins whose row (column) index is
// a nonzero multiple of H/s (W/s), divided by the median magnitude of every
// other bin outside DC. A featureless spectrum scores 1.
double harmonic_peak_score(const ImageTensor& spectrum, int scale);

}  // namespace freqdef

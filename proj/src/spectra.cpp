#include "freqdef/spectra.hpp"

#include <algorithm>

#include "freqdef/fft.hpp"

namespace freqdef {

ImageTensor average_amplitude_spectrum(
    const std::vector<ImageTensor>& perturbations) {
  if (perturbations.empty())
    throw SpecError("need at least one perturbation to average");
  ImageTensor acc = magnitude(dft3(perturbations.front()));
  for (std::size_t i = 1; i < perturbations.size(); ++i) {
    require_same_shape(perturbations[i], perturbations.front(),
                       "average_amplitude_spectrum");
    acc.array() += magnitude(dft3(perturbations[i])).array();
  }
  acc.array() /= static_cast<double>(perturbations.size());
  return acc;
}

double harmonic_peak_score(const ImageTensor& spectrum, int scale) {
  const Index H = spectrum.height(), W = spectrum.width();
  if (scale < 2 || H % scale != 0 || W % scale != 0)
    throw SpecError("scale must be >= 2 and divide both spatial dimensions");
  const Index row_step = H / scale, col_step = W / scale;

  double peak_sum = 0.0;
  Index peak_count = 0;
  std::vector<double> rest;
  rest.reserve(static_cast<std::size_t>(spectrum.size()));
  for (Index k = 0; k < H; ++k)
    for (Index l = 0; l < W; ++l) {
      const bool harmonic = (k != 0 && k % row_step == 0) ||
                            (l != 0 && l % col_step == 0);
      for (Index m = 0; m < spectrum.channels(); ++m) {
        if (harmonic) {
          peak_sum += spectrum(k, l, m);
          ++peak_count;
        } else if (k != 0 || l != 0) {
          rest.push_back(spectrum(k, l, m));
        }
      }
    }
  if (peak_count == 0 || rest.empty())
    throw SpecError("scale leaves no bins on one side of the ratio");

  const std::size_t mid = rest.size() / 2;
  std::nth_element(rest.begin(), rest.begin() + mid, rest.end());
  double median = rest[mid];
  if (rest.size() % 2 == 0) {
    const auto lower = std::max_element(rest.begin(), rest.begin() + mid);
    median = 0.5 * (median + *lower);
  }
  return peak_sum / static_cast<double>(peak_count) / median;
}

}  // namespace freqdef

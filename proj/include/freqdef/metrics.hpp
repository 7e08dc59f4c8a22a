#pragma once

#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

// Mean squared error over all H*W*C elements.
double mse(const ImageTensor& a, const ImageTensor& b);

// Mean SSIM over valid 11x11 window positions and channels. Gaussian window
// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 255, unit exponents.
double ssim(const ImageTensor& a, const ImageTensor& b);

struct MiouResult {
  double mean = 0.0;
  // Indexed by class id; NaN marks classes absent from both maps, which do
  // not contribute to the mean.
  std::vector<double> per_class;
};

// Streamed per-class confusion counts; merge is associative so shards can be
// reduced in any grouping.
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(int num_classes);

  void add(const ClassMap& pred, const ClassMap& gt);
  void merge(const ConfusionAccumulator& other);
  MiouResult result() const;
  int num_classes() const { return num_classes_; }

 private:
  int num_classes_;
  std::vector<long long> tp_, fp_, fn_;
};

MiouResult miou(const ClassMap& pred, const ClassMap& gt, int num_classes);

}  // namespace freqdef

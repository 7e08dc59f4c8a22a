#include "freqdef/metrics.hpp"

#include <cmath>
#include <limits>

namespace freqdef {

double mse(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "mse");
  return (a.array() - b.array()).square().sum() /
         static_cast<double>(a.size());
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

const double* gaussian_window() {
  static const auto table = [] {
    std::array<double, kWindow * kWindow> w{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i)
      for (int j = 0; j < kWindow; ++j) {
        const double di = i - kWindow / 2, dj = j - kWindow / 2;
        w[i * kWindow + j] = std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
        total += w[i * kWindow + j];
      }
    for (auto& v : w) v /= total;
    return w;
  }();
  return table.data();
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow)
    throw ShapeError("ssim needs at least one full 11x11 window");
  const double* win = gaussian_window();
  double total = 0.0;
  long long count = 0;
  for (Index c = 0; c < a.channels(); ++c)
    for (Index h = 0; h + kWindow <= a.height(); ++h)
      for (Index w = 0; w + kWindow <= a.width(); ++w) {
        double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int i = 0; i < kWindow; ++i)
          for (int j = 0; j < kWindow; ++j) {
            const double g = win[i * kWindow + j];
            const double va = a(h + i, w + j, c);
            const double vb = b(h + i, w + j, c);
            ma += g * va;
            mb += g * vb;
            saa += g * va * va;
            sbb += g * vb * vb;
            sab += g * va * vb;
          }
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        const double l = (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
        const double cs = (2.0 * cov + kC2) / (var_a + var_b + kC2);
        total += l * cs;
        ++count;
      }
  return total / static_cast<double>(count);
}

ConfusionAccumulator::ConfusionAccumulator(int num_classes)
    : num_classes_(num_classes) {
  if (num_classes <= 0) throw SpecError("num_classes must be positive");
  tp_.assign(num_classes, 0);
  fp_.assign(num_classes, 0);
  fn_.assign(num_classes, 0);
}

void ConfusionAccumulator::add(const ClassMap& pred, const ClassMap& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw ShapeError("confusion add: shape mismatch");
  for (Index h = 0; h < pred.rows(); ++h)
    for (Index w = 0; w < pred.cols(); ++w) {
      const int p = pred(h, w), g = gt(h, w);
      if (p < 0 || p >= num_classes_ || g < 0 || g >= num_classes_)
        throw SpecError("class label out of range");
      if (p == g) {
        ++tp_[p];
      } else {
        ++fp_[p];
        ++fn_[g];
      }
    }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.num_classes_ != num_classes_)
    throw SpecError("confusion merge: class count mismatch");
  for (int s = 0; s < num_classes_; ++s) {
    tp_[s] += other.tp_[s];
    fp_[s] += other.fp_[s];
    fn_[s] += other.fn_[s];
  }
}

MiouResult ConfusionAccumulator::result() const {
  MiouResult r;
  r.per_class.assign(num_classes_,
                     std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  int present = 0;
  for (int s = 0; s < num_classes_; ++s) {
    const long long denom = tp_[s] + fp_[s] + fn_[s];
    if (denom == 0) continue;  // class absent from both maps
    r.per_class[s] = static_cast<double>(tp_[s]) / static_cast<double>(denom);
    total += r.per_class[s];
    ++present;
  }
  r.mean = present > 0 ? total / present : 0.0;
  return r;
}

MiouResult miou(const ClassMap& pred, const ClassMap& gt, int num_classes) {
  ConfusionAccumulator acc(num_classes);
  acc.add(pred, gt);
  return acc.result();
}

}  // namespace freqdef

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "freqdef/common.hpp"
#include "freqdef/metrics.hpp"

using namespace freqdef;

namespace {

ImageTensor random_image(Index h, Index w, Index c, std::uint64_t seed) {
  ImageTensor x(h, w, c);
  Rng rng(seed);
  for (Index i = 0; i < x.size(); ++i) x.array()[i] = rng.uniform(0.0, 255.0);
  return x;
}

constexpr double kC1 = 6.5025;  // (0.01*255)^2

}  // namespace

TEST_CASE("mse basics") {
  const ImageTensor x = random_image(8, 8, 3, 1);
  CHECK(mse(x, x) == 0.0);
  ImageTensor y = x;
  y.array() += 1.0;
  CHECK(mse(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(mse(x, ImageTensor(8, 9, 3)), ShapeError);
}

TEST_CASE("ssim of identical images is one") {
  const ImageTensor x = random_image(16, 16, 3, 2);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of constant images matches the closed form") {
  // Variance terms vanish, so only the luminance factor remains.
  const ImageTensor a = ImageTensor::constant(12, 12, 1, 100.0);
  const ImageTensor b = ImageTensor::constant(12, 12, 1, 110.0);
  const double expected =
      (2.0 * 100.0 * 110.0 + kC1) / (100.0 * 100.0 + 110.0 * 110.0 + kC1);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("constant offset lowers only the luminance term") {
  const ImageTensor x = random_image(14, 14, 1, 3);
  ImageTensor y = x;
  y.array() += 10.0;
  const double got = ssim(x, y);
  CHECK(got < 1.0);

  // Oracle: mean luminance factor with the same gaussian window; with a
  // constant shift the contrast-structure factor is exactly one.
  const int win = 11;
  const double sigma = 1.5;
  double wsum = 0.0;
  std::vector<double> g(win * win);
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - win / 2, dj = j - win / 2;
      g[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      wsum += g[i * win + j];
    }
  double total = 0.0;
  int count = 0;
  for (Index h = 0; h + win <= x.height(); ++h)
    for (Index w = 0; w + win <= x.width(); ++w) {
      double ma = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j)
          ma += g[i * win + j] / wsum * x(h + i, w + j, 0);
      const double mb = ma + 10.0;
      total += (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
      ++count;
    }
  CHECK(got == doctest::Approx(total / count).epsilon(1e-9));
}

TEST_CASE("ssim is symmetric and needs a full window") {
  const ImageTensor x = random_image(12, 16, 3, 4);
  const ImageTensor y = random_image(12, 16, 3, 5);
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(ImageTensor(8, 8, 1), ImageTensor(8, 8, 1)),
                  ShapeError);
}

TEST_CASE("miou hand example") {
  ClassMap pred(2, 2), gt(2, 2);
  pred << 0, 1, 1, 1;
  gt << 0, 1, 0, 1;
  const auto r = miou(pred, gt, 2);
  CHECK(r.per_class[0] == doctest::Approx(0.5));
  CHECK(r.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.mean == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("miou edge cases") {
  ClassMap a = ClassMap::Zero(3, 3);
  CHECK(miou(a, a, 4).mean == doctest::Approx(1.0));
  // Only class 0 appears anywhere, so absent classes stay out of the mean.
  const auto r = miou(a, a, 4);
  CHECK(std::isnan(r.per_class[3]));

  ClassMap b = ClassMap::Constant(3, 3, 1);
  CHECK(miou(a, b, 4).mean == doctest::Approx(0.0));

  ClassMap bad = ClassMap::Constant(3, 3, 9);
  CHECK_THROWS_AS(miou(bad, a, 4), SpecError);
}

TEST_CASE("confusion accumulator merge matches pooled counts") {
  Rng rng(6);
  std::vector<std::pair<ClassMap, ClassMap>> batches;
  for (int n = 0; n < 6; ++n) {
    ClassMap p(5, 5), g(5, 5);
    for (Index h = 0; h < 5; ++h)
      for (Index w = 0; w < 5; ++w) {
        p(h, w) = rng.uniform_int(0, 3);
        g(h, w) = rng.uniform_int(0, 3);
      }
    batches.emplace_back(p, g);
  }

  ConfusionAccumulator pooled(4);
  for (auto& [p, g] : batches) pooled.add(p, g);

  // Two shards merged, grouped differently.
  ConfusionAccumulator s1(4), s2(4), s3(4);
  s1.add(batches[0].first, batches[0].second);
  s1.add(batches[1].first, batches[1].second);
  s2.add(batches[2].first, batches[2].second);
  s2.add(batches[3].first, batches[3].second);
  s3.add(batches[4].first, batches[4].second);
  s3.add(batches[5].first, batches[5].second);
  s2.merge(s3);
  s1.merge(s2);

  const auto a = pooled.result(), b = s1.result();
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-15));
  for (int s = 0; s < 4; ++s)
    if (!std::isnan(a.per_class[s]))
      CHECK(a.per_class[s] == doctest::Approx(b.per_class[s]).epsilon(1e-15));
}

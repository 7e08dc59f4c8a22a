#include "freqdef/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "freqdef/fft.hpp"
#include "freqdef/image_io.hpp"

namespace freqdef {

namespace {

// Well separated base colors; class index wraps for nets with more classes.
constexpr double kPalette[][3] = {
    {46.0, 64.0, 200.0},  {204.0, 68.0, 46.0},  {64.0, 182.0, 70.0},
    {222.0, 198.0, 58.0}, {150.0, 60.0, 170.0}, {90.0, 190.0, 195.0},
};
constexpr int kPaletteSize = 6;

// Zeroes every spatial frequency above the cutoff (fraction of Nyquist).
// Scene content then lives on a known low-frequency support, which gives a
// spectral defense headroom: outside the support there is nothing to shred.
void band_limit(ImageTensor& x, double cutoff) {
  Spectrum X = dft3(x);
  const Index H = x.height(), W = x.width();
  for (Index k = 0; k < H; ++k)
    for (Index l = 0; l < W; ++l) {
      const double fk = static_cast<double>(std::min(k, H - k)) / (H / 2.0);
      const double fl = static_cast<double>(std::min(l, W - l)) / (W / 2.0);
      if (std::max(fk, fl) <= cutoff) continue;
      for (Index c = 0; c < x.channels(); ++c) X(k, l, c) = 0.0;
    }
  x = idft3(X);
}

// Separable 5-tap binomial smoothing with replicated borders; pre-softens
// region boundaries so the band limit above rings less.
void binomial_blur(ImageTensor& x) {
  constexpr double kTap[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  ImageTensor tmp = x;
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w)
      for (Index c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t)
          acc += kTap[t + 2] *
                 x(h, std::clamp<Index>(w + t, 0, x.width() - 1), c);
        tmp(h, w, c) = acc;
      }
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w)
      for (Index c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t)
          acc += kTap[t + 2] *
                 tmp(std::clamp<Index>(h + t, 0, x.height() - 1), w, c);
        x(h, w, c) = acc;
      }
}

}  // namespace

SceneSample make_scene(Index height, Index width, int num_classes, Rng& rng) {
  if (num_classes < 2) throw SpecError("scenes need at least two classes");

  // Two sites per class so every class can appear and the region geometry is
  // reasonably isotropic; ties go to the smaller class via the scan order.
  const int sites = 2 * num_classes;
  std::vector<Index> sh(sites), sw(sites);
  for (int s = 0; s < sites; ++s) {
    sh[s] = static_cast<Index>(rng.uniform_index(height));
    sw[s] = static_cast<Index>(rng.uniform_index(width));
  }

  std::vector<double> jitter(static_cast<std::size_t>(num_classes) * 3);
  for (double& j : jitter) j = rng.uniform(-10.0, 10.0);

  SceneSample out{ImageTensor(height, width, 3), ClassMap(height, width)};
  for (Index h = 0; h < height; ++h)
    for (Index w = 0; w < width; ++w) {
      long long best = -1;
      int cls = 0;
      for (int s = 0; s < sites; ++s) {
        const long long d2 = static_cast<long long>(h - sh[s]) * (h - sh[s]) +
                             static_cast<long long>(w - sw[s]) * (w - sw[s]);
        if (best < 0 || d2 < best) {
          best = d2;
          cls = s % num_classes;
        }
      }
      out.labels(h, w) = cls;
      for (Index c = 0; c < 3; ++c)
        out.image(h, w, c) = kPalette[cls % kPaletteSize][c] +
                             jitter[static_cast<std::size_t>(cls) * 3 + c];
    }

  binomial_blur(out.image);
  band_limit(out.image, 0.375);
  for (Index h = 0; h < height; ++h)
    for (Index w = 0; w < width; ++w)
      for (Index c = 0; c < 3; ++c)
        out.image(h, w, c) = std::clamp(
            out.image(h, w, c) + rng.uniform(-4.0, 4.0), 0.0, 255.0);
  return out;
}

void write_dataset(const std::string& dir, int count, Index height,
                   Index width, int num_classes, std::uint64_t seed) {
  if (count < 1) throw SpecError("dataset needs at least one scene");
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const SceneSample scene = make_scene(height, width, num_classes, rng);
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%03d", i);
    const auto base = std::filesystem::path(dir) / stem;
    write_ppm(base.string() + ".ppm", scene.image);
    write_class_map(base.string() + "_gt.pgm", scene.labels);
  }
}

std::vector<std::string> list_images(const std::string& dir) {
  if (!std::filesystem::is_directory(dir))
    throw FormatError("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      paths.push_back(entry.path().string());
  if (paths.empty()) throw FormatError("no images found in " + dir);
  std::sort(paths.begin(), paths.end());
  return paths;
}

}  // namespace freqdef

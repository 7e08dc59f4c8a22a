#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqdef/common.hpp"
#include "freqdef/tensor.hpp"

namespace freqdef {

struct SceneSample {
  ImageTensor image;
  ClassMap labels;
};

// Voronoi scene with softened edges: one seeded site per class, pixels take
// the class of the nearest site, colors are a fixed palette with per-scene
// jitter, smoothed at the boundaries, plus light per-pixel noise.
SceneSample make_scene(Index height, Index width, int num_classes, Rng& rng);

// Writes count scenes as scene_###.ppm with scene_###_gt.pgm label maps.
void write_dataset(const std::string& dir, int count, Index height,
                   Index width, int num_classes, std::uint64_t seed);

// Sorted paths of the PPM images in a directory; FormatError when empty.
std::vector<std::string> list_images(const std::string& dir);

}  // namespace freqdef

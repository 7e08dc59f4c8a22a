#pragma once

#include <functional>
#include <string>
#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

// Any image-to-image defense, bound to its parameters.
using Denoiser = std::function<ImageTensor(const ImageTensor&)>;

// k x k median per channel, borders replicated.
ImageTensor median_blur(const ImageTensor& x, int k = 3);

// Quantizes to 2^bits levels and maps back to [0, 255].
ImageTensor bit_depth_reduce(const ImageTensor& x, int bits = 5);

// Non-local means, per channel: search x search candidate window, patch x
// patch mean squared distance d2, weights exp(-max(d2 - 2*sigma^2, 0)/h^2)
// with sigma = 0 and h = strength.
ImageTensor nl_means(const ImageTensor& x, int search = 13, int patch = 3,
                     double strength = 2.0);

// JPEG-style 8x8 block DCT quantization with the standard luminance table
// scaled by the libjpeg quality rule, applied to each RGB channel.
ImageTensor jpeg_dct(const ImageTensor& x, int quality = 90);

// Applies the chain left to right.
ImageTensor compose(const std::vector<Denoiser>& defenses,
                    const ImageTensor& x);

struct DefenseSpec {
  enum class Kind {
    kIdentity,
    kWiener,
    kJpegDct,
    kMedianBlur,
    kBitDepth,
    kNlMeans,
    kJpeg2000,
    kCompose,
  };

  Kind kind = Kind::kIdentity;
  std::string name;
  std::string filter_path;  // wiener
  int quality = 90;
  int kernel = 3;
  int bits = 5;
  int search = 13;
  int patch = 3;
  double strength = 2.0;
  std::vector<DefenseSpec> children;  // compose
};

// JSON document form, e.g. {"kind": "median_blur", "kernel": 3}. Compose
// chains nest: {"kind": "compose", "children": [...]}.
DefenseSpec parse_defense(const std::string& json_text);
std::string defense_to_json(const DefenseSpec& spec);

// Rejects out-of-range parameters.
void validate(const DefenseSpec& spec);

}  // namespace freqdef

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "freqdef/baselines.hpp"
#include "freqdef/micronet.hpp"
#include "freqdef/tensor.hpp"

namespace freqdef {

// Target-mask construction failed (e.g. no donor class exists).
struct MaskError : Error {
  using Error::Error;
};

enum class AttackKind { kMfgsm, kMetzenLlm, kIterativeMirror, kMopuri };
enum class NormKind { kLinf, kL2 };

AttackKind attack_kind_from_name(std::string_view name);
std::string_view attack_kind_name(AttackKind kind);
NormKind norm_from_name(std::string_view name);
std::string_view norm_name(NormKind norm);

struct AttackSpec {
  AttackKind kind = AttackKind::kMfgsm;
  double epsilon = 10.0;
  NormKind norm = NormKind::kLinf;
  int iterations = 20;
  double momentum = 10.0;
  int target_class = -1;      // mfgsm, metzen_llm
  std::vector<int> taps;      // mopuri feature taps
  std::string label;          // report/file tag, defaults to the kind name

  // Conventional parameters per kind; targeted kinds still need a class.
  static AttackSpec defaults(AttackKind kind);

  std::string effective_label() const;
  void validate() const;  // SpecError on violated invariants
};

AttackSpec parse_attack(const std::string& json_text);
std::string attack_to_json(const AttackSpec& spec);

struct Perturbation {
  ImageTensor r;
  AttackSpec spec;
  // Loss gradient vanished at the first step; r is the start point unchanged.
  bool zero_gradient = false;
};

// Fake mask for the erasure attack: every pixel predicted as target_class
// takes the class of its nearest other-class pixel (2D Euclidean distance,
// ties resolved toward the smaller squared distance then the smaller class).
ClassMap nearest_donor_mask(const ClassMap& pred, int target_class);

// Left-right flip, out[h][w] = in[h][W-1-w].
ClassMap mirrored_mask(const ClassMap& pred);

Perturbation mfgsm(const MicroNet& net, const ImageTensor& x,
                   const AttackSpec& spec);
Perturbation metzen_llm(const MicroNet& net, const ImageTensor& x,
                        const AttackSpec& spec);
Perturbation iterative_mirror(const MicroNet& net, const ImageTensor& x,
                              const AttackSpec& spec);

// Image-agnostic: starts from r0 ~ U(-eps, eps) drawn from the seed and
// maximizes the product of tap activation norms; needs shape only.
Perturbation mopuri(const MicroNet& net, Index height, Index width,
                    Index channels, const AttackSpec& spec,
                    std::uint64_t seed);

// mfgsm through a non-differentiable defense: the loss sees net(g(x)) while
// the backward pass treats g as the identity (straight-through).
Perturbation bpda_attack(const MicroNet& net, const Denoiser& defense,
                         const ImageTensor& x, const AttackSpec& spec);

// Dispatch on spec.kind; seed only feeds the mopuri start point.
Perturbation run_attack(const MicroNet& net, const ImageTensor& x,
                        const AttackSpec& spec, std::uint64_t seed);

// Raw little-endian f64 tensor with a 16-byte "PERT" + H, W, C header.
void save_perturbation(const std::string& path, const ImageTensor& r);
ImageTensor load_perturbation(const std::string& path);

}  // namespace freqdef

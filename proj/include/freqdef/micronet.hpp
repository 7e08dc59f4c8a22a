#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freqdef/tensor.hpp"

namespace freqdef {

enum class Interp { kNearest, kBilinear, kBicubic, kArea };
enum class ResampleDir { kUp, kDown };

Interp interp_from_name(std::string_view name);
std::string_view interp_name(Interp mode);

// Scales an image by an integer factor (2 or 4). Downsampling requires the
// spatial dimensions to be divisible by the factor.
ImageTensor resample(const ImageTensor& x, int scale, ResampleDir dir,
                     Interp mode);

// Exact transpose of the corresponding forward resample, mapping output-shaped
// gradients back to an input of the given spatial size.
ImageTensor resample_adjoint(const ImageTensor& grad, int scale,
                             ResampleDir dir, Interp mode, Index in_height,
                             Index in_width);

struct LayerSpec {
  enum class Kind { kConv2d, kRelu, kResample, kSoftmax, kFeatureTap };

  Kind kind = Kind::kRelu;
  int kernel = 0;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int scale = 0;
  ResampleDir direction = ResampleDir::kDown;
  int tap_id = 0;
  // Indices of earlier nodes feeding this one; -1 is the network input and an
  // empty list means the preceding node. Multiple inputs are summed.
  std::vector<int> inputs;

  static LayerSpec conv2d(int kernel, int in_channels, int out_channels,
                          int stride = 1, std::vector<int> inputs = {});
  static LayerSpec relu(std::vector<int> inputs = {});
  static LayerSpec resample_layer(int scale, ResampleDir dir,
                                  std::vector<int> inputs = {});
  static LayerSpec softmax(std::vector<int> inputs = {});
  static LayerSpec feature_tap(int id, std::vector<int> inputs = {});
};

struct LossSpec {
  enum class Kind { kL2ClassScores, kCrossEntropy, kNegLogActivationProduct };

  Kind kind = Kind::kL2ClassScores;
  int target_class = -1;
  ClassMap target_mask;
  std::vector<int> taps;

  // J = || y_tau ||_2 over the output map of one class.
  static LossSpec l2_class_scores(int target_class);
  // J = mean over pixels of -log y[m(h,w)].
  static LossSpec cross_entropy(ClassMap mask);
  // J = -sum over taps of log(delta + ||f_lambda||_2).
  static LossSpec negative_log_activation_product(std::vector<int> taps);
};

// Small segmentation network: an ordered DAG of layers with deterministic
// seeded weight initialization (uniform [-0.5, 0.5] scaled by 1/sqrt(fan_in)).
class MicroNet {
 public:
  MicroNet(std::vector<LayerSpec> layers, int num_classes, Interp mode,
           std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  int num_classes() const { return num_classes_; }
  Interp interpolation() const { return mode_; }
  std::uint64_t seed() const { return seed_; }

  const Eigen::ArrayXd& weights(int layer) const { return weights_[layer]; }
  std::vector<int> tap_ids() const;
  bool has_tap(int id) const;

 private:
  std::vector<LayerSpec> layers_;
  int num_classes_;
  Interp mode_;
  std::uint64_t seed_;
  std::vector<Eigen::ArrayXd> weights_;
};

struct ForwardResult {
  ImageTensor output;
  std::vector<std::pair<int, ImageTensor>> taps;
};

ForwardResult forward(const MicroNet& net, const ImageTensor& x);

// Argmax over channels; ties go to the smallest class index.
ClassMap argmax_map(const ImageTensor& scores);
ClassMap predict(const MicroNet& net, const ImageTensor& x);

struct LossGradient {
  double value = 0.0;
  ImageTensor gradient;
};

double loss_value(const MicroNet& net, const ImageTensor& x,
                  const LossSpec& loss);
LossGradient loss_and_input_gradient(const MicroNet& net, const ImageTensor& x,
                                     const LossSpec& loss);
ImageTensor input_gradient(const MicroNet& net, const ImageTensor& x,
                           const LossSpec& loss);

// JSON description: layer list, class count, interpolation mode and seed.
// Weights are reproduced from the seed, so the document fully determines the
// network.
MicroNet parse_micronet(const std::string& json_text);
MicroNet load_micronet(const std::string& path);
std::string micronet_to_json(const MicroNet& net);
void save_micronet(const std::string& path, const MicroNet& net);

// The benchmark architecture: three streams at full, half and quarter
// resolution fused by sum into a 1x1 conv head, feature taps 1..6 after each
// conv stage.
std::vector<LayerSpec> desk_layers();
MicroNet desk_net(std::uint64_t seed, Interp mode, int num_classes = 4);

}  // namespace freqdef

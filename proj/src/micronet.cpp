#include "freqdef/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "freqdef/common.hpp"
#include "freqdef/image_io.hpp"

namespace freqdef {

using nlohmann::json;

Interp interp_from_name(std::string_view name) {
  if (name == "nearest") return Interp::kNearest;
  if (name == "bilinear") return Interp::kBilinear;
  if (name == "bicubic") return Interp::kBicubic;
  if (name == "area") return Interp::kArea;
  throw SpecError("unknown interpolation mode: " + std::string(name));
}

std::string_view interp_name(Interp mode) {
  switch (mode) {
    case Interp::kNearest: return "nearest";
    case Interp::kBilinear: return "bilinear";
    case Interp::kBicubic: return "bicubic";
    case Interp::kArea: return "area";
  }
  throw SpecError("bad interpolation enum");
}

namespace {

// Up to four source samples contributing to one output coordinate.
struct Tap {
  int idx[4];
  double w[4];
  int n = 0;
};

double cubic_kernel(double s) {
  constexpr double a = -0.5;  // Catmull-Rom
  s = std::abs(s);
  if (s <= 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
  if (s < 2.0) return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a;
  return 0.0;
}

int clamp_index(long v, Index n) {
  return static_cast<int>(std::clamp(v, 0L, static_cast<long>(n - 1)));
}

void push_tap(Tap& t, int idx, double w) {
  for (int i = 0; i < t.n; ++i)
    if (t.idx[i] == idx) {
      t.w[i] += w;  // clamped neighbors collapse onto the edge sample
      return;
    }
  t.idx[t.n] = idx;
  t.w[t.n] = w;
  ++t.n;
}

std::vector<Tap> make_taps(Index in, Index out, Interp mode) {
  std::vector<Tap> taps(out);
  for (Index o = 0; o < out; ++o) {
    Tap& t = taps[o];
    switch (mode) {
      case Interp::kNearest: {
        push_tap(t, clamp_index(o * in / out, in), 1.0);
        break;
      }
      case Interp::kBilinear: {
        const double x = (o + 0.5) * static_cast<double>(in) / out - 0.5;
        const long i0 = static_cast<long>(std::floor(x));
        const double frac = x - static_cast<double>(i0);
        push_tap(t, clamp_index(i0, in), 1.0 - frac);
        push_tap(t, clamp_index(i0 + 1, in), frac);
        break;
      }
      case Interp::kBicubic: {
        const double x = (o + 0.5) * static_cast<double>(in) / out - 0.5;
        const long i0 = static_cast<long>(std::floor(x));
        const double frac = x - static_cast<double>(i0);
        for (long m = -1; m <= 2; ++m)
          push_tap(t, clamp_index(i0 + m, in),
                   cubic_kernel(frac - static_cast<double>(m)));
        break;
      }
      case Interp::kArea: {
        const long lo = o * in / out;
        const long hi = ((o + 1) * in + out - 1) / out;  // ceil
        const double w = 1.0 / static_cast<double>(hi - lo);
        for (long i = lo; i < hi; ++i) push_tap(t, clamp_index(i, in), w);
        break;
      }
    }
  }
  return taps;
}

void check_resample_args(const ImageTensor& x, int scale, ResampleDir dir) {
  if (scale != 2 && scale != 4)
    throw SpecError("resample scale must be 2 or 4");
  if (dir == ResampleDir::kDown &&
      (x.height() % scale != 0 || x.width() % scale != 0))
    throw ShapeError("downsampling needs dimensions divisible by the scale");
}

}  // namespace

ImageTensor resample(const ImageTensor& x, int scale, ResampleDir dir,
                     Interp mode) {
  check_resample_args(x, scale, dir);
  const Index out_h = dir == ResampleDir::kUp ? x.height() * scale
                                              : x.height() / scale;
  const Index out_w = dir == ResampleDir::kUp ? x.width() * scale
                                              : x.width() / scale;
  const auto taps_h = make_taps(x.height(), out_h, mode);
  const auto taps_w = make_taps(x.width(), out_w, mode);
  const Index C = x.channels();

  ImageTensor rows(out_h, x.width(), C);
  for (Index h = 0; h < out_h; ++h) {
    const Tap& t = taps_h[h];
    for (Index w = 0; w < x.width(); ++w)
      for (Index c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < t.n; ++i) acc += t.w[i] * x(t.idx[i], w, c);
        rows(h, w, c) = acc;
      }
  }
  ImageTensor out(out_h, out_w, C);
  for (Index w = 0; w < out_w; ++w) {
    const Tap& t = taps_w[w];
    for (Index h = 0; h < out_h; ++h)
      for (Index c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < t.n; ++i) acc += t.w[i] * rows(h, t.idx[i], c);
        out(h, w, c) = acc;
      }
  }
  return out;
}

ImageTensor resample_adjoint(const ImageTensor& grad, int scale,
                             ResampleDir dir, Interp mode, Index in_height,
                             Index in_width) {
  const Index out_h = dir == ResampleDir::kUp ? in_height * scale
                                              : in_height / scale;
  const Index out_w = dir == ResampleDir::kUp ? in_width * scale
                                              : in_width / scale;
  if (grad.height() != out_h || grad.width() != out_w)
    throw ShapeError("resample_adjoint: gradient shape mismatch");
  const auto taps_h = make_taps(in_height, out_h, mode);
  const auto taps_w = make_taps(in_width, out_w, mode);
  const Index C = grad.channels();

  ImageTensor cols(out_h, in_width, C);
  for (Index w = 0; w < out_w; ++w) {
    const Tap& t = taps_w[w];
    for (Index h = 0; h < out_h; ++h)
      for (Index c = 0; c < C; ++c) {
        const double g = grad(h, w, c);
        for (int i = 0; i < t.n; ++i) cols(h, t.idx[i], c) += t.w[i] * g;
      }
  }
  ImageTensor out(in_height, in_width, C);
  for (Index h = 0; h < out_h; ++h) {
    const Tap& t = taps_h[h];
    for (Index w = 0; w < in_width; ++w)
      for (Index c = 0; c < C; ++c) {
        const double g = cols(h, w, c);
        for (int i = 0; i < t.n; ++i) out(t.idx[i], w, c) += t.w[i] * g;
      }
  }
  return out;
}

LayerSpec LayerSpec::conv2d(int kernel, int in_channels, int out_channels,
                            int stride, std::vector<int> inputs) {
  LayerSpec s;
  s.kind = Kind::kConv2d;
  s.kernel = kernel;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.stride = stride;
  s.inputs = std::move(inputs);
  return s;
}

LayerSpec LayerSpec::relu(std::vector<int> inputs) {
  LayerSpec s;
  s.kind = Kind::kRelu;
  s.inputs = std::move(inputs);
  return s;
}

LayerSpec LayerSpec::resample_layer(int scale, ResampleDir dir,
                                    std::vector<int> inputs) {
  LayerSpec s;
  s.kind = Kind::kResample;
  s.scale = scale;
  s.direction = dir;
  s.inputs = std::move(inputs);
  return s;
}

LayerSpec LayerSpec::softmax(std::vector<int> inputs) {
  LayerSpec s;
  s.kind = Kind::kSoftmax;
  s.inputs = std::move(inputs);
  return s;
}

LayerSpec LayerSpec::feature_tap(int id, std::vector<int> inputs) {
  LayerSpec s;
  s.kind = Kind::kFeatureTap;
  s.tap_id = id;
  s.inputs = std::move(inputs);
  return s;
}

LossSpec LossSpec::l2_class_scores(int target_class) {
  LossSpec l;
  l.kind = Kind::kL2ClassScores;
  l.target_class = target_class;
  return l;
}

LossSpec LossSpec::cross_entropy(ClassMap mask) {
  LossSpec l;
  l.kind = Kind::kCrossEntropy;
  l.target_mask = std::move(mask);
  return l;
}

LossSpec LossSpec::negative_log_activation_product(std::vector<int> taps) {
  LossSpec l;
  l.kind = Kind::kNegLogActivationProduct;
  l.taps = std::move(taps);
  return l;
}

MicroNet::MicroNet(std::vector<LayerSpec> layers, int num_classes, Interp mode,
                   std::uint64_t seed)
    : layers_(std::move(layers)),
      num_classes_(num_classes),
      mode_(mode),
      seed_(seed) {
  if (num_classes_ < 2) throw SpecError("need at least two classes");
  std::set<int> seen_taps;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    const LayerSpec& l = layers_[j];
    for (int idx : l.inputs)
      if (idx < -1 || idx >= static_cast<int>(j))
        throw SpecError("layer inputs must reference earlier nodes");
    switch (l.kind) {
      case LayerSpec::Kind::kConv2d:
        if (l.kernel < 1 || l.kernel % 2 == 0)
          throw SpecError("conv kernel must be odd and positive");
        if (l.in_channels < 1 || l.out_channels < 1 || l.stride < 1)
          throw SpecError("conv channel counts and stride must be positive");
        break;
      case LayerSpec::Kind::kResample:
        if (l.scale != 2 && l.scale != 4)
          throw SpecError("resample scale must be 2 or 4");
        break;
      case LayerSpec::Kind::kFeatureTap:
        if (l.tap_id < 1) throw SpecError("feature tap ids start at 1");
        if (!seen_taps.insert(l.tap_id).second)
          throw SpecError("duplicate feature tap id");
        break;
      default:
        break;
    }
  }
  // Weight draw order is part of the network contract: layers in order, each
  // conv filled (out, in, ky, kx) fastest-last.
  Rng rng(seed_);
  weights_.resize(layers_.size());
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    const LayerSpec& l = layers_[j];
    if (l.kind != LayerSpec::Kind::kConv2d) continue;
    const Index count = static_cast<Index>(l.out_channels) * l.in_channels *
                        l.kernel * l.kernel;
    const double scale =
        1.0 / std::sqrt(static_cast<double>(l.in_channels) * l.kernel * l.kernel);
    Eigen::ArrayXd w(count);
    for (Index i = 0; i < count; ++i) w[i] = rng.uniform(-0.5, 0.5) * scale;
    weights_[j] = std::move(w);
  }
}

std::vector<int> MicroNet::tap_ids() const {
  std::vector<int> ids;
  for (const auto& l : layers_)
    if (l.kind == LayerSpec::Kind::kFeatureTap) ids.push_back(l.tap_id);
  return ids;
}

bool MicroNet::has_tap(int id) const {
  for (const auto& l : layers_)
    if (l.kind == LayerSpec::Kind::kFeatureTap && l.tap_id == id) return true;
  return false;
}

namespace {

ImageTensor conv2d_forward(const ImageTensor& x, const LayerSpec& l,
                           const Eigen::ArrayXd& wts) {
  if (x.channels() != l.in_channels)
    throw ShapeError("conv2d: channel count mismatch");
  const Index k = l.kernel, pad = k / 2, st = l.stride;
  if (x.height() + 2 * pad < k || x.width() + 2 * pad < k)
    throw ShapeError("conv2d: input smaller than kernel");
  const Index out_h = (x.height() + 2 * pad - k) / st + 1;
  const Index out_w = (x.width() + 2 * pad - k) / st + 1;
  ImageTensor y(out_h, out_w, l.out_channels);
  const Index in_c = l.in_channels;
  for (Index h = 0; h < out_h; ++h)
    for (Index w = 0; w < out_w; ++w)
      for (Index o = 0; o < l.out_channels; ++o) {
        double acc = 0.0;
        for (Index i = 0; i < in_c; ++i)
          for (Index a = 0; a < k; ++a) {
            const Index ih = h * st + a - pad;
            if (ih < 0 || ih >= x.height()) continue;
            for (Index b = 0; b < k; ++b) {
              const Index iw = w * st + b - pad;
              if (iw < 0 || iw >= x.width()) continue;
              acc += x(ih, iw, i) * wts[((o * in_c + i) * k + a) * k + b];
            }
          }
        y(h, w, o) = acc;
      }
  return y;
}

ImageTensor conv2d_backward(const ImageTensor& g, const ImageTensor& x_shape,
                            const LayerSpec& l, const Eigen::ArrayXd& wts) {
  const Index k = l.kernel, pad = k / 2, st = l.stride;
  const Index in_c = l.in_channels;
  ImageTensor gin(x_shape.height(), x_shape.width(), in_c);
  for (Index h = 0; h < g.height(); ++h)
    for (Index w = 0; w < g.width(); ++w)
      for (Index o = 0; o < l.out_channels; ++o) {
        const double go = g(h, w, o);
        if (go == 0.0) continue;
        for (Index i = 0; i < in_c; ++i)
          for (Index a = 0; a < k; ++a) {
            const Index ih = h * st + a - pad;
            if (ih < 0 || ih >= gin.height()) continue;
            for (Index b = 0; b < k; ++b) {
              const Index iw = w * st + b - pad;
              if (iw < 0 || iw >= gin.width()) continue;
              gin(ih, iw, i) += go * wts[((o * in_c + i) * k + a) * k + b];
            }
          }
      }
  return gin;
}

ImageTensor softmax_forward(const ImageTensor& x) {
  ImageTensor y = x;
  const Index C = x.channels();
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w) {
      double hi = x(h, w, 0);
      for (Index c = 1; c < C; ++c) hi = std::max(hi, x(h, w, c));
      double total = 0.0;
      for (Index c = 0; c < C; ++c) {
        const double e = std::exp(x(h, w, c) - hi);
        y(h, w, c) = e;
        total += e;
      }
      for (Index c = 0; c < C; ++c) y(h, w, c) /= total;
    }
  return y;
}

ImageTensor softmax_backward(const ImageTensor& g, const ImageTensor& y) {
  ImageTensor gin = zeros_like(g);
  const Index C = g.channels();
  for (Index h = 0; h < g.height(); ++h)
    for (Index w = 0; w < g.width(); ++w) {
      double dot = 0.0;
      for (Index c = 0; c < C; ++c) dot += g(h, w, c) * y(h, w, c);
      for (Index c = 0; c < C; ++c)
        gin(h, w, c) = y(h, w, c) * (g(h, w, c) - dot);
    }
  return gin;
}

struct Trace {
  std::vector<ImageTensor> outputs;
  std::vector<ImageTensor> summed_inputs;
};

std::vector<int> input_indices(const LayerSpec& l, int j) {
  if (!l.inputs.empty()) return l.inputs;
  return {j - 1};  // j == 0 yields -1, the image
}

Trace run_forward(const MicroNet& net, const ImageTensor& x) {
  Trace tr;
  const auto& layers = net.layers();
  tr.outputs.reserve(layers.size());
  tr.summed_inputs.reserve(layers.size());
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const LayerSpec& l = layers[j];
    ImageTensor in;
    bool first = true;
    for (int idx : input_indices(l, static_cast<int>(j))) {
      const ImageTensor& src = idx < 0 ? x : tr.outputs[idx];
      if (first) {
        in = src;
        first = false;
      } else {
        require_same_shape(in, src, "layer input sum");
        in.array() += src.array();
      }
    }
    ImageTensor out;
    switch (l.kind) {
      case LayerSpec::Kind::kConv2d:
        out = conv2d_forward(in, l, net.weights(static_cast<int>(j)));
        break;
      case LayerSpec::Kind::kRelu:
        out = ImageTensor(in.height(), in.width(), in.channels(),
                          in.array().max(0.0));
        break;
      case LayerSpec::Kind::kResample:
        out = resample(in, l.scale, l.direction, net.interpolation());
        break;
      case LayerSpec::Kind::kSoftmax:
        out = softmax_forward(in);
        break;
      case LayerSpec::Kind::kFeatureTap:
        out = in;
        break;
    }
    tr.summed_inputs.push_back(std::move(in));
    tr.outputs.push_back(std::move(out));
  }
  return tr;
}

// Propagates the per-node output gradients in `node_grads` back to the image.
ImageTensor run_backward(const MicroNet& net, const ImageTensor& x,
                         const Trace& tr,
                         std::vector<ImageTensor>& node_grads) {
  const auto& layers = net.layers();
  ImageTensor image_grad = zeros_like(x);
  for (int j = static_cast<int>(layers.size()) - 1; j >= 0; --j) {
    if (node_grads[j].size() == 0) continue;
    const LayerSpec& l = layers[j];
    const ImageTensor& g = node_grads[j];
    ImageTensor gin;
    switch (l.kind) {
      case LayerSpec::Kind::kConv2d:
        gin = conv2d_backward(g, tr.summed_inputs[j], l, net.weights(j));
        break;
      case LayerSpec::Kind::kRelu:
        gin = ImageTensor(
            g.height(), g.width(), g.channels(),
            g.array() * (tr.outputs[j].array() > 0.0).cast<double>());
        break;
      case LayerSpec::Kind::kResample:
        gin = resample_adjoint(g, l.scale, l.direction, net.interpolation(),
                               tr.summed_inputs[j].height(),
                               tr.summed_inputs[j].width());
        break;
      case LayerSpec::Kind::kSoftmax:
        gin = softmax_backward(g, tr.outputs[j]);
        break;
      case LayerSpec::Kind::kFeatureTap:
        gin = g;
        break;
    }
    for (int idx : input_indices(l, j)) {
      ImageTensor& dst = idx < 0 ? image_grad : node_grads[idx];
      if (dst.size() == 0)
        dst = gin;
      else
        dst.array() += gin.array();
    }
  }
  return image_grad;
}

constexpr double kActivationFloor = 1e-12;

// Returns the loss value and fills per-node output gradients.
double seed_loss(const MicroNet& net, const Trace& tr, const LossSpec& loss,
                 std::vector<ImageTensor>& node_grads, bool want_grads) {
  const auto& layers = net.layers();
  if (layers.empty()) throw SpecError("loss needs a non-empty network");
  const int last = static_cast<int>(layers.size()) - 1;
  const ImageTensor& y = tr.outputs[last];

  switch (loss.kind) {
    case LossSpec::Kind::kL2ClassScores: {
      if (loss.target_class < 0 || loss.target_class >= y.channels())
        throw SpecError("loss target class is not a network class");
      double sq = 0.0;
      for (Index h = 0; h < y.height(); ++h)
        for (Index w = 0; w < y.width(); ++w) {
          const double v = y(h, w, loss.target_class);
          sq += v * v;
        }
      const double value = std::sqrt(sq);
      if (want_grads && value > 0.0) {
        ImageTensor g = zeros_like(y);
        for (Index h = 0; h < y.height(); ++h)
          for (Index w = 0; w < y.width(); ++w)
            g(h, w, loss.target_class) = y(h, w, loss.target_class) / value;
        node_grads[last] = std::move(g);
      }
      return value;
    }
    case LossSpec::Kind::kCrossEntropy: {
      if (loss.target_mask.rows() != y.height() ||
          loss.target_mask.cols() != y.width())
        throw ShapeError("cross entropy mask shape mismatch");
      const double inv = 1.0 / static_cast<double>(y.height() * y.width());
      double value = 0.0;
      ImageTensor g = zeros_like(y);
      for (Index h = 0; h < y.height(); ++h)
        for (Index w = 0; w < y.width(); ++w) {
          const int m = loss.target_mask(h, w);
          if (m < 0 || m >= y.channels())
            throw SpecError("cross entropy mask class out of range");
          const double p = std::max(y(h, w, m), kActivationFloor);
          value -= std::log(p) * inv;
          // Floored probabilities are flat in y, so their gradient is zero.
          if (y(h, w, m) >= kActivationFloor) g(h, w, m) = -inv / p;
        }
      if (want_grads) node_grads[last] = std::move(g);
      return value;
    }
    case LossSpec::Kind::kNegLogActivationProduct: {
      if (loss.taps.empty()) throw SpecError("loss needs at least one tap");
      double value = 0.0;
      for (int id : loss.taps) {
        int node = -1;
        for (std::size_t j = 0; j < layers.size(); ++j)
          if (layers[j].kind == LayerSpec::Kind::kFeatureTap &&
              layers[j].tap_id == id)
            node = static_cast<int>(j);
        if (node < 0) throw SpecError("loss references an unknown feature tap");
        const ImageTensor& f = tr.outputs[node];
        const double norm = std::sqrt(f.array().square().sum());
        value -= std::log(kActivationFloor + norm);
        if (want_grads && norm > 0.0) {
          const double coef = -1.0 / (norm * (kActivationFloor + norm));
          ImageTensor g(f.height(), f.width(), f.channels(),
                        f.array() * coef);
          if (node_grads[node].size() == 0)
            node_grads[node] = std::move(g);
          else
            node_grads[node].array() += g.array();
        }
      }
      return value;
    }
  }
  throw SpecError("bad loss kind");
}

}  // namespace

ForwardResult forward(const MicroNet& net, const ImageTensor& x) {
  if (net.layers().empty()) return {x, {}};
  Trace tr = run_forward(net, x);
  ForwardResult r;
  const auto& layers = net.layers();
  for (std::size_t j = 0; j < layers.size(); ++j)
    if (layers[j].kind == LayerSpec::Kind::kFeatureTap)
      r.taps.emplace_back(layers[j].tap_id, tr.outputs[j]);
  r.output = std::move(tr.outputs.back());
  return r;
}

ClassMap argmax_map(const ImageTensor& scores) {
  ClassMap m(scores.height(), scores.width());
  for (Index h = 0; h < scores.height(); ++h)
    for (Index w = 0; w < scores.width(); ++w) {
      int best = 0;
      for (Index c = 1; c < scores.channels(); ++c)
        if (scores(h, w, c) > scores(h, w, best)) best = static_cast<int>(c);
      m(h, w) = best;
    }
  return m;
}

ClassMap predict(const MicroNet& net, const ImageTensor& x) {
  return argmax_map(forward(net, x).output);
}

double loss_value(const MicroNet& net, const ImageTensor& x,
                  const LossSpec& loss) {
  Trace tr = run_forward(net, x);
  std::vector<ImageTensor> grads(net.layers().size());
  return seed_loss(net, tr, loss, grads, false);
}

LossGradient loss_and_input_gradient(const MicroNet& net, const ImageTensor& x,
                                     const LossSpec& loss) {
  Trace tr = run_forward(net, x);
  std::vector<ImageTensor> grads(net.layers().size());
  LossGradient r;
  r.value = seed_loss(net, tr, loss, grads, true);
  r.gradient = run_backward(net, x, tr, grads);
  return r;
}

ImageTensor input_gradient(const MicroNet& net, const ImageTensor& x,
                           const LossSpec& loss) {
  return loss_and_input_gradient(net, x, loss).gradient;
}

namespace {

json layer_to_json(const LayerSpec& l) {
  json j;
  switch (l.kind) {
    case LayerSpec::Kind::kConv2d:
      j["kind"] = "conv2d";
      j["kernel"] = l.kernel;
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["stride"] = l.stride;
      break;
    case LayerSpec::Kind::kRelu:
      j["kind"] = "relu";
      break;
    case LayerSpec::Kind::kResample:
      j["kind"] = "resample";
      j["scale"] = l.scale;
      j["direction"] = l.direction == ResampleDir::kUp ? "up" : "down";
      break;
    case LayerSpec::Kind::kSoftmax:
      j["kind"] = "softmax";
      break;
    case LayerSpec::Kind::kFeatureTap:
      j["kind"] = "feature_tap";
      j["id"] = l.tap_id;
      break;
  }
  if (!l.inputs.empty()) j["inputs"] = l.inputs;
  return j;
}

LayerSpec layer_from_json(const json& j) {
  if (!j.contains("kind")) throw SpecError("layer without a kind");
  const std::string kind = j.at("kind").get<std::string>();
  LayerSpec l;
  if (kind == "conv2d") {
    l = LayerSpec::conv2d(j.at("kernel").get<int>(),
                          j.at("in_channels").get<int>(),
                          j.at("out_channels").get<int>(),
                          j.value("stride", 1));
  } else if (kind == "relu") {
    l = LayerSpec::relu();
  } else if (kind == "resample") {
    const std::string dir = j.at("direction").get<std::string>();
    if (dir != "up" && dir != "down")
      throw SpecError("resample direction must be up or down");
    l = LayerSpec::resample_layer(
        j.at("scale").get<int>(),
        dir == "up" ? ResampleDir::kUp : ResampleDir::kDown);
  } else if (kind == "softmax") {
    l = LayerSpec::softmax();
  } else if (kind == "feature_tap") {
    l = LayerSpec::feature_tap(j.at("id").get<int>());
  } else {
    throw SpecError("unknown layer kind: " + kind);
  }
  if (j.contains("inputs")) l.inputs = j.at("inputs").get<std::vector<int>>();
  return l;
}

MicroNet net_from_json(const json& doc) {
  if (!doc.is_object()) throw SpecError("network document must be an object");
  std::vector<LayerSpec> layers;
  for (const auto& lj : doc.at("layers")) layers.push_back(layer_from_json(lj));
  return MicroNet(
      std::move(layers), doc.at("num_classes").get<int>(),
      interp_from_name(doc.at("interpolation").get<std::string>()),
      doc.at("seed").get<std::uint64_t>());
}

}  // namespace

MicroNet parse_micronet(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SpecError(std::string("network JSON parse error: ") + e.what());
  }
  return net_from_json(doc);
}

MicroNet load_micronet(const std::string& path) {
  return parse_micronet(read_file(path));
}

std::string micronet_to_json(const MicroNet& net) {
  json doc;
  doc["seed"] = net.seed();
  doc["num_classes"] = net.num_classes();
  doc["interpolation"] = std::string(interp_name(net.interpolation()));
  doc["layers"] = json::array();
  for (const auto& l : net.layers()) doc["layers"].push_back(layer_to_json(l));
  return doc.dump(2) + "\n";
}

void save_micronet(const std::string& path, const MicroNet& net) {
  atomic_write(path, micronet_to_json(net));
}

std::vector<LayerSpec> desk_layers() {
  std::vector<LayerSpec> L;
  // Full-resolution stream.
  L.push_back(LayerSpec::conv2d(3, 3, 8, 1, {-1}));  // 0
  L.push_back(LayerSpec::relu());                    // 1
  L.push_back(LayerSpec::feature_tap(1));            // 2
  // Half-resolution stream.
  L.push_back(LayerSpec::resample_layer(2, ResampleDir::kDown, {-1}));  // 3
  L.push_back(LayerSpec::conv2d(3, 3, 8));                              // 4
  L.push_back(LayerSpec::relu());                                       // 5
  L.push_back(LayerSpec::feature_tap(2));                               // 6
  L.push_back(LayerSpec::conv2d(3, 8, 8));                              // 7
  L.push_back(LayerSpec::relu());                                       // 8
  L.push_back(LayerSpec::feature_tap(3));                               // 9
  L.push_back(LayerSpec::resample_layer(2, ResampleDir::kUp));          // 10
  // Quarter-resolution stream.
  L.push_back(LayerSpec::resample_layer(4, ResampleDir::kDown, {-1}));  // 11
  L.push_back(LayerSpec::conv2d(3, 3, 8));                              // 12
  L.push_back(LayerSpec::relu());                                       // 13
  L.push_back(LayerSpec::feature_tap(4));                               // 14
  L.push_back(LayerSpec::conv2d(3, 8, 8));                              // 15
  L.push_back(LayerSpec::relu());                                       // 16
  L.push_back(LayerSpec::feature_tap(5));                               // 17
  L.push_back(LayerSpec::resample_layer(4, ResampleDir::kUp));          // 18
  // Sum fusion into the classifier head.
  L.push_back(LayerSpec::conv2d(1, 8, 4, 1, {2, 10, 18}));  // 19
  L.push_back(LayerSpec::feature_tap(6));                   // 20
  L.push_back(LayerSpec::softmax());                        // 21
  return L;
}

MicroNet desk_net(std::uint64_t seed, Interp mode, int num_classes) {
  auto layers = desk_layers();
  if (num_classes != 4) {
    for (auto& l : layers)
      if (l.kind == LayerSpec::Kind::kConv2d && l.out_channels == 4)
        l.out_channels = num_classes;
  }
  return MicroNet(std::move(layers), num_classes, mode, seed);
}

}  // namespace freqdef

#include "freqdef/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <json.hpp>

#include "freqdef/common.hpp"
#include "freqdef/image_io.hpp"

namespace freqdef {

AttackKind attack_kind_from_name(std::string_view name) {
  if (name == "mfgsm") return AttackKind::kMfgsm;
  if (name == "metzen_llm") return AttackKind::kMetzenLlm;
  if (name == "iterative_mirror") return AttackKind::kIterativeMirror;
  if (name == "mopuri") return AttackKind::kMopuri;
  throw SpecError("unknown attack kind: " + std::string(name));
}

std::string_view attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kMfgsm: return "mfgsm";
    case AttackKind::kMetzenLlm: return "metzen_llm";
    case AttackKind::kIterativeMirror: return "iterative_mirror";
    case AttackKind::kMopuri: return "mopuri";
  }
  throw SpecError("invalid attack kind");
}

NormKind norm_from_name(std::string_view name) {
  if (name == "linf") return NormKind::kLinf;
  if (name == "l2") return NormKind::kL2;
  throw SpecError("unknown norm: " + std::string(name));
}

std::string_view norm_name(NormKind norm) {
  return norm == NormKind::kLinf ? "linf" : "l2";
}

AttackSpec AttackSpec::defaults(AttackKind kind) {
  AttackSpec spec;
  spec.kind = kind;
  switch (kind) {
    case AttackKind::kMfgsm:
      spec.momentum = 10.0;
      break;
    case AttackKind::kMetzenLlm:
    case AttackKind::kIterativeMirror:
      spec.momentum = 0.0;
      break;
    case AttackKind::kMopuri:
      spec.momentum = 1.0;
      spec.taps = {3};
      break;
  }
  return spec;
}

std::string AttackSpec::effective_label() const {
  return label.empty() ? std::string(attack_kind_name(kind)) : label;
}

void AttackSpec::validate() const {
  if (!(epsilon > 0.0)) throw SpecError("attack epsilon must be positive");
  if (iterations < 1) throw SpecError("attack needs at least one iteration");
  if (momentum < 0.0) throw SpecError("attack momentum must be nonnegative");
  const bool targeted =
      kind == AttackKind::kMfgsm || kind == AttackKind::kMetzenLlm;
  if (targeted && target_class < 0)
    throw SpecError("targeted attack requires a target class");
  if (kind == AttackKind::kMopuri && taps.empty())
    throw SpecError("mopuri requires at least one feature tap");
}

AttackSpec parse_attack(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad attack document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind"))
    throw SpecError("attack document must be an object with a kind");
  AttackSpec spec =
      AttackSpec::defaults(attack_kind_from_name(doc["kind"].get<std::string>()));
  try {
    if (doc.contains("epsilon")) spec.epsilon = doc["epsilon"].get<double>();
    if (doc.contains("norm"))
      spec.norm = norm_from_name(doc["norm"].get<std::string>());
    if (doc.contains("iterations"))
      spec.iterations = doc["iterations"].get<int>();
    if (doc.contains("momentum")) spec.momentum = doc["momentum"].get<double>();
    if (doc.contains("target_class"))
      spec.target_class = doc["target_class"].get<int>();
    if (doc.contains("taps")) spec.taps = doc["taps"].get<std::vector<int>>();
    if (doc.contains("label")) spec.label = doc["label"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad attack field: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string attack_to_json(const AttackSpec& spec) {
  nlohmann::json doc;
  doc["kind"] = std::string(attack_kind_name(spec.kind));
  doc["epsilon"] = spec.epsilon;
  doc["norm"] = std::string(norm_name(spec.norm));
  doc["iterations"] = spec.iterations;
  doc["momentum"] = spec.momentum;
  if (spec.target_class >= 0) doc["target_class"] = spec.target_class;
  if (!spec.taps.empty()) doc["taps"] = spec.taps;
  if (!spec.label.empty()) doc["label"] = spec.label;
  return doc.dump(2);
}

namespace {

struct StepEval {
  double value = 0.0;
  ImageTensor gradient;
};

using LossFn = std::function<StepEval(const ImageTensor&)>;

struct DescentPlan {
  ImageTensor start;   // first iterate
  ImageTensor center;  // the eps-ball is around this point
  double epsilon = 0.0;
  NormKind norm = NormKind::kLinf;
  int iterations = 1;
  double momentum = 0.0;
  bool clip_gray = true;  // keep iterates inside [0, 255]
};

ImageTensor project_ball(const ImageTensor& r, NormKind norm, double eps) {
  if (norm == NormKind::kLinf) return clip(r, -eps, eps);
  const double n = l2_norm(r);
  if (n <= eps) return r;
  ImageTensor out = r;
  out.array() *= eps / n;
  return out;
}

// Shared iteration for every attack: accumulate the L1-normalized loss
// gradient with momentum, step against it, then pull the perturbation back
// onto the ball and the iterate into the gray range.
Perturbation momentum_signed_descent(const LossFn& loss,
                                     const DescentPlan& plan,
                                     AttackSpec spec) {
  const double alpha = plan.epsilon / plan.iterations;
  ImageTensor x = plan.start;
  ImageTensor g = zeros_like(x);
  for (int t = 0; t < plan.iterations; ++t) {
    const StepEval eval = loss(x);
    const double n1 = l1_norm(eval.gradient);
    if (t == 0 && n1 == 0.0) {
      Perturbation out{x - plan.center, std::move(spec), true};
      return out;
    }
    g.array() *= plan.momentum;
    if (n1 > 0.0) g.array() += eval.gradient.array() / n1;
    if (plan.norm == NormKind::kLinf) {
      x = x - alpha * sign(g);
    } else {
      const double n2 = l2_norm(g);
      if (n2 > 0.0) x = x - (alpha / n2) * g;
    }
    ImageTensor r = project_ball(x - plan.center, plan.norm, plan.epsilon);
    x = plan.center + r;
    if (plan.clip_gray) x = clip(x, 0.0, 255.0);
  }
  return Perturbation{x - plan.center, std::move(spec), false};
}

Perturbation descend_on_image(const MicroNet& net, const ImageTensor& x,
                              const AttackSpec& spec, const LossSpec& loss) {
  DescentPlan plan;
  plan.start = x;
  plan.center = x;
  plan.epsilon = spec.epsilon;
  plan.norm = spec.norm;
  plan.iterations = spec.iterations;
  plan.momentum = spec.momentum;
  const LossFn fn = [&](const ImageTensor& xt) {
    LossGradient lg = loss_and_input_gradient(net, xt, loss);
    return StepEval{lg.value, std::move(lg.gradient)};
  };
  return momentum_signed_descent(fn, plan, spec);
}

ClassMap cross_entropy_target(const MicroNet& net, const ImageTensor& x,
                              const AttackSpec& spec) {
  const ClassMap pred = predict(net, x);
  if (spec.kind == AttackKind::kIterativeMirror) return mirrored_mask(pred);
  return nearest_donor_mask(pred, spec.target_class);
}

void require_kind(const AttackSpec& spec, AttackKind kind) {
  if (spec.kind != kind)
    throw SpecError(std::string("attack spec kind must be ") +
                    std::string(attack_kind_name(kind)));
}

}  // namespace

ClassMap nearest_donor_mask(const ClassMap& pred, int target_class) {
  const Index H = pred.rows(), W = pred.cols();
  const Index hits = (pred == target_class).count();
  ClassMap out = pred;
  if (hits == 0) return out;
  if (hits == pred.size())
    throw MaskError("every pixel holds the target class; no donor exists");

  // All displacements ordered by squared distance, so per pixel we can stop
  // at the first ring that contains a donor and take its smallest class.
  struct Offset {
    long long d2;
    Index dh, dw;
  };
  std::vector<Offset> offsets;
  offsets.reserve(static_cast<std::size_t>((2 * H - 1) * (2 * W - 1)));
  for (Index dh = -(H - 1); dh < H; ++dh)
    for (Index dw = -(W - 1); dw < W; ++dw) {
      if (dh == 0 && dw == 0) continue;
      offsets.push_back({static_cast<long long>(dh) * dh +
                             static_cast<long long>(dw) * dw,
                         dh, dw});
    }
  std::sort(offsets.begin(), offsets.end(),
            [](const Offset& a, const Offset& b) { return a.d2 < b.d2; });

  for (Index h = 0; h < H; ++h)
    for (Index w = 0; w < W; ++w) {
      if (pred(h, w) != target_class) continue;
      long long best_d2 = -1;
      int best_class = std::numeric_limits<int>::max();
      for (const Offset& o : offsets) {
        if (best_d2 >= 0 && o.d2 > best_d2) break;
        const Index hh = h + o.dh, ww = w + o.dw;
        if (hh < 0 || hh >= H || ww < 0 || ww >= W) continue;
        const int c = pred(hh, ww);
        if (c == target_class) continue;
        best_d2 = o.d2;
        best_class = std::min(best_class, c);
      }
      out(h, w) = best_class;
    }
  return out;
}

ClassMap mirrored_mask(const ClassMap& pred) {
  const Index H = pred.rows(), W = pred.cols();
  ClassMap out(H, W);
  for (Index h = 0; h < H; ++h)
    for (Index w = 0; w < W; ++w) out(h, w) = pred(h, W - 1 - w);
  return out;
}

Perturbation mfgsm(const MicroNet& net, const ImageTensor& x,
                   const AttackSpec& spec) {
  require_kind(spec, AttackKind::kMfgsm);
  spec.validate();
  return descend_on_image(net, x, spec,
                          LossSpec::l2_class_scores(spec.target_class));
}

Perturbation metzen_llm(const MicroNet& net, const ImageTensor& x,
                        const AttackSpec& spec) {
  require_kind(spec, AttackKind::kMetzenLlm);
  spec.validate();
  return descend_on_image(
      net, x, spec, LossSpec::cross_entropy(cross_entropy_target(net, x, spec)));
}

Perturbation iterative_mirror(const MicroNet& net, const ImageTensor& x,
                              const AttackSpec& spec) {
  require_kind(spec, AttackKind::kIterativeMirror);
  spec.validate();
  return descend_on_image(
      net, x, spec, LossSpec::cross_entropy(cross_entropy_target(net, x, spec)));
}

Perturbation mopuri(const MicroNet& net, Index height, Index width,
                    Index channels, const AttackSpec& spec,
                    std::uint64_t seed) {
  require_kind(spec, AttackKind::kMopuri);
  spec.validate();
  for (int tap : spec.taps)
    if (!net.has_tap(tap))
      throw SpecError("mopuri tap " + std::to_string(tap) +
                      " is not present in the network");

  Rng rng(seed);
  ImageTensor r0(height, width, channels);
  for (Index i = 0; i < r0.size(); ++i)
    r0.array()[i] = rng.uniform(-spec.epsilon, spec.epsilon);

  DescentPlan plan;
  plan.start = r0;
  plan.center = zeros_like(r0);
  plan.epsilon = spec.epsilon;
  plan.norm = spec.norm;
  plan.iterations = spec.iterations;
  plan.momentum = spec.momentum;
  plan.clip_gray = false;  // standalone perturbation, not an image
  const LossSpec loss = LossSpec::negative_log_activation_product(spec.taps);
  const LossFn fn = [&](const ImageTensor& rt) {
    LossGradient lg = loss_and_input_gradient(net, rt, loss);
    return StepEval{lg.value, std::move(lg.gradient)};
  };
  return momentum_signed_descent(fn, plan, spec);
}

Perturbation bpda_attack(const MicroNet& net, const Denoiser& defense,
                         const ImageTensor& x, const AttackSpec& spec) {
  require_kind(spec, AttackKind::kMfgsm);
  spec.validate();
  const LossSpec loss = LossSpec::l2_class_scores(spec.target_class);
  DescentPlan plan;
  plan.start = x;
  plan.center = x;
  plan.epsilon = spec.epsilon;
  plan.norm = spec.norm;
  plan.iterations = spec.iterations;
  plan.momentum = spec.momentum;
  const LossFn fn = [&](const ImageTensor& xt) {
    LossGradient lg = loss_and_input_gradient(net, defense(xt), loss);
    return StepEval{lg.value, std::move(lg.gradient)};
  };
  return momentum_signed_descent(fn, plan, spec);
}

Perturbation run_attack(const MicroNet& net, const ImageTensor& x,
                        const AttackSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case AttackKind::kMfgsm: return mfgsm(net, x, spec);
    case AttackKind::kMetzenLlm: return metzen_llm(net, x, spec);
    case AttackKind::kIterativeMirror: return iterative_mirror(net, x, spec);
    case AttackKind::kMopuri:
      return mopuri(net, x.height(), x.width(), x.channels(), spec, seed);
  }
  throw SpecError("invalid attack kind");
}

void save_perturbation(const std::string& path, const ImageTensor& r) {
  std::string bytes = "PERT";
  append_u32(bytes, static_cast<std::uint32_t>(r.height()));
  append_u32(bytes, static_cast<std::uint32_t>(r.width()));
  append_u32(bytes, static_cast<std::uint32_t>(r.channels()));
  for (Index i = 0; i < r.size(); ++i) append_f64(bytes, r.array()[i]);
  atomic_write(path, bytes);
}

ImageTensor load_perturbation(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || bytes.compare(0, 4, "PERT") != 0)
    throw FormatError("not a perturbation file: " + path);
  std::size_t pos = 4;
  const Index H = read_u32(bytes, pos);
  const Index W = read_u32(bytes, pos);
  const Index C = read_u32(bytes, pos);
  if (H <= 0 || W <= 0 || C <= 0)
    throw FormatError("degenerate perturbation shape in " + path);
  const std::size_t need =
      16 + static_cast<std::size_t>(H) * W * C * sizeof(double);
  if (bytes.size() != need)
    throw FormatError("perturbation payload size mismatch in " + path);
  ImageTensor r(H, W, C);
  for (Index i = 0; i < r.size(); ++i) r.array()[i] = read_f64(bytes, pos);
  return r;
}

}  // namespace freqdef

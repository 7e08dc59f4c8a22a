#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "freqdef/attacks.hpp"
#include "freqdef/common.hpp"
#include "freqdef/image_io.hpp"
#include "freqdef/micronet.hpp"

using namespace freqdef;

namespace {

ImageTensor random_image(Index h, Index w, Index c, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor x(h, w, c);
  for (Index i = 0; i < x.size(); ++i) x.array()[i] = rng.uniform(0.0, 255.0);
  return x;
}

// Pass-through network: output and first tap are the input itself.
MicroNet tap_only_net() {
  return MicroNet({LayerSpec::feature_tap(1)}, 2, Interp::kNearest, 1);
}

// Brute-force nearest donor: scan every pixel, keep the lexicographically
// smallest (squared distance, class) pair.
ClassMap oracle_donor(const ClassMap& pred, int tau) {
  const Index H = pred.rows(), W = pred.cols();
  ClassMap out = pred;
  for (Index h = 0; h < H; ++h)
    for (Index w = 0; w < W; ++w) {
      if (pred(h, w) != tau) continue;
      long long bd = std::numeric_limits<long long>::max();
      int bc = std::numeric_limits<int>::max();
      for (Index a = 0; a < H; ++a)
        for (Index b = 0; b < W; ++b) {
          if (pred(a, b) == tau) continue;
          const long long d2 = static_cast<long long>(h - a) * (h - a) +
                               static_cast<long long>(w - b) * (w - b);
          if (d2 < bd || (d2 == bd && pred(a, b) < bc)) {
            bd = d2;
            bc = pred(a, b);
          }
        }
      out(h, w) = bc;
    }
  return out;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("attack spec parsing applies per-kind defaults") {
  const AttackSpec a =
      parse_attack(R"({"kind": "mfgsm", "target_class": 1})");
  CHECK(a.kind == AttackKind::kMfgsm);
  CHECK(a.momentum == 10.0);
  CHECK(a.epsilon == 10.0);
  CHECK(a.iterations == 20);
  CHECK(a.norm == NormKind::kLinf);
  CHECK(a.effective_label() == "mfgsm");

  const AttackSpec m = parse_attack(R"({"kind": "mopuri", "epsilon": 5})");
  CHECK(m.momentum == 1.0);
  CHECK(m.taps == std::vector<int>{3});

  const AttackSpec im = parse_attack(
      R"({"kind": "iterative_mirror", "norm": "l2", "label": "im-l2"})");
  CHECK(im.momentum == 0.0);
  CHECK(im.norm == NormKind::kL2);
  CHECK(im.effective_label() == "im-l2");

  // Round trip keeps every field.
  const AttackSpec b = parse_attack(attack_to_json(a));
  CHECK(b.kind == a.kind);
  CHECK(b.epsilon == a.epsilon);
  CHECK(b.momentum == a.momentum);
  CHECK(b.target_class == a.target_class);
}

TEST_CASE("attack spec validation rejects bad fields") {
  CHECK_THROWS_AS(parse_attack(R"({"kind": "deepfool"})"), SpecError);
  CHECK_THROWS_AS(parse_attack("not json"), SpecError);
  CHECK_THROWS_AS(parse_attack(R"({"epsilon": 3})"), SpecError);
  CHECK_THROWS_AS(
      parse_attack(R"({"kind": "mfgsm", "target_class": 1, "epsilon": 0})"),
      SpecError);
  CHECK_THROWS_AS(
      parse_attack(R"({"kind": "mfgsm", "target_class": 1, "iterations": 0})"),
      SpecError);
  // Targeted kinds need a class; mopuri needs at least one tap.
  CHECK_THROWS_AS(parse_attack(R"({"kind": "mfgsm"})"), SpecError);
  CHECK_THROWS_AS(parse_attack(R"({"kind": "metzen_llm"})"), SpecError);
  CHECK_THROWS_AS(parse_attack(R"({"kind": "mopuri", "taps": []})"), SpecError);
  CHECK_THROWS_AS(
      parse_attack(R"({"kind": "mfgsm", "target_class": 1, "norm": "l7"})"),
      SpecError);
}

TEST_CASE("single signed step against a pass-through network") {
  // One step of size alpha = eps moves every pixel by exactly -eps * sign(x):
  // the loss is the norm of the (sole) class plane, whose gradient carries the
  // sign of x, and x stays far enough from the gray bounds that nothing clips.
  const MicroNet net = tap_only_net();
  Rng rng(5);
  ImageTensor x(4, 4, 1);
  for (Index i = 0; i < x.size(); ++i) x.array()[i] = rng.uniform(20.0, 200.0);

  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.epsilon = 8.0;
  spec.iterations = 1;
  spec.momentum = 0.0;
  spec.target_class = 0;
  const Perturbation p = mfgsm(net, x, spec);
  CHECK_FALSE(p.zero_gradient);
  for (Index i = 0; i < x.size(); ++i) CHECK(p.r.array()[i] == -8.0);
  CHECK(linf_norm(p.r) == 8.0);
}

TEST_CASE("vanishing first gradient returns a flagged zero perturbation") {
  // relu kills the all-negative input, so the class-score norm is zero and no
  // descent direction exists at the very first step.
  const MicroNet net = MicroNet({LayerSpec::relu()}, 2, Interp::kNearest, 1);
  const ImageTensor x = ImageTensor::constant(3, 3, 1, -5.0);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.target_class = 0;
  const Perturbation p = mfgsm(net, x, spec);
  CHECK(p.zero_gradient);
  CHECK((p.r.array() == 0.0).all());
}

TEST_CASE("zero gradient after the first step continues on momentum") {
  // x = 3 with alpha = 5: the first step lands on the gray floor where the
  // relu gradient vanishes, the second keeps pushing along the accumulated
  // direction and the floor holds the iterate at 0, so r = -3 exactly.
  const MicroNet net = MicroNet({LayerSpec::relu()}, 2, Interp::kNearest, 1);
  const ImageTensor x = ImageTensor::constant(2, 2, 1, 3.0);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.epsilon = 10.0;
  spec.iterations = 2;
  spec.target_class = 0;
  const Perturbation p = mfgsm(net, x, spec);
  CHECK_FALSE(p.zero_gradient);
  for (Index i = 0; i < p.r.size(); ++i) CHECK(p.r.array()[i] == -3.0);
}

TEST_CASE("momentum descent reaches the reachable-set optimum region") {
  // Two steps of size alpha over a 2x2 single-channel image: the final iterate
  // must be one of the 5^4 points x + alpha*v, v in {-2..2}^4 (after the
  // shared clip), and its loss must not beat the exhaustive minimum.
  const MicroNet net =
      MicroNet({LayerSpec::conv2d(1, 1, 2), LayerSpec::softmax()}, 2,
               Interp::kNearest, 7);
  ImageTensor x(2, 2, 1);
  x(0, 0, 0) = 0.5;
  x(0, 1, 0) = 1.2;
  x(1, 0, 0) = 2.0;
  x(1, 1, 0) = 2.8;
  const LossSpec loss = LossSpec::l2_class_scores(0);
  const double j_clean = loss_value(net, x, loss);

  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.epsilon = 0.6;
  spec.iterations = 2;
  spec.target_class = 0;
  const Perturbation p = mfgsm(net, x, spec);
  const double j_adv = loss_value(net, x + p.r, loss);
  CHECK(j_adv < j_clean);

  const double alpha = spec.epsilon / spec.iterations;
  double j_best = j_clean;
  for (int v0 = -2; v0 <= 2; ++v0)
    for (int v1 = -2; v1 <= 2; ++v1)
      for (int v2 = -2; v2 <= 2; ++v2)
        for (int v3 = -2; v3 <= 2; ++v3) {
          ImageTensor cand = x;
          cand.array()[0] += alpha * v0;
          cand.array()[1] += alpha * v1;
          cand.array()[2] += alpha * v2;
          cand.array()[3] += alpha * v3;
          cand = clip(cand, 0.0, 255.0);
          j_best = std::min(j_best, loss_value(net, cand, loss));
        }
  CHECK(j_best <= j_adv + 1e-12);
  CHECK(linf_norm(p.r) <= spec.epsilon + 1e-9);
}

TEST_CASE("nearest donor mask hand cases") {
  ClassMap row(1, 4);
  row << 1, 1, 1, 2;
  const ClassMap m = nearest_donor_mask(row, 1);
  CHECK(m(0, 0) == 2);
  CHECK(m(0, 1) == 2);
  CHECK(m(0, 2) == 2);
  CHECK(m(0, 3) == 2);

  // No pixel holds the target class: mask equals the prediction.
  ClassMap clean(2, 2);
  clean << 0, 2, 2, 0;
  CHECK((nearest_donor_mask(clean, 1) == clean).all());

  // Equidistant donors of different classes: the smaller class wins.
  ClassMap tie(2, 2);
  tie << 1, 3, 2, 1;  // (0,0) is target; donors at distance 1 hold 3 and 2
  const ClassMap t = nearest_donor_mask(tie, 1);
  CHECK(t(0, 0) == 2);

  ClassMap all_tau = ClassMap::Constant(3, 3, 1);
  CHECK_THROWS_AS(nearest_donor_mask(all_tau, 1), MaskError);
}

TEST_CASE("nearest donor mask matches a brute-force scan") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed * 31 + 7);
    ClassMap pred(9, 7);
    for (Index h = 0; h < 9; ++h)
      for (Index w = 0; w < 7; ++w)
        pred(h, w) = static_cast<int>(rng.uniform_index(4));
    for (int tau = 0; tau < 4; ++tau) {
      if ((pred == tau).count() == pred.size()) continue;
      CHECK((nearest_donor_mask(pred, tau) == oracle_donor(pred, tau)).all());
    }
  }
}

TEST_CASE("mirrored mask flips columns") {
  ClassMap row(1, 5);
  row << 0, 1, 2, 3, 4;
  const ClassMap m = mirrored_mask(row);
  for (Index w = 0; w < 5; ++w) CHECK(m(0, w) == row(0, 4 - w));
  CHECK(m(0, 2) == row(0, 2));  // odd width: the center column is fixed

  ClassMap halves(2, 4);
  halves << 0, 0, 1, 1, 0, 0, 1, 1;
  const ClassMap swapped = mirrored_mask(halves);
  for (Index h = 0; h < 2; ++h) {
    CHECK(swapped(h, 0) == 1);
    CHECK(swapped(h, 1) == 1);
    CHECK(swapped(h, 2) == 0);
    CHECK(swapped(h, 3) == 0);
  }
}

TEST_CASE("gradient attacks respect budget, range and make progress") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  const ImageTensor x = random_image(16, 16, 3, 11);

  AttackSpec mf = AttackSpec::defaults(AttackKind::kMfgsm);
  mf.target_class = 1;
  const Perturbation pm = mfgsm(net, x, mf);
  CHECK(linf_norm(pm.r) <= mf.epsilon + 1e-9);
  const ImageTensor adv = x + pm.r;
  CHECK((adv.array() >= 0.0).all());
  CHECK((adv.array() <= 255.0).all());
  const LossSpec jm = LossSpec::l2_class_scores(1);
  CHECK(loss_value(net, adv, jm) < loss_value(net, x, jm));

  AttackSpec me = AttackSpec::defaults(AttackKind::kMetzenLlm);
  me.target_class = 2;
  const Perturbation pe = metzen_llm(net, x, me);
  CHECK(linf_norm(pe.r) <= me.epsilon + 1e-9);
  const ClassMap fake = nearest_donor_mask(predict(net, x), 2);
  const LossSpec je = LossSpec::cross_entropy(fake);
  CHECK(loss_value(net, x + pe.r, je) < loss_value(net, x, je));

  const AttackSpec mi = AttackSpec::defaults(AttackKind::kIterativeMirror);
  const Perturbation pi = iterative_mirror(net, x, mi);
  CHECK(linf_norm(pi.r) <= mi.epsilon + 1e-9);
  const LossSpec ji = LossSpec::cross_entropy(mirrored_mask(predict(net, x)));
  CHECK(loss_value(net, x + pi.r, ji) < loss_value(net, x, ji));
}

TEST_CASE("l2 attack obeys the euclidean budget") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  const ImageTensor x = random_image(16, 16, 3, 13);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.norm = NormKind::kL2;
  spec.epsilon = 40.0;
  spec.target_class = 0;
  const Perturbation p = mfgsm(net, x, spec);
  CHECK(l2_norm(p.r) <= spec.epsilon + 1e-9);
  const LossSpec j = LossSpec::l2_class_scores(0);
  CHECK(loss_value(net, x + p.r, j) < loss_value(net, x, j));
}

TEST_CASE("mopuri saturates every coordinate on a pass-through tap") {
  // The only tap is the perturbation itself, so the objective is its norm and
  // each coordinate marches straight to the ball surface.
  const MicroNet net = tap_only_net();
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMopuri);
  spec.taps = {1};
  spec.epsilon = 0.5;
  spec.iterations = 5;
  const Perturbation p = mopuri(net, 4, 4, 3, spec, 99);
  CHECK_FALSE(p.zero_gradient);
  for (Index i = 0; i < p.r.size(); ++i)
    CHECK(std::abs(p.r.array()[i]) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("a zero tap contributes nothing to the activation gradient") {
  const MicroNet net =
      MicroNet({LayerSpec::feature_tap(1), LayerSpec::relu(),
                LayerSpec::feature_tap(2)},
               2, Interp::kNearest, 1);
  const ImageTensor probe = ImageTensor::constant(3, 3, 1, -4.0);
  const ImageTensor g1 = input_gradient(
      net, probe, LossSpec::negative_log_activation_product({1}));
  const ImageTensor g12 = input_gradient(
      net, probe, LossSpec::negative_log_activation_product({1, 2}));
  CHECK((g1.array() == g12.array()).all());
}

TEST_CASE("mopuri objective beats its start and random candidates") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMopuri);
  const std::uint64_t seed = 2024;
  const Perturbation p = mopuri(net, 16, 16, 3, spec, seed);
  CHECK(linf_norm(p.r) <= spec.epsilon + 1e-9);

  const LossSpec loss = LossSpec::negative_log_activation_product(spec.taps);
  const auto objective = [&](const ImageTensor& r) {
    return -loss_value(net, r, loss);
  };

  // The start point is reproducible from the seed.
  Rng rng(seed);
  ImageTensor r0(16, 16, 3);
  for (Index i = 0; i < r0.size(); ++i)
    r0.array()[i] = rng.uniform(-spec.epsilon, spec.epsilon);
  CHECK(objective(p.r) > objective(r0));

  Rng noise(555);
  int beaten = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ImageTensor cand(16, 16, 3);
    for (Index i = 0; i < cand.size(); ++i)
      cand.array()[i] = noise.uniform(-spec.epsilon, spec.epsilon);
    if (objective(p.r) > objective(cand)) ++beaten;
  }
  CHECK(beaten >= 96);

  // Image-agnostic and deterministic: the dispatch path only reads the shape.
  const ImageTensor x = random_image(16, 16, 3, 77);
  const Perturbation again = run_attack(net, x, spec, seed);
  CHECK((again.r.array() == p.r.array()).all());
}

TEST_CASE("bpda with an identity defense is plain mfgsm") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  const ImageTensor x = random_image(16, 16, 3, 21);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.target_class = 1;
  const Denoiser identity = [](const ImageTensor& v) { return v; };
  const Perturbation direct = mfgsm(net, x, spec);
  const Perturbation through = bpda_attack(net, identity, x, spec);
  CHECK((direct.r.array() == through.r.array()).all());
}

TEST_CASE("bpda through bit depth reduction stays within budget") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  const ImageTensor x = random_image(16, 16, 3, 22);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.target_class = 1;
  const Denoiser squeeze = [](const ImageTensor& v) {
    return bit_depth_reduce(v, 5);
  };
  const Perturbation p = bpda_attack(net, squeeze, x, spec);
  CHECK(linf_norm(p.r) <= spec.epsilon + 1e-9);
  const ImageTensor adv = x + p.r;
  CHECK((adv.array() >= 0.0).all());
  CHECK((adv.array() <= 255.0).all());
  // The loss is probed on quantized points, so the path must differ from the
  // undefended attack somewhere.
  const Perturbation plain = mfgsm(net, x, spec);
  CHECK_FALSE((p.r.array() == plain.r.array()).all());
}

TEST_CASE("attacks are bit-reproducible") {
  const MicroNet net = desk_net(42, Interp::kNearest);
  const ImageTensor x = random_image(16, 16, 3, 31);
  AttackSpec spec = AttackSpec::defaults(AttackKind::kMfgsm);
  spec.target_class = 0;
  const Perturbation a = run_attack(net, x, spec, 9);
  const Perturbation b = run_attack(net, x, spec, 9);
  CHECK((a.r.array() == b.r.array()).all());
}

TEST_CASE("perturbation files round-trip exactly") {
  ImageTensor r(3, 5, 2);
  Rng rng(8);
  for (Index i = 0; i < r.size(); ++i) r.array()[i] = rng.uniform(-10.0, 10.0);
  const std::string path = temp_path("roundtrip.pert");
  save_perturbation(path, r);
  const ImageTensor back = load_perturbation(path);
  CHECK(back.height() == 3);
  CHECK(back.width() == 5);
  CHECK(back.channels() == 2);
  CHECK((back.array() == r.array()).all());
  std::remove(path.c_str());
}

TEST_CASE("perturbation loader rejects malformed files") {
  const std::string path = temp_path("broken.pert");

  atomic_write(path, "WRONGxxxxxxxxxxxx");
  CHECK_THROWS_AS(load_perturbation(path), FormatError);

  atomic_write(path, "PERT");
  CHECK_THROWS_AS(load_perturbation(path), FormatError);

  // Header promises 2x2x1 doubles but the payload holds three.
  std::string bytes = "PERT";
  append_u32(bytes, 2);
  append_u32(bytes, 2);
  append_u32(bytes, 1);
  for (int i = 0; i < 3; ++i) append_f64(bytes, 1.5);
  atomic_write(path, bytes);
  CHECK_THROWS_AS(load_perturbation(path), FormatError);
  std::remove(path.c_str());
}

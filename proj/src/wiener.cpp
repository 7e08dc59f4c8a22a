#include "freqdef/wiener.hpp"

#include <cmath>

#include "freqdef/fft.hpp"
#include "freqdef/image_io.hpp"

namespace freqdef {

WienerFilter filter_from_pair(const ImageTensor& x, const ImageTensor& r) {
  require_same_shape(x, r, "filter_from_pair");
  const Spectrum X = dft3(x);
  const Spectrum R = dft3(r);
  ImageTensor gains(x.height(), x.width(), x.channels());
  for (Index i = 0; i < gains.size(); ++i) {
    const double sx = std::norm(X.array()[i]);
    const double sr = std::norm(R.array()[i]);
    const double denom = sx + sr;
    gains.array()[i] = denom == 0.0 ? 1.0 : sx / denom;
  }
  WienerFilter f;
  f.gains = std::move(gains);
  f.provenance = FilterProvenance::kPerImageUpperLimit;
  return f;
}

WienerFilter filter_single_attack(const std::vector<TrainPair>& pairs,
                                  const std::string& attack_label,
                                  double training_epsilon) {
  if (pairs.empty()) throw SpecError("filter estimation needs training pairs");
  WienerFilter acc = filter_from_pair(pairs[0].image, pairs[0].perturbation);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    const WienerFilter f =
        filter_from_pair(pairs[i].image, pairs[i].perturbation);
    require_same_shape(acc.gains, f.gains, "filter_single_attack");
    acc.gains.array() += f.gains.array();
  }
  acc.gains.array() /= static_cast<double>(pairs.size());
  acc.provenance = FilterProvenance::kSingleAttack;
  acc.attack_label = attack_label;
  acc.training_epsilon = training_epsilon;
  return acc;
}

WienerFilter combine_filters(const std::vector<WienerFilter>& filters) {
  if (filters.empty()) throw SpecError("combine_filters needs input filters");
  WienerFilter out;
  out.gains = filters[0].gains;
  for (std::size_t i = 1; i < filters.size(); ++i) {
    require_same_shape(out.gains, filters[i].gains, "combine_filters");
    if (filters[i].training_epsilon != filters[0].training_epsilon)
      throw SpecError("combine_filters: mixed training budgets");
    out.gains.array() += filters[i].gains.array();
  }
  out.gains.array() /= static_cast<double>(filters.size());
  out.provenance = FilterProvenance::kCombined;
  out.training_epsilon = filters[0].training_epsilon;
  return out;
}

double filter_symmetry_residual(const ImageTensor& gains) {
  const Index H = gains.height(), W = gains.width(), C = gains.channels();
  double worst = 0.0;
  for (Index k = 0; k < H; ++k)
    for (Index l = 0; l < W; ++l)
      for (Index m = 0; m < C; ++m) {
        const double mirror =
            gains((H - k) % H, (W - l) % W, (C - m) % C);
        worst = std::max(worst, std::fabs(gains(k, l, m) - mirror));
      }
  return worst;
}

ImageTensor apply_filter(const WienerFilter& filter, const ImageTensor& x) {
  require_same_shape(filter.gains, x, "apply_filter");
  if (filter_symmetry_residual(filter.gains) > 1e-9)
    throw SymmetryError("filter gains are not conjugate-symmetric");
  Spectrum X = dft3(x);
  X.array() *= filter.gains.array().cast<std::complex<double>>();
  return clip(idft3(X), 0.0, 255.0);
}

namespace {

constexpr char kMagic[4] = {'W', 'F', 'L', 'T'};
constexpr std::uint16_t kVersion = 1;

// Provenance byte: 0 upper limit, 1..4 single attack, 5 combined.
const char* kSingleAttackLabels[4] = {"mfgsm", "metzen_llm", "iterative_mirror",
                                      "mopuri"};

std::uint8_t provenance_tag(const WienerFilter& f) {
  switch (f.provenance) {
    case FilterProvenance::kPerImageUpperLimit:
      return 0;
    case FilterProvenance::kSingleAttack:
      for (std::uint8_t i = 0; i < 4; ++i)
        if (f.attack_label == kSingleAttackLabels[i]) return i + 1;
      throw SpecError("single-attack filter with unknown attack label: " +
                      f.attack_label);
    case FilterProvenance::kCombined:
      return 5;
  }
  throw SpecError("bad filter provenance");
}

}  // namespace

void save_filter(const std::string& path, const WienerFilter& filter) {
  std::string out(kMagic, 4);
  append_u16(out, kVersion);
  out.push_back(static_cast<char>(provenance_tag(filter)));
  append_f64(out, filter.training_epsilon);
  append_u32(out, static_cast<std::uint32_t>(filter.gains.height()));
  append_u32(out, static_cast<std::uint32_t>(filter.gains.width()));
  append_u32(out, static_cast<std::uint32_t>(filter.gains.channels()));
  for (Index i = 0; i < filter.gains.size(); ++i)
    append_f64(out, filter.gains.array()[i]);
  atomic_write(path, out);
}

WienerFilter load_filter(const std::string& path) {
  const std::string in = read_file(path);
  if (in.size() < 27 || in.compare(0, 4, kMagic, 4) != 0)
    throw FormatError("not a filter file: " + path);
  std::size_t pos = 4;
  if (read_u16(in, pos) != kVersion)
    throw FormatError("unsupported filter version");
  const std::uint8_t tag = static_cast<std::uint8_t>(in[pos++]);
  if (tag > 5) throw FormatError("bad filter provenance tag");
  WienerFilter f;
  f.training_epsilon = read_f64(in, pos);
  const auto h = read_u32(in, pos), w = read_u32(in, pos),
             c = read_u32(in, pos);
  if (h == 0 || w == 0 || c == 0) throw FormatError("bad filter shape");
  const std::size_t count =
      static_cast<std::size_t>(h) * w * c;
  if (in.size() != pos + count * 8)
    throw FormatError("filter payload size mismatch");
  f.gains = ImageTensor(h, w, c);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = read_f64(in, pos);
    if (!(v >= 0.0 && v <= 1.0))
      throw FormatError("filter gain outside [0, 1]");
    f.gains.array()[static_cast<Index>(i)] = v;
  }
  if (tag == 0) {
    f.provenance = FilterProvenance::kPerImageUpperLimit;
  } else if (tag <= 4) {
    f.provenance = FilterProvenance::kSingleAttack;
    f.attack_label = kSingleAttackLabels[tag - 1];
  } else {
    f.provenance = FilterProvenance::kCombined;
  }
  return f;
}

}  // namespace freqdef

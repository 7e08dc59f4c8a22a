#include "freqdef/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "freqdef/common.hpp"

namespace freqdef {

using nlohmann::json;

ImageTensor median_blur(const ImageTensor& x, int k) {
  if (k < 1 || k % 2 == 0) throw SpecError("median kernel must be odd");
  const int half = k / 2;
  ImageTensor y = zeros_like(x);
  std::vector<double> window(static_cast<std::size_t>(k) * k);
  for (Index c = 0; c < x.channels(); ++c)
    for (Index h = 0; h < x.height(); ++h)
      for (Index w = 0; w < x.width(); ++w) {
        std::size_t n = 0;
        for (int a = -half; a <= half; ++a)
          for (int b = -half; b <= half; ++b) {
            const Index ih = std::clamp<Index>(h + a, 0, x.height() - 1);
            const Index iw = std::clamp<Index>(w + b, 0, x.width() - 1);
            window[n++] = x(ih, iw, c);
          }
        auto mid = window.begin() + static_cast<long>(n / 2);
        std::nth_element(window.begin(), mid, window.begin() + static_cast<long>(n));
        y(h, w, c) = *mid;
      }
  return y;
}

ImageTensor bit_depth_reduce(const ImageTensor& x, int bits) {
  if (bits < 1 || bits > 8) throw SpecError("bit depth must be in [1, 8]");
  const double levels = static_cast<double>((1 << bits) - 1);
  ImageTensor y = zeros_like(x);
  for (Index i = 0; i < x.size(); ++i) {
    const double v = std::clamp(x.array()[i], 0.0, 255.0);
    const double q = std::round(v / 255.0 * levels);
    y.array()[i] = std::round(q * 255.0 / levels);
  }
  return y;
}

ImageTensor nl_means(const ImageTensor& x, int search, int patch,
                     double strength) {
  if (search < 1 || search % 2 == 0 || patch < 1 || patch % 2 == 0)
    throw SpecError("nl_means windows must be odd");
  if (patch > search) throw SpecError("patch window larger than search window");
  if (strength <= 0.0) throw SpecError("nl_means strength must be positive");
  const int sh = search / 2, ph = patch / 2;
  const double inv_h2 = 1.0 / (strength * strength);
  const double patch_count = static_cast<double>(patch) * patch;
  ImageTensor y = zeros_like(x);
  for (Index c = 0; c < x.channels(); ++c)
    for (Index h = 0; h < x.height(); ++h)
      for (Index w = 0; w < x.width(); ++w) {
        double num = 0.0, den = 0.0;
        for (int a = -sh; a <= sh; ++a)
          for (int b = -sh; b <= sh; ++b) {
            const Index qh = h + a, qw = w + b;
            if (qh < 0 || qh >= x.height() || qw < 0 || qw >= x.width())
              continue;
            double d2 = 0.0;
            for (int i = -ph; i <= ph; ++i)
              for (int j = -ph; j <= ph; ++j) {
                const Index p1h = std::clamp<Index>(h + i, 0, x.height() - 1);
                const Index p1w = std::clamp<Index>(w + j, 0, x.width() - 1);
                const Index p2h = std::clamp<Index>(qh + i, 0, x.height() - 1);
                const Index p2w = std::clamp<Index>(qw + j, 0, x.width() - 1);
                const double d = x(p1h, p1w, c) - x(p2h, p2w, c);
                d2 += d * d;
              }
            d2 /= patch_count;
            // sigma = 0, so the noise-compensation term drops out.
            const double wgt = std::exp(-d2 * inv_h2);
            num += wgt * x(qh, qw, c);
            den += wgt;
          }
        y(h, w, c) = num / den;
      }
  return y;
}

namespace {

// Annex K luminance quantization table.
constexpr int kQuantBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

void scaled_quant_table(int quality, double out[64]) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    const int q = (kQuantBase[i] * scale + 50) / 100;
    out[i] = static_cast<double>(std::clamp(q, 1, 255));
  }
}

const double* dct_cos_table() {
  static const auto table = [] {
    std::array<double, 64> t{};
    for (int u = 0; u < 8; ++u)
      for (int p = 0; p < 8; ++p)
        t[u * 8 + p] = std::cos((2 * p + 1) * u * std::numbers::pi / 16.0);
    return t;
  }();
  return table.data();
}

void block_dct_roundtrip(double block[64], const double quant[64]) {
  const double* ct = dct_cos_table();
  double coef[64];
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int p = 0; p < 8; ++p)
        for (int q = 0; q < 8; ++q)
          acc += block[p * 8 + q] * ct[u * 8 + p] * ct[v * 8 + q];
      const double cu = u == 0 ? (1.0 / std::numbers::sqrt2) : 1.0;
      const double cv = v == 0 ? (1.0 / std::numbers::sqrt2) : 1.0;
      const double f = 0.25 * cu * cv * acc;
      coef[u * 8 + v] = std::round(f / quant[u * 8 + v]) * quant[u * 8 + v];
    }
  for (int p = 0; p < 8; ++p)
    for (int q = 0; q < 8; ++q) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          const double cu = u == 0 ? (1.0 / std::numbers::sqrt2) : 1.0;
          const double cv = v == 0 ? (1.0 / std::numbers::sqrt2) : 1.0;
          acc += cu * cv * coef[u * 8 + v] * ct[u * 8 + p] * ct[v * 8 + q];
        }
      block[p * 8 + q] = 0.25 * acc;
    }
}

}  // namespace

ImageTensor jpeg_dct(const ImageTensor& x, int quality) {
  if (quality < 1 || quality > 100)
    throw SpecError("jpeg quality must be in [1, 100]");
  double quant[64];
  scaled_quant_table(quality, quant);
  ImageTensor y = zeros_like(x);
  double block[64];
  for (Index c = 0; c < x.channels(); ++c)
    for (Index bh = 0; bh < x.height(); bh += 8)
      for (Index bw = 0; bw < x.width(); bw += 8) {
        for (int p = 0; p < 8; ++p)
          for (int q = 0; q < 8; ++q) {
            // Edge blocks replicate the last row/column.
            const Index ih = std::min(bh + p, x.height() - 1);
            const Index iw = std::min(bw + q, x.width() - 1);
            block[p * 8 + q] = x(ih, iw, c) - 128.0;
          }
        block_dct_roundtrip(block, quant);
        for (int p = 0; p < 8 && bh + p < x.height(); ++p)
          for (int q = 0; q < 8 && bw + q < x.width(); ++q)
            y(bh + p, bw + q, c) =
                std::clamp(block[p * 8 + q] + 128.0, 0.0, 255.0);
      }
  return y;
}

ImageTensor compose(const std::vector<Denoiser>& defenses,
                    const ImageTensor& x) {
  ImageTensor y = x;
  for (const auto& d : defenses) y = d(y);
  return y;
}

namespace {

const char* kind_name(DefenseSpec::Kind k) {
  switch (k) {
    case DefenseSpec::Kind::kIdentity: return "identity";
    case DefenseSpec::Kind::kWiener: return "wiener";
    case DefenseSpec::Kind::kJpegDct: return "jpeg_dct";
    case DefenseSpec::Kind::kMedianBlur: return "median_blur";
    case DefenseSpec::Kind::kBitDepth: return "bit_depth_reduce";
    case DefenseSpec::Kind::kNlMeans: return "nl_means";
    case DefenseSpec::Kind::kJpeg2000: return "jpeg2000";
    case DefenseSpec::Kind::kCompose: return "compose";
  }
  return "identity";
}

DefenseSpec::Kind kind_from_name(const std::string& name) {
  for (auto k : {DefenseSpec::Kind::kIdentity, DefenseSpec::Kind::kWiener,
                 DefenseSpec::Kind::kJpegDct, DefenseSpec::Kind::kMedianBlur,
                 DefenseSpec::Kind::kBitDepth, DefenseSpec::Kind::kNlMeans,
                 DefenseSpec::Kind::kJpeg2000, DefenseSpec::Kind::kCompose})
    if (name == kind_name(k)) return k;
  throw SpecError("unknown defense kind: " + name);
}

json spec_to_json(const DefenseSpec& s) {
  json j;
  j["kind"] = kind_name(s.kind);
  if (!s.name.empty()) j["name"] = s.name;
  switch (s.kind) {
    case DefenseSpec::Kind::kWiener:
      j["filter"] = s.filter_path;
      break;
    case DefenseSpec::Kind::kJpegDct:
      j["quality"] = s.quality;
      break;
    case DefenseSpec::Kind::kMedianBlur:
      j["kernel"] = s.kernel;
      break;
    case DefenseSpec::Kind::kBitDepth:
      j["bits"] = s.bits;
      break;
    case DefenseSpec::Kind::kNlMeans:
      j["search"] = s.search;
      j["patch"] = s.patch;
      j["strength"] = s.strength;
      break;
    case DefenseSpec::Kind::kCompose: {
      j["children"] = json::array();
      for (const auto& c : s.children) j["children"].push_back(spec_to_json(c));
      break;
    }
    default:
      break;
  }
  return j;
}

DefenseSpec spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw SpecError("defense entries need a kind");
  DefenseSpec s;
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.name = j.value("name", std::string(kind_name(s.kind)));
  switch (s.kind) {
    case DefenseSpec::Kind::kWiener:
      s.filter_path = j.at("filter").get<std::string>();
      break;
    case DefenseSpec::Kind::kJpegDct:
      s.quality = j.value("quality", 90);
      break;
    case DefenseSpec::Kind::kMedianBlur:
      s.kernel = j.value("kernel", 3);
      break;
    case DefenseSpec::Kind::kBitDepth:
      s.bits = j.value("bits", 5);
      break;
    case DefenseSpec::Kind::kNlMeans:
      s.search = j.value("search", 13);
      s.patch = j.value("patch", 3);
      s.strength = j.value("strength", 2.0);
      break;
    case DefenseSpec::Kind::kCompose:
      for (const auto& c : j.at("children")) s.children.push_back(spec_from_json(c));
      break;
    default:
      break;
  }
  validate(s);
  return s;
}

}  // namespace

DefenseSpec parse_defense(const std::string& json_text) {
  try {
    return spec_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw SpecError(std::string("defense JSON parse error: ") + e.what());
  }
}

std::string defense_to_json(const DefenseSpec& spec) {
  return spec_to_json(spec).dump(2);
}

void validate(const DefenseSpec& s) {
  switch (s.kind) {
    case DefenseSpec::Kind::kWiener:
      if (s.filter_path.empty())
        throw SpecError("wiener defense needs a filter path");
      break;
    case DefenseSpec::Kind::kJpegDct:
      if (s.quality < 1 || s.quality > 100)
        throw SpecError("jpeg quality must be in [1, 100]");
      break;
    case DefenseSpec::Kind::kMedianBlur:
      if (s.kernel < 1 || s.kernel % 2 == 0)
        throw SpecError("median kernel must be odd");
      break;
    case DefenseSpec::Kind::kBitDepth:
      if (s.bits < 1 || s.bits > 8)
        throw SpecError("bit depth must be in [1, 8]");
      break;
    case DefenseSpec::Kind::kNlMeans:
      if (s.search < 1 || s.search % 2 == 0 || s.patch < 1 ||
          s.patch % 2 == 0 || s.patch > s.search || s.strength <= 0.0)
        throw SpecError("bad nl_means parameters");
      break;
    case DefenseSpec::Kind::kCompose:
      if (s.children.empty())
        throw SpecError("compose needs at least one child");
      for (const auto& c : s.children) validate(c);
      break;
    default:
      break;
  }
}

}  // namespace freqdef

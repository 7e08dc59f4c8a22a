#include "freqdef/image_io.hpp"

#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace freqdef {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw FormatError("failed reading " + path);
  return bytes;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw FormatError("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void require_bytes(const std::string& in, std::size_t pos, std::size_t count) {
  if (pos + count > in.size()) throw FormatError("truncated input");
}

}  // namespace

void append_u16(std::string& out, std::uint16_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void append_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void append_f64(std::string& out, double v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint16_t read_u16(const std::string& in, std::size_t& pos) {
  require_bytes(in, pos, 2);
  std::uint16_t v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

std::uint32_t read_u32(const std::string& in, std::size_t& pos) {
  require_bytes(in, pos, 4);
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

double read_f64(const std::string& in, std::size_t& pos) {
  require_bytes(in, pos, 8);
  double v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

namespace {

unsigned char to_byte(double v) {
  const double r = std::lround(v);
  return static_cast<unsigned char>(std::min(255.0, std::max(0.0, r)));
}

// Parses a PNM ASCII token, skipping whitespace and # comments.
long next_token(const std::string& in, std::size_t& pos) {
  for (;;) {
    while (pos < in.size() &&
           std::isspace(static_cast<unsigned char>(in[pos])))
      ++pos;
    if (pos < in.size() && in[pos] == '#') {
      while (pos < in.size() && in[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= in.size() || !std::isdigit(static_cast<unsigned char>(in[pos])))
    throw FormatError("malformed netpbm header");
  long v = 0;
  while (pos < in.size() && std::isdigit(static_cast<unsigned char>(in[pos]))) {
    v = v * 10 + (in[pos] - '0');
    ++pos;
  }
  return v;
}

std::string encode_pnm(const ImageTensor& x, const char* magic) {
  std::string out(magic);
  out += "\n" + std::to_string(x.width()) + " " + std::to_string(x.height()) +
         "\n255\n";
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w)
      for (Index c = 0; c < x.channels(); ++c)
        out.push_back(static_cast<char>(to_byte(x(h, w, c))));
  return out;
}

ImageTensor decode_pnm(const std::string& in, const char* magic,
                       Index channels) {
  if (in.size() < 2 || in[0] != magic[0] || in[1] != magic[1])
    throw FormatError("bad netpbm magic");
  std::size_t pos = 2;
  const long w = next_token(in, pos);
  const long h = next_token(in, pos);
  const long maxval = next_token(in, pos);
  if (w <= 0 || h <= 0) throw FormatError("bad netpbm dimensions");
  if (maxval != 255) throw FormatError("only 8-bit netpbm rasters supported");
  ++pos;  // single whitespace byte after the header
  const std::size_t count =
      static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
      static_cast<std::size_t>(channels);
  require_bytes(in, pos, count);
  ImageTensor x(h, w, channels);
  for (Index i = 0; i < x.size(); ++i)
    x.array()[i] =
        static_cast<double>(static_cast<unsigned char>(in[pos + i]));
  return x;
}

}  // namespace

void write_ppm(const std::string& path, const ImageTensor& x) {
  if (x.channels() != 3) throw ShapeError("PPM output requires 3 channels");
  atomic_write(path, encode_pnm(x, "P6"));
}

ImageTensor read_ppm(const std::string& path) {
  return decode_pnm(read_file(path), "P6", 3);
}

void write_pgm(const std::string& path, const ImageTensor& x) {
  if (x.channels() != 1) throw ShapeError("PGM output requires 1 channel");
  atomic_write(path, encode_pnm(x, "P5"));
}

ImageTensor read_pgm(const std::string& path) {
  return decode_pnm(read_file(path), "P5", 1);
}

void write_class_map(const std::string& path, const ClassMap& m) {
  ImageTensor x(m.rows(), m.cols(), 1);
  for (Index h = 0; h < m.rows(); ++h)
    for (Index w = 0; w < m.cols(); ++w)
      x(h, w, 0) = static_cast<double>(m(h, w));
  write_pgm(path, x);
}

ClassMap read_class_map(const std::string& path) {
  const ImageTensor x = read_pgm(path);
  ClassMap m(x.height(), x.width());
  for (Index h = 0; h < x.height(); ++h)
    for (Index w = 0; w < x.width(); ++w)
      m(h, w) = static_cast<int>(std::lround(x(h, w, 0)));
  return m;
}

}  // namespace freqdef

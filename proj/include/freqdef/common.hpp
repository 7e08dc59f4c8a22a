#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace freqdef {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not compose (layer chains, elementwise ops, filter/application).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter values or dangling references (class ids, tap ids, ...).
class SpecError : public Error {
 public:
  using Error::Error;
};

// Malformed files: bad magic, truncation, unsupported variants.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Conjugate-symmetry violations detected when a real result is required.
class SymmetryError : public Error {
 public:
  using Error::Error;
};

// Inputs larger than the configured transform budget.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration problems; the CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives the seed of a named sub-stream from a root seed, so that every
// consumer (net init, attack init, data generation) draws from its own
// independent stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return splitmix64(root ^ splitmix64(h));
}

// mt19937_64 with hand-rolled value mappings. The engine sequence is pinned by
// the standard; the library distributions are not, so we avoid them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive bounds, unbiased via rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_index(
                    static_cast<std::uint64_t>(hi - lo) + 1));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace freqdef

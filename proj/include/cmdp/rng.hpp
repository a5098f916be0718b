#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace cmdp {

// Deterministic random source. Distributions are implemented by hand so that
// sequences are identical across standard libraries and across runs.
class Rng {
 public:
  Rng() : engine_(0x9e3779b97f4a7c15ULL) {}
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  // Well-mixed child seed for an independent stream.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix(seed) ^ mix(stream * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
  }

  // Independent stream derived from (seed, stream) without correlation.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(static_cast<std::uint64_t>(n) * uniform());
  }

  // Box-Muller without caching so the draw count per call is fixed.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  bool operator==(const Rng& o) const { return engine_ == o.engine_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace cmdp

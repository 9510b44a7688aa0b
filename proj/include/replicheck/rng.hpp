#ifndef REPLICHECK_RNG_HPP
#define REPLICHECK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace replicheck {

// Deterministic across platforms: draws come straight from mt19937_64 bits,
// never through std::uniform_real_distribution (whose output is
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double unit() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  long integer(long lo, long hi) {  // inclusive range, rejection-free modulo
    auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<long>(eng_() % span);
  }

  double gauss() {  // Box-Muller, cached spare
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0, u2 = unit();
    while (u1 == 0) u1 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace replicheck

#endif

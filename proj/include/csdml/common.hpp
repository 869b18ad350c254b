#ifndef CSDML_COMMON_HPP
#define CSDML_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>

namespace csdml {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline VectorXd deg2rad(const VectorXd& deg) { return deg * (kPi / 180.0); }
inline VectorXd rad2deg(const VectorXd& rad) { return rad * (180.0 / kPi); }

/// splitmix64 step; used to derive independent per-trial seeds from a base
/// seed and a trial counter.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t counter) {
  std::uint64_t z = base + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seedable Gaussian source. Uniform doubles are produced from the raw
/// 64-bit engine output and normals via Box-Muller, so streams depend only
/// on the seed, not on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x6a09e667f3bcc909ULL) {}

  std::uint64_t next_u64() { return engine_step(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Circular complex normal with unit variance (Re/Im variance 1/2 each).
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return Complex(re * kInvSqrt2, im * kInvSqrt2);
  }

 private:
  static constexpr double kInvSqrt2 = 0.70710678118654752440;

  // splitmix64
  std::uint64_t engine_step() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace csdml

#endif  // CSDML_COMMON_HPP

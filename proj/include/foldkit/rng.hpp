// rng.hpp — deterministic random number generation.
//
// Every stochastic routine in the library draws from this generator so that
// a fixed seed reproduces results byte-for-byte across runs and platforms.
// std::mt19937_64 has a pinned portable definition, but the standard
// distributions (std::normal_distribution in particular) do not, so we
// implement the uniform->normal transform ourselves (Box-Muller).
//
// Seed derivation for independent streams (restarts, replications, folds)
// goes through a splitmix64-style mixer instead of arithmetic on the seed,
// so nearby seeds and stream tags produce unrelated streams.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace foldkit {

// ===========================================================================
// Seed mixing
// ===========================================================================

// splitmix64 finalizer: a bijective 64-bit mixer with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive a child seed from a base seed and an ordered list of stream tags.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t));
  return h;
}

// ===========================================================================
// Generator
// ===========================================================================

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Raw 64-bit draw.
  std::uint64_t integer() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (pinned implementation; see header note).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the logarithm is finite.
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Matrix of independent standard normals, filled column by column.
  Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = gaussian();
    return m;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace foldkit

#pragma once

#include <array>
#include <cstdint>

#include "mvp/matrix.hpp"

namespace mvp {

// xoshiro256** seeded through splitmix64.  Deterministic across platforms;
// every stochastic choice in the library flows through one of these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Integer in [0, n).  n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller; the spare draw is cached per generator.
  double gaussian();
  double gaussian(double mean, double stddev);

  void fill_uniform(Matrix& m, double lo, double hi);
  void fill_gaussian(Matrix& m, double mean, double stddev);

  // Independent child stream seeded from this generator's output.
  Rng fork();

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix uniform(Rng& rng, Index rows, Index cols);
Matrix gaussian(Rng& rng, Index rows, Index cols, double mean, double stddev);

}  // namespace mvp

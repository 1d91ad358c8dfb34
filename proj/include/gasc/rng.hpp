#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace gasc {

// xoshiro256** seeded through splitmix64. Every distribution below is
// implemented here rather than taken from <random>, whose distribution
// algorithms differ between standard libraries; outputs are therefore
// bit-identical on any platform for a given (seed, stream).
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256starstar-splitmix64-v1";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double normal(double mean, double precision);
  // Gamma with shape/rate parameterization (mean = shape / rate).
  double gamma(double shape, double rate);

  // Draws an index with probability proportional to exp(log_weights[i]).
  std::size_t categorical_log(std::span<const double> log_weights);
  // Draws an index with probability proportional to weights[i] >= 0.
  std::size_t categorical(std::span<const double> weights);

  // Independent stream derived from this generator's seed material.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace gasc

#pragma once

#include <cstdint>
#include <string>

namespace hig {

// SplitMix64 generator with Box-Muller gaussians. Self-contained so that
// generated datasets and training runs are reproducible across standard
// library implementations, not just across runs.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int lo, int hi);        // inclusive on both ends
  double gaussian();                      // standard normal
  double gaussian(double mean, double stddev);
  int poisson(double lambda);

  // Independent stream derived from the original seed; stable regardless of
  // how many values have been drawn from this generator.
  Rng fork(std::uint64_t stream) const;

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hig

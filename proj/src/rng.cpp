#include "hig/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "hig/error.hpp"

namespace hig {

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53 high bits -> double in [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ConfigError("uniform_int: empty range");
  std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

int Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  // Knuth's method; fine for the small rates used here.
  double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

Rng Rng::fork(std::uint64_t stream) const {
  std::uint64_t s = seed_ ^ (0xA0761D6478BD642FULL * (stream + 1));
  splitmix64(s);
  return Rng(s);
}

std::string Rng::serialize() const {
  std::uint64_t spare_bits = 0;
  std::memcpy(&spare_bits, &spare_, sizeof spare_bits);
  std::ostringstream out;
  out << seed_ << ":" << state_ << ":" << (has_spare_ ? 1 : 0) << ":" << spare_bits;
  return out.str();
}

Rng Rng::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::uint64_t seed = 0, state = 0, spare_bits = 0;
  int has_spare = 0;
  char sep = 0;
  in >> seed >> sep >> state >> sep >> has_spare >> sep >> spare_bits;
  if (!in) throw ParseError("bad rng state: " + text);
  Rng rng(seed);
  rng.state_ = state;
  rng.has_spare_ = has_spare != 0;
  std::memcpy(&rng.spare_, &spare_bits, sizeof rng.spare_);
  return rng;
}

}  // namespace hig

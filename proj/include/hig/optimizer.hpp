#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hig/autodiff.hpp"
#include "hig/matrix.hpp"

namespace hig {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive-moment optimizer with decoupled weight decay. Frozen parameters
// are skipped entirely: no value change, no decay, no moment update.
class AdamW {
public:
  struct Slot {
    Matrix m;
    Matrix v;
    std::int64_t step = 0;
  };

  AdamW() = default;
  explicit AdamW(AdamWConfig config) : config_(config) {}

  // One update from the gradients currently stored on the parameters.
  void step(const std::vector<Parameter*>& params);

  AdamWConfig& config() { return config_; }
  const AdamWConfig& config() const { return config_; }

  const std::map<std::string, Slot>& slots() const { return slots_; }
  void restore_slots(std::map<std::string, Slot> slots) { slots_ = std::move(slots); }

private:
  AdamWConfig config_;
  std::map<std::string, Slot> slots_;  // keyed by parameter name
};

}  // namespace hig

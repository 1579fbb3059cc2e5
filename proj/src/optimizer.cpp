#include "hig/optimizer.hpp"

#include <cmath>

#include "hig/error.hpp"

namespace hig {

void AdamW::step(const std::vector<Parameter*>& params) {
  if (config_.learning_rate <= 0.0) throw ConfigError("AdamW: learning rate must be positive");
  for (Parameter* p : params) {
    if (p->frozen) continue;
    Slot& slot = slots_[p->name];
    if (slot.m.empty()) {
      slot.m = Matrix(p->value.rows(), p->value.cols());
      slot.v = Matrix(p->value.rows(), p->value.cols());
    }
    slot.step += 1;
    double b1 = config_.beta1;
    double b2 = config_.beta2;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(slot.step));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(slot.step));
    for (int i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
      slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
      double m_hat = slot.m[i] / bc1;
      double v_hat = slot.v[i] / bc2;
      p->value[i] -= config_.learning_rate *
                     (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p->value[i]);
    }
    ensure_finite(p->value, "parameter " + p->name + " after optimizer step");
  }
}

}  // namespace hig

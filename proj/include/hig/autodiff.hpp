#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hig/matrix.hpp"

namespace hig {

// A trainable matrix with its accumulated gradient. When frozen, the value is
// bit-identical before and after any optimizer step.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string name_, Matrix value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-7;

// Focal term for a single probability/label pair, matching the reduction the
// tape applies per logit.
double focal_loss(double p, int y, const FocalParams& params);

// Reverse-mode engine over the fixed primitive set the architecture needs:
// matmul, add, scale, sum, rectify, sigmoid, row concatenation and the
// focal-loss reduction. Deliberately not a general-purpose tape.
class Tape {
public:
  using ValueId = std::int32_t;

  ValueId constant(Matrix v);
  ValueId parameter(Parameter* p);
  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  ValueId scale(ValueId a, double factor);
  ValueId sum(const std::vector<ValueId>& terms);  // same-shape elementwise sum
  ValueId rectify(ValueId a);                      // max(0, x)
  ValueId sigmoid(ValueId a);
  ValueId concat_rows(ValueId a, ValueId b);       // stack by rows; equal col counts
  ValueId transpose(ValueId a);

  // Sum over entries of the focal loss of sigmoid(logits[i]) against
  // targets[i] in {0,1}; yields a 1x1 scalar.
  ValueId focal_loss_sum(ValueId logits, std::vector<double> targets, FocalParams params);

  const Matrix& value(ValueId id) const;

  // Seeds the 1x1 root with 1 and sweeps the tape in reverse, accumulating
  // into each Parameter's grad (frozen parameters included; the optimizer is
  // what skips them).
  void backward(ValueId root);

  std::size_t size() const { return nodes_.size(); }
  void clear();

private:
  enum class Op : std::uint8_t {
    Constant,
    Param,
    Matmul,
    Add,
    Scale,
    Sum,
    Rectify,
    Sigmoid,
    ConcatRows,
    Transpose,
    FocalSum,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::vector<int> inputs;       // Sum
    double factor = 0.0;           // Scale
    Matrix value;
    Parameter* param = nullptr;    // Param
    std::vector<double> targets;   // FocalSum
    FocalParams focal;             // FocalSum
  };

  ValueId push(Node node);
  const Node& node(ValueId id) const;

  std::vector<Node> nodes_;
};

// Max over all parameter entries of the relative error between the
// reverse-mode gradient and a central finite difference of the loss.
// `loss_value` evaluates the scalar objective at the parameters' current
// values; `compute_grads` must refresh every parameter's grad via a full
// forward+backward. Throws NumericError on a non-finite loss.
double gradient_check(const std::function<double()>& loss_value,
                      const std::function<void()>& compute_grads,
                      const std::vector<Parameter*>& params, double epsilon);

}  // namespace hig

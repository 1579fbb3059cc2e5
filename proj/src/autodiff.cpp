#include "hig/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "hig/error.hpp"

namespace hig {

namespace {
double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double sigmoid_scalar(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// d(focal)/d(logit) for one entry; zero where the probability clamp is active.
double focal_grad_logit(double z, int y, const FocalParams& fp) {
  double p = sigmoid_scalar(z);
  if (p <= kProbClamp || p >= 1.0 - kProbClamp) return 0.0;
  double g = fp.gamma;
  if (y == 1) {
    double a = fp.alpha;
    double one_minus_p = 1.0 - p;
    double t1 = (g == 0.0) ? 0.0 : a * g * p * std::pow(one_minus_p, g) * std::log(p);
    return t1 - a * std::pow(one_minus_p, g + 1.0);
  }
  double a = 1.0 - fp.alpha;
  double one_minus_p = 1.0 - p;
  double t1 = (g == 0.0) ? 0.0 : a * g * std::pow(p, g) * one_minus_p * std::log(one_minus_p);
  return -t1 + a * std::pow(p, g + 1.0);
}
}  // namespace

double focal_loss(double p, int y, const FocalParams& params) {
  double pc = clamp_prob(p);
  double pt = (y == 1) ? pc : 1.0 - pc;
  double at = (y == 1) ? params.alpha : 1.0 - params.alpha;
  return -at * std::pow(1.0 - pt, params.gamma) * std::log(pt);
}

Tape::ValueId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }

const Matrix& Tape::value(ValueId id) const { return node(id).value; }

void Tape::clear() { nodes_.clear(); }

Tape::ValueId Tape::constant(Matrix v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n));
}

Tape::ValueId Tape::parameter(Parameter* p) {
  Node n;
  n.op = Op::Param;
  n.param = p;
  n.value = p->value;
  return push(std::move(n));
}

Tape::ValueId Tape::matmul(ValueId a, ValueId b) {
  Node n;
  n.op = Op::Matmul;
  n.a = a;
  n.b = b;
  n.value = hig::matmul(value(a), value(b));
  return push(std::move(n));
}

Tape::ValueId Tape::add(ValueId a, ValueId b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = hig::add(value(a), value(b));
  return push(std::move(n));
}

Tape::ValueId Tape::scale(ValueId a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.factor = factor;
  n.value = hig::scale(value(a), factor);
  return push(std::move(n));
}

Tape::ValueId Tape::sum(const std::vector<ValueId>& terms) {
  if (terms.empty()) throw DimensionError("sum of zero terms");
  Matrix acc = value(terms[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const Matrix& m = value(terms[i]);
    if (!m.same_shape(acc))
      throw DimensionError("sum shape mismatch: " + m.shape_str() + " vs " + acc.shape_str());
    acc = hig::add(acc, m);
  }
  Node n;
  n.op = Op::Sum;
  n.inputs.assign(terms.begin(), terms.end());
  n.value = std::move(acc);
  return push(std::move(n));
}

Tape::ValueId Tape::rectify(ValueId a) {
  Matrix out = value(a);
  for (int i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  Node n;
  n.op = Op::Rectify;
  n.a = a;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::ValueId Tape::sigmoid(ValueId a) {
  Matrix out = value(a);
  for (int i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::ValueId Tape::concat_rows(ValueId a, ValueId b) {
  const Matrix& ma = value(a);
  const Matrix& mb = value(b);
  if (ma.cols() != mb.cols())
    throw DimensionError("concat_rows column mismatch: " + ma.shape_str() + " vs " +
                         mb.shape_str());
  Matrix out(ma.rows() + mb.rows(), ma.cols());
  std::copy(ma.values().begin(), ma.values().end(), out.values().begin());
  std::copy(mb.values().begin(), mb.values().end(), out.values().begin() + ma.size());
  Node n;
  n.op = Op::ConcatRows;
  n.a = a;
  n.b = b;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::ValueId Tape::transpose(ValueId a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.value = hig::transpose(value(a));
  return push(std::move(n));
}

Tape::ValueId Tape::focal_loss_sum(ValueId logits, std::vector<double> targets,
                                   FocalParams params) {
  const Matrix& z = value(logits);
  if (z.cols() != 1) throw DimensionError("focal_loss_sum expects a column of logits");
  if (static_cast<std::size_t>(z.rows()) != targets.size())
    throw DimensionError("focal_loss_sum target count " + std::to_string(targets.size()) +
                         " vs " + std::to_string(z.rows()) + " logits");
  double total = 0.0;
  double comp = 0.0;
  for (int i = 0; i < z.rows(); ++i) {
    int y = targets[static_cast<std::size_t>(i)] > 0.5 ? 1 : 0;
    double term = focal_loss(sigmoid_scalar(z[i]), y, params) - comp;
    double t = total + term;
    comp = (t - total) - term;
    total = t;
  }
  Node n;
  n.op = Op::FocalSum;
  n.a = logits;
  n.targets = std::move(targets);
  n.focal = params;
  n.value = Matrix(1, 1, {total});
  return push(std::move(n));
}

void Tape::backward(ValueId root) {
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1)
    throw DimensionError("backward root must be 1x1, got " + rv.shape_str());
  if (!rv.all_finite()) throw NumericError("backward on non-finite loss");

  std::vector<Matrix> adj(nodes_.size());
  adj[static_cast<std::size_t>(root)] = Matrix(1, 1, {1.0});

  auto accumulate = [&](int target, Matrix g) {
    Matrix& slot = adj[static_cast<std::size_t>(target)];
    if (slot.empty())
      slot = std::move(g);
    else
      slot = hig::add(slot, g);
  };

  for (int i = root; i >= 0; --i) {
    Matrix& g = adj[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param:
        n.param->grad = hig::add(n.param->grad, g);
        break;
      case Op::Matmul:
        accumulate(n.a, hig::matmul(g, hig::transpose(value(n.b))));
        accumulate(n.b, hig::matmul(hig::transpose(value(n.a)), g));
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, std::move(g));
        break;
      case Op::Scale:
        accumulate(n.a, hig::scale(g, n.factor));
        break;
      case Op::Sum:
        for (std::size_t t = 0; t + 1 < n.inputs.size(); ++t) accumulate(n.inputs[t], g);
        if (!n.inputs.empty()) accumulate(n.inputs.back(), std::move(g));
        break;
      case Op::Rectify: {
        const Matrix& x = value(n.a);
        Matrix gx = g;
        for (int k = 0; k < gx.size(); ++k)
          if (x[k] <= 0.0) gx[k] = 0.0;
        accumulate(n.a, std::move(gx));
        break;
      }
      case Op::Sigmoid: {
        const Matrix& s = n.value;
        Matrix gx = g;
        for (int k = 0; k < gx.size(); ++k) gx[k] *= s[k] * (1.0 - s[k]);
        accumulate(n.a, std::move(gx));
        break;
      }
      case Op::Transpose:
        accumulate(n.a, hig::transpose(g));
        break;
      case Op::ConcatRows: {
        const Matrix& ma = value(n.a);
        const Matrix& mb = value(n.b);
        Matrix ga(ma.rows(), ma.cols());
        Matrix gb(mb.rows(), mb.cols());
        std::copy(g.values().begin(), g.values().begin() + ma.size(), ga.values().begin());
        std::copy(g.values().begin() + ma.size(), g.values().end(), gb.values().begin());
        accumulate(n.a, std::move(ga));
        accumulate(n.b, std::move(gb));
        break;
      }
      case Op::FocalSum: {
        double upstream = g[0];
        const Matrix& z = value(n.a);
        Matrix gz(z.rows(), 1);
        for (int k = 0; k < z.rows(); ++k) {
          int y = n.targets[static_cast<std::size_t>(k)] > 0.5 ? 1 : 0;
          gz[k] = upstream * focal_grad_logit(z[k], y, n.focal);
        }
        accumulate(n.a, std::move(gz));
        break;
      }
    }
    if (n.op != Op::Param) g = Matrix();  // free as we go
  }
}

double gradient_check(const std::function<double()>& loss_value,
                      const std::function<void()>& compute_grads,
                      const std::vector<Parameter*>& params, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("gradient_check: epsilon must be positive");
  for (Parameter* p : params) p->zero_grad();
  compute_grads();

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int i = 0; i < p->value.size(); ++i) {
      double original = p->value[i];
      p->value[i] = original + epsilon;
      double up = loss_value();
      p->value[i] = original - epsilon;
      double down = loss_value();
      p->value[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("non-finite loss during finite-difference probe of " + p->name);
      double fd = (up - down) / (2.0 * epsilon);
      double ad = analytic[pi][i];
      double denom = std::max({std::abs(ad), std::abs(fd), 1e-8});
      max_rel = std::max(max_rel, std::abs(ad - fd) / denom);
    }
  }
  return max_rel;
}

}  // namespace hig

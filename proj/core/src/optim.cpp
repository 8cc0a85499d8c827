#include "mesh/optim.hpp"

#include <cmath>

namespace mesh {

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  require(m_.size() == params.size(), "adam: parameter list changed size between steps");
  ++steps_;
  const Real b1 = options_.beta1, b2 = options_.beta2;
  const Real correction1 = Real{1} - std::pow(b1, static_cast<Real>(steps_));
  const Real correction2 = Real{1} - std::pow(b2, static_cast<Real>(steps_));
  const Real lr = options_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    require(p.value.shape() == m_[k].shape(), "adam: shape of '" + p.name + "' changed");
    if (p.frozen) continue;
    require(p.grad.shape() == p.value.shape(), "adam: gradient shape mismatch for '" + p.name + "'");
    auto w = p.value.values();
    const auto g = p.grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (Real{1} - b1) * g[i];
      v[i] = b2 * v[i] + (Real{1} - b2) * g[i] * g[i];
      const Real m_hat = m[i] / correction1;
      const Real v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const Tensor> inputs, double eps) {
  require(eps > 0, "grad_check: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
    Var out = f(tape, vars);
    tape.backward(out);
    tape.check_finite();
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  auto evaluate = [&](const std::vector<Tensor>& point) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(tape.leaf(t, false));
    const Real y = f(tape, vars).value().item();
    if (!std::isfinite(y)) tape.check_finite();
    return static_cast<double>(y);
  };

  GradCheckReport report;
  std::vector<Tensor> point(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const Real original = point[k][i];
      point[k][i] = original + static_cast<Real>(eps);
      const double up = evaluate(point);
      point[k][i] = original - static_cast<Real>(eps);
      const double down = evaluate(point);
      point[k][i] = original;
      const double numeric = (up - down) / (2 * eps);
      const double error = std::abs(static_cast<double>(analytic[k][i]) - numeric) / std::max(1.0, std::abs(numeric));
      if (error > report.max_error) report = {error, k, i};
    }
  }
  return report;
}

}  // namespace mesh

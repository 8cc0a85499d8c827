#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mesh/autodiff.hpp"

namespace mesh {

struct AdamOptions {
  Real learning_rate = Real{0.001};
  Real beta1 = Real{0.9};
  Real beta2 = Real{0.999};
  Real epsilon = Real{1e-8};
};

// Bias-corrected Adam. Moments are keyed by position in the parameter list
// handed to step(); the list must keep the same order and shapes.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Applies one update from each parameter's `grad`; frozen parameters are
  // skipped. Gradients are left in place for the caller to clear.
  void step(std::span<Parameter* const> params);

  [[nodiscard]] std::size_t steps() const { return steps_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }
  [[nodiscard]] const std::vector<Tensor>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// ---- gradient checking ---------------------------------------------------

// Builds a scalar from leaf inputs on the supplied tape.
using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
  double max_error = 0;      // max |analytic - numeric| / max(1, |numeric|)
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients against central differences with step eps
// over every coordinate of every input. Evaluation tapes run in eval mode.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const Tensor> inputs, double eps = 1e-3);

}  // namespace mesh

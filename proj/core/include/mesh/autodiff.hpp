#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mesh/rng.hpp"
#include "mesh/tensor.hpp"

namespace mesh {

// A named trainable array. Lives outside any tape; tapes read its value and
// add into its gradient during backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  [[nodiscard]] std::size_t rows() const { return value().rows(); }
  [[nodiscard]] std::size_t cols() const { return value().cols(); }
  // Gradient after backward; zeros when the node was not reached.
  [[nodiscard]] Tensor grad() const;
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::uint32_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Records a forward computation as a topologically ordered node list.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  // `training` switches dropout on; `rng` seeds dropout masks. With
  // `grad_enabled` false parameters enter as constants and nothing is kept
  // for backward.
  explicit Tape(bool training = false, Rng rng = Rng{0}, bool grad_enabled = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value, bool requires_grad = true);
  // Frozen parameters enter as constants.
  Var param(Parameter& p);

  // Populates gradients for every requires_grad ancestor of `output`, which
  // must hold exactly one element. Parameter gradients are accumulated.
  void backward(Var output);

  // Throws NumericError naming the first node holding a non-finite value.
  void check_finite() const;

  [[nodiscard]] bool training() const { return training_; }
  Rng& rng() { return rng_; }
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

  // Op-author interface.
  Var record(const char* op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward);
  [[nodiscard]] const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Gradient w.r.t. node `id`, allocated as zeros on first access.
  Tensor& grad(std::uint32_t id);
  [[nodiscard]] const Tensor* grad_if_present(std::uint32_t id) const;

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    std::optional<Tensor> grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool training_;
  Rng rng_;
  bool grad_enabled_;
};

// ---- primitive operations ----------------------------------------------
// Element-wise ops require equal shapes unless noted.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var add_scalar(Var a, Real offset);
// a: (rows x cols), bias: any shape with `cols` elements, added to every row.
Var add_bias(Var a, Var bias);
// a: (rows x cols), column: (rows x 1); scales row i by column[i].
Var mul_rows(Var a, Var column);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var gather_rows(Var table, std::span<const std::uint32_t> indices);
// out[k] = mean of src rows i with dst[i] == k; zero rows where nothing lands.
Var scatter_mean_rows(Var src, std::span<const std::uint32_t> dst, std::size_t out_rows);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(Var a, Shape shape);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, Real slope);
// Randomized leaky rectifier evaluated at its expected slope (lower+upper)/2.
Var rrelu(Var a, Real lower = Real{1} / 8, Real upper = Real{1} / 3);
Var softmax(Var a);
Var log_softmax(Var a);
// x: (batch x in_channels x length), kernel: (out_channels x in_channels x width),
// bias: (out_channels). Zero same-padding; width must be odd.
Var conv1d(Var x, Var kernel, Var bias);
Var dropout(Var a, Real p);
Var sum(Var a);
Var mean(Var a);
// out[i] = a[i, index[i]], shape (rows x 1).
Var pick(Var a, std::span<const std::uint32_t> index);
Var normalize_rows(Var a, Real eps = Real{1e-12});

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace mesh

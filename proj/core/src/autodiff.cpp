#include "mesh/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace mesh {

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Var::grad() const {
  const Tensor* g = tape_->grad_if_present(id_);
  return g ? *g : Tensor(value().shape());
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Tape::Tape(bool training, Rng rng, bool grad_enabled)
    : training_(training), rng_(rng), grad_enabled_(grad_enabled) {
  nodes_.reserve(256);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  Node node;
  node.op = "param";
  node.value = p.value;
  node.requires_grad = !p.frozen && grad_enabled_;
  node.param = node.requires_grad ? &p : nullptr;
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [&](std::uint32_t i) { return nodes_[i].requires_grad; });
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(std::uint32_t id) {
  Node& node = nodes_[id];
  if (!node.grad) node.grad.emplace(node.value.shape());
  return *node.grad;
}

const Tensor* Tape::grad_if_present(std::uint32_t id) const {
  const Node& node = nodes_[id];
  return node.grad ? &*node.grad : nullptr;
}

void Tape::backward(Var output) {
  require(output.valid() && &output.tape() == this, "backward: output belongs to another tape");
  require(value(output.id()).size() == 1,
          "backward: output must be scalar, got shape " + shape_string(value(output.id()).shape()));
  if (!nodes_[output.id()].requires_grad) return;
  grad(output.id()).fill(Real{1});
  for (std::uint32_t id = output.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.grad || !node.requires_grad) continue;
    if (node.backward) node.backward(*this, id);
    if (node.param) {
      Tensor& pg = node.param->grad;
      if (pg.shape() != node.value.shape()) pg = Tensor(node.value.shape());
      const auto g = node.grad->values();
      auto dst = pg.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  }
}

void Tape::check_finite() const {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (!node.value.all_finite()) {
      throw NumericError("non-finite value at node " + std::to_string(id) + " (" + node.op + ", shape " +
                         shape_string(node.value.shape()) + ")");
    }
    if (node.grad && !node.grad->all_finite()) {
      throw NumericError("non-finite gradient at node " + std::to_string(id) + " (" + node.op + ")");
    }
  }
}

// ---- ops -------------------------------------------------------------------

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  require(&a.tape() == &b.tape(), std::string(op) + ": operands on different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
  check_same_tape(a, b, op);
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

void axpy(Tensor& dst, const Tensor& src, Real alpha = Real{1}) {
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * s[i];
}

template <class F, class D>
Var unary(const char* op, Var a, F forward, D derivative) {
  Tensor out(a.shape());
  const auto x = a.value().values();
  auto y = out.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = forward(x[i]);
  const std::uint32_t ia = a.id();
  return a.tape().record(op, std::move(out), {ia}, [ia, derivative](Tape& t, std::uint32_t self) {
    if (!t.requires_grad(ia)) return;
    const auto x = t.value(ia).values();
    const auto y = t.value(self).values();
    const auto g = t.grad(self).values();
    auto gx = t.grad(ia).values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  axpy(out, b.value());
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) axpy(t.grad(ia), g);
    if (t.requires_grad(ib)) axpy(t.grad(ib), g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  axpy(out, b.value(), Real{-1});
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) axpy(t.grad(ia), g);
    if (t.requires_grad(ib)) axpy(t.grad(ib), g, Real{-1});
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  {
    auto y = out.values();
    const auto bv = b.value().values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  }
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const auto g = t.grad(self).values();
    const auto av = t.value(ia).values();
    const auto bv = t.value(ib).values();
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia).values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib).values();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, Real factor) {
  return unary("scale", a, [factor](Real x) { return factor * x; }, [factor](Real, Real) { return factor; });
}

Var add_scalar(Var a, Real offset) {
  return unary("add_scalar", a, [offset](Real x) { return x + offset; }, [](Real, Real) { return Real{1}; });
}

Var add_bias(Var a, Var bias) {
  check_same_tape(a, bias, "add_bias");
  const std::size_t rows = a.rows(), cols = a.cols();
  require(bias.value().size() == cols, "add_bias: bias has " + std::to_string(bias.value().size()) +
                                           " elements for " + std::to_string(cols) + " columns");
  Tensor out = a.value();
  const auto bv = bias.value().values();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] += bv[c];
  }
  const std::uint32_t ia = a.id(), ib = bias.id();
  return a.tape().record("add_bias", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) axpy(t.grad(ia), g);
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib).values();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var mul_rows(Var a, Var column) {
  check_same_tape(a, column, "mul_rows");
  const std::size_t rows = a.rows(), cols = a.cols();
  require(column.value().size() == rows, "mul_rows: column of " + std::to_string(column.value().size()) +
                                             " for " + std::to_string(rows) + " rows");
  Tensor out = a.value();
  const auto cv = column.value().values();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] *= cv[r];
  }
  const std::uint32_t ia = a.id(), ic = column.id();
  return a.tape().record("mul_rows", std::move(out), {ia, ic}, [ia, ic](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const auto cv = t.value(ic).values();
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto dst = ga.row(r);
        const auto src = g.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c] * cv[r];
      }
    }
    if (t.requires_grad(ic)) {
      auto gc = t.grad(ic).values();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto src = g.row(r);
        const auto x = av.row(r);
        Real acc = 0;
        for (std::size_t c = 0; c < src.size(); ++c) acc += src[c] * x[c];
        gc[r] += acc;
      }
    }
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  const std::uint32_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    // dA = G * B^T, dB = A^T * G
    if (t.requires_grad(ia)) gemm(false, true, m, k, n, g.data(), bv.data(), t.grad(ia).data(), true);
    if (t.requires_grad(ib)) gemm(true, false, k, n, m, av.data(), g.data(), t.grad(ib).data(), true);
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require(x.rank() == 2, "transpose: rank-2 input required, got " + shape_string(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  const std::uint32_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {ia}, [ia](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.dim(0); ++i)
      for (std::size_t j = 0; j < ga.dim(1); ++j) ga.at(i, j) += g.at(j, i);
  });
}

Var gather_rows(Var table, std::span<const std::uint32_t> indices) {
  const Tensor& x = table.value();
  const std::size_t cols = x.cols();
  Shape shape = x.shape();
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < x.rows(), "gather_rows: index " + std::to_string(indices[i]) + " out of " +
                                       std::to_string(x.rows()) + " rows");
    std::copy_n(x.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  const std::uint32_t it = table.id();
  auto idx = std::make_shared<std::vector<std::uint32_t>>(indices.begin(), indices.end());
  return table.tape().record("gather_rows", std::move(out), {it}, [it, idx, cols](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(it);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      Real* dst = gt.data() + (*idx)[i] * cols;
      const Real* src = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var scatter_mean_rows(Var src, std::span<const std::uint32_t> dst, std::size_t out_rows) {
  const Tensor& x = src.value();
  require(dst.size() == x.rows(), "scatter_mean_rows: " + std::to_string(dst.size()) + " targets for " +
                                      std::to_string(x.rows()) + " rows");
  const std::size_t cols = x.cols();
  auto inv_count = std::make_shared<std::vector<Real>>(out_rows, Real{0});
  for (std::uint32_t k : dst) {
    require(k < out_rows, "scatter_mean_rows: target row " + std::to_string(k) + " out of range");
    (*inv_count)[k] += 1;
  }
  for (Real& c : *inv_count) c = c > 0 ? Real{1} / c : Real{0};
  Tensor out({out_rows, cols});
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Real* o = out.data() + dst[i] * cols;
    const Real* s = x.data() + i * cols;
    const Real w = (*inv_count)[dst[i]];
    for (std::size_t c = 0; c < cols; ++c) o[c] += w * s[c];
  }
  const std::uint32_t is = src.id();
  auto idx = std::make_shared<std::vector<std::uint32_t>>(dst.begin(), dst.end());
  return src.tape().record("scatter_mean_rows", std::move(out), {is},
                           [is, idx, inv_count, cols](Tape& t, std::uint32_t self) {
                             const Tensor& g = t.grad(self);
                             Tensor& gs = t.grad(is);
                             for (std::size_t i = 0; i < idx->size(); ++i) {
                               const Real w = (*inv_count)[(*idx)[i]];
                               const Real* from = g.data() + (*idx)[i] * cols;
                               Real* to = gs.data() + i * cols;
                               for (std::size_t c = 0; c < cols; ++c) to[c] += w * from[c];
                             }
                           });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  require(axis < first.size(), "concat: axis " + std::to_string(axis) + " out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> widths;  // axis extent * inner, per part
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    require(ok, "concat: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
    shape[axis] += s[axis];
    widths.push_back(s[axis] * inner);
    ids.push_back(p.id());
  }
  const std::size_t total = shape[axis] * inner;
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Real* src = parts[k].value().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * widths[k], widths[k], out.data() + o * total + offset);
    offset += widths[k];
  }
  return parts[0].tape().record("concat", std::move(out), ids,
                                [ids, widths, outer, total](Tape& t, std::uint32_t self) {
                                  const Tensor& g = t.grad(self);
                                  std::size_t offset = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.requires_grad(ids[k])) {
                                      Real* dst = t.grad(ids[k]).data();
                                      for (std::size_t o = 0; o < outer; ++o) {
                                        const Real* src = g.data() + o * total + offset;
                                        for (std::size_t c = 0; c < widths[k]; ++c) dst[o * widths[k] + c] += src[c];
                                      }
                                    }
                                    offset += widths[k];
                                  }
                                });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value();
  out.reshape(std::move(shape));
  const std::uint32_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {ia}, [ia](Tape& t, std::uint32_t self) {
    auto ga = t.grad(ia).values();
    const auto g = t.grad(self).values();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require(x.rank() == 2 && begin < end && end <= x.dim(1), "slice_cols: bad range");
  const std::size_t rows = x.dim(0), cols = x.dim(1), width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * cols + begin, width, out.data() + r * width);
  const std::uint32_t ia = a.id();
  return a.tape().record("slice_cols", std::move(out), {ia}, [ia, begin, width, cols](Tape& t, std::uint32_t self) {
    const Tensor& g = t.grad(self);
    Real* dst = t.grad(ia).data();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) dst[r * cols + begin + c] += g.data()[r * width + c];
  });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](Real x) {
        // Split by sign so exp never overflows.
        if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
        const Real e = std::exp(x);
        return e / (Real{1} + e);
      },
      [](Real, Real y) { return y * (Real{1} - y); });
}

Var tanh(Var a) {
  return unary("tanh", a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real{1} - y * y; });
}

// NaN passes through so non-finite inputs still surface.
Var relu(Var a) {
  return unary(
      "relu", a, [](Real x) { return x < 0 ? Real{0} : x; }, [](Real x, Real) { return x > 0 ? Real{1} : Real{0}; });
}

Var leaky_relu(Var a, Real slope) {
  return unary(
      "leaky_relu", a, [slope](Real x) { return x > 0 ? x : slope * x; },
      [slope](Real x, Real) { return x > 0 ? Real{1} : slope; });
}

Var rrelu(Var a, Real lower, Real upper) { return leaky_relu(a, (lower + upper) / 2); }

Var softmax(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    auto y = out.row(r);
    const Real m = *std::max_element(in.begin(), in.end());
    Real z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  const std::uint32_t ia = a.id();
  return a.tape().record("softmax", std::move(out), {ia}, [ia](Tape& t, std::uint32_t self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      Real dot = 0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var log_softmax(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    auto y = out.row(r);
    const Real m = *std::max_element(in.begin(), in.end());
    Real z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(in[c] - m);
    const Real lse = m + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) y[c] = in[c] - lse;
  }
  const std::uint32_t ia = a.id();
  return a.tape().record("log_softmax", std::move(out), {ia}, [ia](Tape& t, std::uint32_t self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      Real gsum = 0;
      for (Real v : gr) gsum += v;
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += gr[c] - std::exp(yr[c]) * gsum;
    }
  });
}

Var conv1d(Var x, Var kernel, Var bias) {
  check_same_tape(x, kernel, "conv1d");
  check_same_tape(x, bias, "conv1d");
  const Tensor& in = x.value();
  const Tensor& k = kernel.value();
  require(in.rank() == 3 && k.rank() == 3 && in.dim(1) == k.dim(1),
          "conv1d: input " + shape_string(in.shape()) + " vs kernel " + shape_string(k.shape()));
  require(k.dim(2) % 2 == 1, "conv1d: kernel width must be odd for same padding");
  require(bias.value().size() == k.dim(0), "conv1d: bias size must equal output channels");
  const std::size_t batch = in.dim(0), cin = in.dim(1), len = in.dim(2);
  const std::size_t cout = k.dim(0), width = k.dim(2);
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  Tensor out({batch, cout, len});
  const auto bv = bias.value().values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      Real* y = out.data() + (b * cout + co) * len;
      for (std::size_t p = 0; p < len; ++p) y[p] = bv[co];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const Real* xs = in.data() + (b * cin + ci) * len;
        const Real* ks = k.data() + (co * cin + ci) * width;
        for (std::size_t j = 0; j < width; ++j) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - half;
          const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t hi = shift > 0 ? len - static_cast<std::size_t>(shift) : len;
          for (std::size_t p = lo; p < hi; ++p) y[p] += ks[j] * xs[p + shift];
        }
      }
    }
  }
  const std::uint32_t ix = x.id(), ik = kernel.id(), ib = bias.id();
  return x.tape().record("conv1d", std::move(out), {ix, ik, ib},
                         [ix, ik, ib, batch, cin, len, cout, width, half](Tape& t, std::uint32_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& in = t.value(ix);
                           const Tensor& k = t.value(ik);
                           const bool gx = t.requires_grad(ix), gk = t.requires_grad(ik);
                           Real* dx = gx ? t.grad(ix).data() : nullptr;
                           Real* dk = gk ? t.grad(ik).data() : nullptr;
                           if (t.requires_grad(ib)) {
                             auto db = t.grad(ib).values();
                             for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t co = 0; co < cout; ++co) {
                                 const Real* gy = g.data() + (b * cout + co) * len;
                                 for (std::size_t p = 0; p < len; ++p) db[co] += gy[p];
                               }
                           }
                           if (!gx && !gk) return;
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t co = 0; co < cout; ++co) {
                               const Real* gy = g.data() + (b * cout + co) * len;
                               for (std::size_t ci = 0; ci < cin; ++ci) {
                                 const Real* xs = in.data() + (b * cin + ci) * len;
                                 const Real* ks = k.data() + (co * cin + ci) * width;
                                 for (std::size_t j = 0; j < width; ++j) {
                                   const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - half;
                                   const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                                   const std::size_t hi = shift > 0 ? len - static_cast<std::size_t>(shift) : len;
                                   if (gk) {
                                     Real acc = 0;
                                     for (std::size_t p = lo; p < hi; ++p) acc += gy[p] * xs[p + shift];
                                     dk[(co * cin + ci) * width + j] += acc;
                                   }
                                   if (gx) {
                                     Real* dxs = dx + (b * cin + ci) * len;
                                     for (std::size_t p = lo; p < hi; ++p) dxs[p + shift] += gy[p] * ks[j];
                                   }
                                 }
                               }
                             }
                           }
                         });
}

Var dropout(Var a, Real p) {
  require(p >= 0 && p < 1, "dropout: rate must lie in [0, 1)");
  Tape& tape = a.tape();
  if (!tape.training() || p == 0) return a;
  auto mask = std::make_shared<std::vector<Real>>(a.value().size());
  Rng rng = tape.rng().split(tape.node_count());
  const Real keep_scale = Real{1} / (Real{1} - p);
  for (Real& m : *mask) m = rng.uniform() < p ? Real{0} : keep_scale;
  Tensor out = a.value();
  auto y = out.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= (*mask)[i];
  const std::uint32_t ia = a.id();
  return tape.record("dropout", std::move(out), {ia}, [ia, mask](Tape& t, std::uint32_t self) {
    const auto g = t.grad(self).values();
    auto ga = t.grad(ia).values();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (*mask)[i];
  });
}

Var sum(Var a) {
  Real total = 0;
  for (Real v : a.value().values()) total += v;
  const std::uint32_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(total), {ia}, [ia](Tape& t, std::uint32_t self) {
    const Real g = t.grad(self)[0];
    for (Real& v : t.grad(ia).values()) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  require(n > 0, "mean: empty tensor");
  return scale(sum(a), Real{1} / static_cast<Real>(n));
}

Var pick(Var a, std::span<const std::uint32_t> index) {
  const Tensor& x = a.value();
  require(index.size() == x.rows(), "pick: one index per row required");
  const std::size_t cols = x.cols();
  Tensor out({x.rows(), 1});
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] < cols, "pick: column index out of range");
    out[r] = x.at(r, index[r]);
  }
  const std::uint32_t ia = a.id();
  auto idx = std::make_shared<std::vector<std::uint32_t>>(index.begin(), index.end());
  return a.tape().record("pick", std::move(out), {ia}, [ia, idx, cols](Tape& t, std::uint32_t self) {
    const auto g = t.grad(self).values();
    Real* ga = t.grad(ia).data();
    for (std::size_t r = 0; r < idx->size(); ++r) ga[r * cols + (*idx)[r]] += g[r];
  });
}

Var normalize_rows(Var a, Real eps) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  auto norms = std::make_shared<std::vector<Real>>(rows);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    Real ss = 0;
    for (Real v : in) ss += v * v;
    const Real n = std::max(std::sqrt(ss), eps);
    (*norms)[r] = n;
    auto y = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) y[c] = in[c] / n;
  }
  const std::uint32_t ia = a.id();
  return a.tape().record("normalize_rows", std::move(out), {ia}, [ia, norms, eps](Tape& t, std::uint32_t self) {
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      auto dst = ga.row(r);
      const Real n = (*norms)[r];
      // Below eps the denominator is constant and the map is linear.
      Real dot = 0;
      if (n > eps)
        for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += (gr[c] - yr[c] * dot) / n;
    }
  });
}

}  // namespace mesh

#include "qedgix/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "qedgix/error.hpp"

namespace qedgix::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.data(), t.rows(), t.cols()); }

Tensor matrix_like(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), [&] { return
          std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()); });
}

template <class F, class D>
Var unary(Var a, F forward, D derivative) {
  const Tensor& av = a.value();
  Tensor out = matrix_like(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(av[i]);
  return a.tape->record(std::move(out), {a}, [a, derivative](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(a)) return;
    const Tensor& x = tape.value(a);
    Tensor& ga = tape.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(x[i]);
  });
}

// Derivative expressed through the op's own output (sigmoid, tanh).
template <class F, class D>
Var unary_from_output(Var a, F forward, D derivative) {
  const Tensor& av = a.value();
  Tensor out = matrix_like(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(av[i]);
  const Var self{a.tape, static_cast<std::uint32_t>(a.tape->size())};
  return a.tape->record(std::move(out), {a}, [a, self, derivative](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(a)) return;
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(y[i]);
  });
}

}  // namespace

void NeighborList::add_node(std::span<const std::uint32_t> adjacent) {
  neighbors.insert(neighbors.end(), adjacent.begin(), adjacent.end());
  offsets.push_back(static_cast<std::uint32_t>(neighbors.size()));
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), [&] { return
          "matmul: inner dimensions differ " + shape_string(av.shape()) + " x " + shape_string(bv.shape()); });
  Tensor out = matrix_like(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) view(tape.grad_slot(a)).noalias() += view(g) * view(tape.value(b)).transpose();
    if (tape.requires_grad(b)) view(tape.grad_slot(b)).noalias() += view(tape.value(a)).transpose() * view(g);
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require(bv.size() == xv.cols(), [&] { return "add_bias: bias width " + std::to_string(bv.size()) + " vs input width " +
                                      std::to_string(xv.cols()); });
  Tensor out = xv.reshaped({xv.rows(), xv.cols()});
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  return x.tape->record(std::move(out), {x, bias}, [x, bias](Tape& tape, const Tensor& g) {
    tape.accumulate(x, g);
    if (tape.requires_grad(bias)) {
      Tensor& gb = tape.grad_slot(bias);
      const std::size_t cols = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g(r, c);
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

Var add(Var a, Var b) {
  check_same(a.value(), b.value(), "add");
  Tensor out = a.value().reshaped({a.rows(), a.cols()});
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same(a.value(), b.value(), "sub");
  Tensor out = a.value().reshaped({a.rows(), a.cols()});
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same(a.value(), b.value(), "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = matrix_like(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      Tensor& ga = tape.grad_slot(a);
      const Tensor& bv = tape.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_slot(b);
      const Tensor& av = tape.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); }, [](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Var absolute(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sigmoid(Var a) {
  return unary_from_output(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_from_output(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var concat_cols(std::initializer_list<Var> parts) {
  require(parts.size() > 0, "concat_cols: no inputs");
  const std::size_t rows = parts.begin()->rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out = matrix_like(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.data() + r * pv.cols(), pv.cols(), out.data() + r * cols + offset);
    offset += pv.cols();
  }
  std::vector<Var> inputs(parts);
  Tape* tape = parts.begin()->tape;
  Var result = tape->record(std::move(out), parts, [inputs, cols](Tape& tape, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t pc = tape.value(p).cols();
      if (tape.requires_grad(p)) {
        Tensor& gp = tape.grad_slot(p);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, offset + c);
      }
      offset += pc;
    }
  });
  return result;
}

Var concat_rows(std::initializer_list<Var> parts) {
  require(parts.size() > 0, "concat_rows: no inputs");
  const std::size_t cols = parts.begin()->cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Var& p : parts) values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  std::vector<Var> inputs(parts);
  return parts.begin()->tape->record(Tensor({rows, cols}, std::move(values)), parts,
                                     [inputs](Tape& tape, const Tensor& g) {
                                       std::size_t offset = 0;
                                       for (const Var& p : inputs) {
                                         const std::size_t n = tape.value(p).size();
                                         if (tape.requires_grad(p)) {
                                           Tensor& gp = tape.grad_slot(p);
                                           for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
                                         }
                                         offset += n;
                                       }
                                     });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require(begin < end && end <= xv.cols(), "slice_cols: bad range");
  const std::size_t width = end - begin;
  Tensor out = matrix_like(xv.rows(), width);
  for (std::size_t r = 0; r < xv.rows(); ++r) std::copy_n(xv.data() + r * xv.cols() + begin, width, out.data() + r * width);
  return x.tape->record(std::move(out), {x}, [x, begin, width](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) gx(r, begin + c) += g(r, c);
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require(begin < end && end <= xv.rows(), "slice_rows: bad range");
  const std::size_t cols = xv.cols();
  std::vector<double> values(xv.data() + begin * cols, xv.data() + end * cols);
  return x.tape->record(Tensor({end - begin, cols}, std::move(values)), {x},
                        [x, begin, cols](Tape& tape, const Tensor& g) {
                          if (!tape.requires_grad(x)) return;
                          Tensor& gx = tape.grad_slot(x);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
                        });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tensor out = x.value().reshaped({rows, cols});
  return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var pick(Var x, std::span<const std::size_t> column_per_row) {
  const Tensor& xv = x.value();
  require(column_per_row.size() == xv.rows(), "pick: one column index per row required");
  Tensor out = matrix_like(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    require(column_per_row[r] < xv.cols(), "pick: column index out of range");
    out[r] = xv(r, column_per_row[r]);
  }
  std::vector<std::size_t> cols(column_per_row.begin(), column_per_row.end());
  return x.tape->record(std::move(out), {x}, [x, cols = std::move(cols)](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t r = 0; r < cols.size(); ++r) gx(r, cols[r]) += g[r];
  });
}

Var row_max(Var x) {
  const Tensor& xv = x.value();
  std::vector<std::size_t> arg(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < xv.cols(); ++c)
      if (xv(r, c) > xv(r, best)) best = c;
    arg[r] = best;
  }
  return pick(x, arg);
}

Var row_sum(Var x) {
  const Tensor& xv = x.value();
  Tensor out = matrix_like(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) acc += xv(r, c);
    out[r] = acc;
  }
  return x.tape->record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g[r];
  });
}

Var mul_col(Var x, Var column) {
  const Tensor& xv = x.value();
  const Tensor& cv = column.value();
  require(cv.size() == xv.rows(), "mul_col: one factor per row required");
  Tensor out = matrix_like(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) * cv[r];
  return x.tape->record(std::move(out), {x, column}, [x, column](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    const Tensor& cv = tape.value(column);
    if (tape.requires_grad(x)) {
      Tensor& gx = tape.grad_slot(x);
      for (std::size_t r = 0; r < xv.rows(); ++r)
        for (std::size_t c = 0; c < xv.cols(); ++c) gx(r, c) += g(r, c) * cv[r];
    }
    if (tape.requires_grad(column)) {
      Tensor& gc = tape.grad_slot(column);
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < xv.cols(); ++c) acc += g(r, c) * xv(r, c);
        gc[r] += acc;
      }
    }
  });
}

Var segment_sum_rows(Var x, std::size_t group) {
  const Tensor& xv = x.value();
  require(group > 0 && xv.rows() % group == 0, "segment_sum_rows: row count not divisible by group");
  const std::size_t segments = xv.rows() / group;
  const std::size_t cols = xv.cols();
  Tensor out = matrix_like(segments, cols);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t k = 0; k < group; ++k)
      for (std::size_t c = 0; c < cols; ++c) out(s, c) += xv(s * group + k, c);
  return x.tape->record(std::move(out), {x}, [x, group](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(r / group, c);
  });
}

Var repeat_rows(Var x, std::size_t times) {
  const Tensor& xv = x.value();
  require(times > 0, "repeat_rows: times must be positive");
  const std::size_t cols = xv.cols();
  Tensor out = matrix_like(xv.rows() * times, cols);
  for (std::size_t r = 0; r < out.rows(); ++r) std::copy_n(xv.data() + (r / times) * cols, cols, out.data() + r * cols);
  return x.tape->record(std::move(out), {x}, [x, times](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r / times, c) += g(r, c);
  });
}

Var add_scaled_row(Var x, std::span<const double> coeff, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(coeff.size() == xv.rows() && rv.size() == xv.cols(), "add_scaled_row: shape mismatch");
  Tensor out = xv.reshaped({xv.rows(), xv.cols()});
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) += coeff[r] * rv[c];
  std::vector<double> k(coeff.begin(), coeff.end());
  return x.tape->record(std::move(out), {x, row}, [x, row, k = std::move(k)](Tape& tape, const Tensor& g) {
    tape.accumulate(x, g);
    if (tape.requires_grad(row)) {
      Tensor& gr = tape.grad_slot(row);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += k[r] * g(r, c);
    }
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  return x.tape->record(Tensor::scalar(acc), {x}, [x](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    Tensor& gx = tape.grad_slot(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var edge_relu_sum(Var left, Var right, Var bias, const NeighborList& graph) {
  const Tensor& lv = left.value();
  const Tensor& rv = right.value();
  const Tensor& bv = bias.value();
  require(lv.rows() <= graph.nodes() && rv.rows() == graph.nodes(), "edge_relu_sum: node count mismatch");
  require(lv.cols() == rv.cols() && bv.size() == lv.cols(), "edge_relu_sum: width mismatch");
  const std::size_t width = lv.cols();
  Tensor out = matrix_like(lv.rows(), width);
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    double* o = out.data() + i * width;
    const double* li = lv.data() + i * width;
    for (std::uint32_t j : graph.of(i)) {
      const double* rj = rv.data() + j * width;
      for (std::size_t c = 0; c < width; ++c) {
        const double pre = li[c] + rj[c] + bv[c];
        if (pre > 0.0) o[c] += pre;
      }
    }
  }
  auto edges = std::make_shared<const NeighborList>(graph);
  return left.tape->record(
      std::move(out), {left, right, bias}, [left, right, bias, edges](Tape& tape, const Tensor& g) {
        const NeighborList& graph = *edges;
        const Tensor& lv = tape.value(left);
        const Tensor& rv = tape.value(right);
        const Tensor& bv = tape.value(bias);
        const std::size_t width = lv.cols();
        Tensor* gl = tape.requires_grad(left) ? &tape.grad_slot(left) : nullptr;
        Tensor* gr = tape.requires_grad(right) ? &tape.grad_slot(right) : nullptr;
        Tensor* gb = tape.requires_grad(bias) ? &tape.grad_slot(bias) : nullptr;
        for (std::size_t i = 0; i < lv.rows(); ++i) {
          const double* li = lv.data() + i * width;
          const double* gi = g.data() + i * width;
          for (std::uint32_t j : graph.of(i)) {
            const double* rj = rv.data() + j * width;
            for (std::size_t c = 0; c < width; ++c) {
              if (li[c] + rj[c] + bv[c] <= 0.0) continue;
              if (gl) (*gl)[i * width + c] += gi[c];
              if (gr) (*gr)[j * width + c] += gi[c];
              if (gb) (*gb)[c] += gi[c];
            }
          }
        }
      });
}

Var neighbor_sum(Var x, const NeighborList& graph) { return neighbor_sum(x, graph, graph.nodes()); }

Var neighbor_sum(Var x, const NeighborList& graph, std::size_t rows) {
  const Tensor& xv = x.value();
  require(xv.rows() == graph.nodes() && rows <= graph.nodes(), "neighbor_sum: node count mismatch");
  const std::size_t width = xv.cols();
  Tensor out = matrix_like(rows, width);
  for (std::size_t i = 0; i < rows; ++i) {
    double* o = out.data() + i * width;
    for (std::uint32_t j : graph.of(i)) {
      const double* xj = xv.data() + j * width;
      for (std::size_t c = 0; c < width; ++c) o[c] += xj[c];
    }
  }
  auto edges = std::make_shared<const NeighborList>(graph);
  return x.tape->record(std::move(out), {x}, [x, edges, rows](Tape& tape, const Tensor& g) {
    if (!tape.requires_grad(x)) return;
    const NeighborList& graph = *edges;
    Tensor& gx = tape.grad_slot(x);
    const std::size_t width = gx.cols();
    for (std::size_t i = 0; i < rows; ++i) {
      const double* gi = g.data() + i * width;
      for (std::uint32_t j : graph.of(i)) {
        double* gj = gx.data() + j * width;
        for (std::size_t c = 0; c < width; ++c) gj[c] += gi[c];
      }
    }
  });
}

}  // namespace qedgix::nn

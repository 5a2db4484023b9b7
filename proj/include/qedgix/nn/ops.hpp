#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qedgix/nn/tape.hpp"

namespace qedgix::nn {

/// Compressed adjacency: neighbors of node i are
/// neighbors[offsets[i] .. offsets[i+1]).
struct NeighborList {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> neighbors;

  std::size_t nodes() const noexcept { return offsets.size() - 1; }
  std::size_t degree(std::size_t i) const noexcept { return offsets[i + 1] - offsets[i]; }
  std::span<const std::uint32_t> of(std::size_t i) const noexcept {
    return {neighbors.data() + offsets[i], degree(i)};
  }
  void add_node(std::span<const std::uint32_t> adjacent);
};

// Affine and matrix products. Rank-2 operands throughout.
Var matmul(Var a, Var b);
Var add_bias(Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var linear(Var x, Var weight, Var bias);

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var square(Var a);
Var relu(Var a);
/// x for x > 0, exp(x) - 1 otherwise.
Var elu(Var a);
Var absolute(Var a);
Var sigmoid(Var a);
Var tanh(Var a);

// Shape plumbing.
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, std::size_t rows, std::size_t cols);

// Row-wise reductions and broadcasts.
Var pick(Var x, std::span<const std::size_t> column_per_row);  // n x 1
Var row_max(Var x);                                           // n x 1
Var row_sum(Var x);                                           // n x 1
Var mul_col(Var x, Var column);                               // x[r][c] * column[r]
Var segment_sum_rows(Var x, std::size_t group);               // sums consecutive row groups
Var repeat_rows(Var x, std::size_t times);                    // inverse layout of segment_sum_rows
Var add_scaled_row(Var x, std::span<const double> coeff, Var row);  // x + coeff (outer) row
Var sum(Var x);
Var mean(Var x);

// Graph aggregation.
/// out[i] = sum over j in N(i) of relu(left[i] + right[j] + bias). `left`
/// may cover only the first rows of the graph; out has as many rows as left.
Var edge_relu_sum(Var left, Var right, Var bias, const NeighborList& graph);
/// out[i] = sum over j in N(i) of x[j].
Var neighbor_sum(Var x, const NeighborList& graph);
/// Same for the first `rows` nodes only.
Var neighbor_sum(Var x, const NeighborList& graph, std::size_t rows);

}  // namespace qedgix::nn

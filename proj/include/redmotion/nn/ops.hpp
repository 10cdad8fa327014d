#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "redmotion/nn/autograd.hpp"

namespace redmotion::nn {

// Matrix product with optional transposition of either operand.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a [m, n] + row [1, n] broadcast over rows.
Var add_row(Var a, Var row);

Var gelu(Var a);
Var relu(Var a);

// Row-wise normalization with affine gamma/beta [1, n].
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// Row-wise softmax. `allow` (rows*cols, row-major) marks attendable entries;
// empty means all. A row with nothing allowed throws.
Var softmax_rows(Var x, std::span<const std::uint8_t> allow = {});

Var transpose(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

// Mean over rows -> [1, n]. With a row mask only flagged rows count.
Var mean_rows(Var a, std::span<const std::uint8_t> row_mask = {});
// Mean over columns -> [m, 1].
Var mean_cols(Var a);
Var sum(Var a);

// table [v, e], picks rows by index -> [indices.size(), e].
Var gather_rows(Var table, std::span<const std::size_t> indices);

// Per-head scaled dot-product attention restricted to the band |i - j| <= half_window.
// q, k, v are [n, d] with d divisible by heads; returns the concatenated heads [n, d].
// Only band entries are ever computed.
Var banded_attention(Var q, Var k, Var v, std::size_t heads, std::size_t half_window);

}  // namespace redmotion::nn

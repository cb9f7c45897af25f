#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cellgraph/numerics/matrix.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/numerics/tape.hpp"

// Differentiable primitives recorded on a Tape.
//
// Binary elementwise ops accept an rhs of the same shape, a 1xC row
// (broadcast down rows), an Rx1 column (broadcast across columns) or a 1x1
// scalar. Gradients of broadcast operands are reduced back to their shape.
namespace cellgraph::ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float s);
Var add_scalar(Var a, float s);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// Elementwise a^p for a >= 0 (p >= 1 keeps the gradient finite at 0).
Var pow(Var a, float p);

Var row_softmax(Var a);
Var row_log_softmax(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);

/// 1xC column means.
Var mean_rows(Var a);
/// 1x1 sum and mean of all entries.
Var sum(Var a);
Var mean(Var a);

/// Rx1 cosine similarity of matching rows. A zero-norm row yields 0 with no
/// gradient; `zero_rows`, when given, receives how many such rows were seen.
Var cosine_rows(Var a, Var b, std::size_t* zero_rows = nullptr);

/// Inverted dropout: scales kept entries by 1/(1-rate) in training, identity otherwise.
Var dropout(Var a, float rate, Rng& rng, bool training);

/// S * a for a constant sparse S.
Var spmm(const SparseMatrix& s, Var a);

Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Copy of `a` with the listed rows overwritten by the 1xC `token`.
Var replace_rows(Var a, std::span<const std::size_t> rows, Var token);

/// Rx1 entries a(i, labels[i]).
Var pick(Var a, std::span<const std::uint32_t> labels);

/// Softmax of an Nx1 score column within each segment [offsets[s], offsets[s+1]).
Var segment_softmax(Var scores, std::span<const std::size_t> offsets);
/// SxC per-segment row sums.
Var segment_sum(Var a, std::span<const std::size_t> offsets);

}  // namespace cellgraph::ops

#pragma once

#include "cellgraph/numerics/matrix.hpp"
#include "cellgraph/numerics/rng.hpp"

namespace cellgraph {

/// Glorot uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0);

}  // namespace cellgraph

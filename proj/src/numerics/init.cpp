#include "cellgraph/numerics/init.hpp"

#include <cmath>

namespace cellgraph {

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (float& v : m.data()) v = static_cast<float>(rng.uniform(-a, a));
    return m;
}

Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd) {
    Matrix m(rows, cols);
    for (float& v : m.data()) v = static_cast<float>(rng.normal(0.0, sd));
    return m;
}

}  // namespace cellgraph

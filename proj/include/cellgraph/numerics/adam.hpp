#pragma once

#include <cstdint>
#include <vector>

#include "cellgraph/numerics/tape.hpp"

namespace cellgraph {

struct AdamConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    float weight_decay = 0.0f;  // coupled L2, added to the gradient
};

/// Adam with bias correction. Moments are kept per parameter in the order
/// the parameters are passed to step().
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// Applies one update. Shapes must match the parameter list of the first call.
    void step(const std::vector<Parameter*>& params, const std::vector<Matrix>& grads);

    const AdamConfig& config() const noexcept { return config_; }
    AdamConfig& config() noexcept { return config_; }
    std::uint64_t steps() const noexcept { return step_; }

    // Exposed for checkpointing.
    const std::vector<Matrix>& first_moments() const noexcept { return m_; }
    const std::vector<Matrix>& second_moments() const noexcept { return v_; }
    void restore(std::uint64_t step, std::vector<Matrix> m, std::vector<Matrix> v);

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

}  // namespace cellgraph

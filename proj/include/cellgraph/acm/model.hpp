#pragma once

#include <string>
#include <vector>

#include "cellgraph/acm/filters.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/numerics/tape.hpp"

namespace cellgraph::acm {

/// x W + b with W stored in x out.
struct Linear {
    Parameter weight;
    Parameter bias;

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, const std::string& name);
    Var forward(Tape& tape, Var x);
    std::size_t in_dim() const { return weight.value.rows(); }
    std::size_t out_dim() const { return weight.value.cols(); }
};

enum class ChannelMode {
    adaptive,       // learned per-node mix of low-pass, high-pass and identity
    low_pass_only,  // mix fixed to the low-pass channel (ablation)
};

struct LayerConfig {
    std::size_t in_dim = 0;
    std::size_t hidden_dim = 0;  // width of inner MLP layers
    std::size_t out_dim = 0;
    int mlp_depth = 2;           // linear layers per channel MLP
    bool final_activation = true;  // ReLU after the last linear of each MLP
    double temperature = 1.0;
    ChannelMode mode = ChannelMode::adaptive;
};

/// Channel order used everywhere: low-pass, high-pass, identity.
inline constexpr int kChannels = 3;

/// One adaptive channel mixing layer.
class AcmLayer {
public:
    AcmLayer(const LayerConfig& config, Rng& rng, const std::string& name);

    /// `alpha`, when given, receives the n x 3 mixing weights.
    Var forward(Tape& tape, Var h, const ChannelFilters& filters, Matrix* alpha = nullptr);
    std::vector<Parameter*> parameters();
    const LayerConfig& config() const { return config_; }

private:
    Var channel_mlp(Tape& tape, int channel, Var x);

    LayerConfig config_;
    std::vector<Linear> mlp_[kChannels];
    Parameter gate_[kChannels];  // out_dim x 1
    Parameter mix_;              // 3 x 3
};

struct EncoderConfig {
    std::size_t in_dim = 0;
    std::size_t hidden_dim = 64;
    std::size_t layer_dim = 64;  // output width of every layer
    std::size_t out_dim = 64;    // width after the jumping-knowledge projection
    int layers = 5;
    int mlp_depth = 2;
    bool final_activation = true;
    double temperature = 1.0;
    ChannelMode mode = ChannelMode::adaptive;
};

/// Stack of ACM layers whose outputs are concatenated and projected.
class AcmEncoder {
public:
    AcmEncoder(const EncoderConfig& config, Rng& rng, const std::string& name);

    Var forward(Tape& tape, Var x, const ChannelFilters& filters);
    std::vector<Parameter*> parameters();
    const EncoderConfig& config() const { return config_; }
    std::size_t parameter_count();

private:
    EncoderConfig config_;
    std::vector<AcmLayer> layers_;
    Linear jk_;
};

std::size_t count_parameters(const std::vector<Parameter*>& params);

/// Per-graph mean of real-node rows; zero for graphs without real nodes.
Matrix region_embedding(const Matrix& h, const graph::GraphBatch& batch);

}  // namespace cellgraph::acm

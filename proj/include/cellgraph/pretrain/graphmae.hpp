#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "cellgraph/acm/checkpoint.hpp"
#include "cellgraph/acm/model.hpp"
#include "cellgraph/graph/batch.hpp"
#include "cellgraph/pretrain/mask.hpp"

namespace cellgraph::pretrain {

struct PretrainConfig {
    double mask_ratio = 0.5;
    double replace_ratio = 0.1;
    double gamma = 2.0;
    std::size_t hidden_dim = 512;
    int encoder_layers = 5;
    int decoder_layers = 1;
    int mlp_depth = 2;
    double temperature = 1.0;
    acm::ChannelMode channel_mode = acm::ChannelMode::adaptive;
    acm::EdgeWeighting edge_weighting = acm::EdgeWeighting::distance;
    int epochs = 100;
    std::size_t batch_size = 2048;  // graphs per step
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs; 0 keeps only the final checkpoint

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

nlohmann::json to_json(const PretrainConfig& c);
PretrainConfig config_from_json(const nlohmann::json& j);

/// Per-feature z-score fitted on real nodes of a training corpus. Constant
/// features keep scale 1.
struct FeatureScaler {
    Matrix mean;   // 1 x F
    Matrix scale;  // 1 x F

    static FeatureScaler fit(std::span<const graph::CellGraph> graphs);
    Matrix apply(const Matrix& x) const;
};

/// Mean weight over all edges of a corpus; 1.0 if it has none.
float mean_edge_weight(std::span<const graph::CellGraph> graphs);

/// Encoder, single-layer decoder and the two mask tokens.
class GraphMae {
public:
    GraphMae(const PretrainConfig& config, std::size_t feature_dim);

    /// Parameters in a fixed declaration order.
    std::vector<Parameter*> parameters();
    std::size_t parameter_count() { return acm::count_parameters(parameters()); }

    Var encode(Tape& tape, Var x, const acm::ChannelFilters& filters);

    /// Mask, encode, re-mask, decode; scaled cosine error on the masked rows.
    Var loss(Tape& tape, const graph::GraphBatch& batch, const acm::ChannelFilters& filters, const MaskPlan& plan,
             std::size_t* zero_rows = nullptr);

    const PretrainConfig& config() const { return config_; }
    std::size_t feature_dim() const { return feature_dim_; }
    acm::AcmEncoder& encoder() { return encoder_; }
    acm::AcmEncoder& decoder() { return decoder_; }
    Parameter& encoder_token() { return encoder_token_; }
    Parameter& decoder_token() { return decoder_token_; }

private:
    PretrainConfig config_;
    std::size_t feature_dim_;
    Rng init_rng_;
    acm::AcmEncoder encoder_;
    acm::AcmEncoder decoder_;
    Parameter encoder_token_;
    Parameter decoder_token_;
};

/// Standardized features plus a virtual node, ready for batching.
std::vector<graph::GraphBlock> prepare_blocks(std::span<const graph::CellGraph> graphs, const FeatureScaler& scaler,
                                              float virtual_edge_weight);

}  // namespace cellgraph::pretrain

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cellgraph/acm/checkpoint.hpp"
#include "cellgraph/graph/batch.hpp"
#include "cellgraph/numerics/adam.hpp"
#include "cellgraph/pretrain/graphmae.hpp"

namespace cellgraph::pretrain {

struct EpochReport {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    std::size_t steps = 0;
    std::size_t skipped = 0;  // batches with nothing to mask
};

/// Model plus the preprocessing fitted on its training corpus.
struct PretrainedModel {
    std::unique_ptr<GraphMae> model;
    FeatureScaler scaler;
    float virtual_edge_weight = 1.0f;

    /// Reads the model part of a training checkpoint.
    static PretrainedModel from_checkpoint(const acm::Checkpoint& ckpt);
};

/// Owns the model, optimizer and epoch counter of one pre-training run.
///
/// Epoch e (1-based) shuffles graphs with Rng::derive(seed, e) and masks
/// batch b with Rng::derive(seed, e, b + 1), so any epoch can be replayed
/// from a checkpoint without the preceding ones.
class Pretrainer {
public:
    Pretrainer(const PretrainConfig& config, std::span<const graph::CellGraph> graphs);
    /// Continues a run; `graphs` must be the corpus it was started on.
    Pretrainer(const acm::Checkpoint& ckpt, std::span<const graph::CellGraph> graphs);

    EpochReport run_epoch();

    /// One optimizer step on `batch`; nullopt (and no update) if the plan is empty.
    std::optional<double> step(const graph::GraphBatch& batch, Rng& rng);

    /// Graph indices of each batch of epoch `epoch`.
    std::vector<std::vector<std::size_t>> epoch_batches(int epoch) const;

    acm::Checkpoint checkpoint();

    int epochs_done() const noexcept { return epoch_; }
    const std::vector<double>& losses() const noexcept { return losses_; }
    const PretrainConfig& config() const noexcept { return config_; }
    GraphMae& model() { return *state_.model; }
    const FeatureScaler& scaler() const noexcept { return state_.scaler; }
    float virtual_edge_weight() const noexcept { return state_.virtual_edge_weight; }
    const Adam& optimizer() const noexcept { return adam_; }

private:
    void prepare(std::span<const graph::CellGraph> graphs);

    PretrainConfig config_;
    PretrainedModel state_;
    Adam adam_;
    std::vector<graph::GraphBlock> blocks_;
    int epoch_ = 0;
    std::vector<double> losses_;
};

}  // namespace cellgraph::pretrain

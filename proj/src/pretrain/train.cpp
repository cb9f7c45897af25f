#include "cellgraph/pretrain/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "cellgraph/acm/filters.hpp"
#include "cellgraph/util/bytes.hpp"

namespace cellgraph::pretrain {

namespace {

constexpr int kCheckpointVersion = 1;

AdamConfig adam_config(const PretrainConfig& c) {
    AdamConfig a;
    a.learning_rate = static_cast<float>(c.learning_rate);
    a.weight_decay = static_cast<float>(c.weight_decay);
    return a;
}

void put_model(acm::Checkpoint& ckpt, PretrainedModel& m) {
    ckpt.meta["config"] = to_json(m.model->config());
    ckpt.meta["feature_dim"] = m.model->feature_dim();
    ckpt.meta["virtual_edge_weight"] = m.virtual_edge_weight;
    ckpt.put_parameters("model.", m.model->parameters());
    ckpt.put("scaler.mean", m.scaler.mean);
    ckpt.put("scaler.scale", m.scaler.scale);
}

}  // namespace

PretrainedModel PretrainedModel::from_checkpoint(const acm::Checkpoint& ckpt) {
    if (!ckpt.meta.contains("config") || !ckpt.meta.contains("feature_dim"))
        throw FormatError("checkpoint: not a pre-training checkpoint");
    PretrainedModel m;
    const PretrainConfig config = config_from_json(ckpt.meta.at("config"));
    m.model = std::make_unique<GraphMae>(config, ckpt.meta.at("feature_dim").get<std::size_t>());
    ckpt.load_parameters("model.", m.model->parameters());
    m.scaler.mean = ckpt.get("scaler.mean");
    m.scaler.scale = ckpt.get("scaler.scale");
    m.virtual_edge_weight = ckpt.meta.at("virtual_edge_weight").get<float>();
    return m;
}

Pretrainer::Pretrainer(const PretrainConfig& config, std::span<const graph::CellGraph> graphs)
    : config_(config), adam_(adam_config(config)) {
    config_.validate();
    if (graphs.empty()) throw std::invalid_argument("pretrain: empty dataset");
    state_.scaler = FeatureScaler::fit(graphs);
    state_.virtual_edge_weight = mean_edge_weight(graphs);
    state_.model = std::make_unique<GraphMae>(config_, graphs[0].feature_dim());
    prepare(graphs);
}

Pretrainer::Pretrainer(const acm::Checkpoint& ckpt, std::span<const graph::CellGraph> graphs)
    : state_(PretrainedModel::from_checkpoint(ckpt)) {
    if (ckpt.meta.value("trainer_version", 0) != kCheckpointVersion)
        throw FormatError("checkpoint: no optimizer state to resume from");
    config_ = state_.model->config();
    adam_ = Adam(adam_config(config_));
    if (graphs.empty()) throw std::invalid_argument("pretrain: empty dataset");
    if (ckpt.meta.at("graph_count").get<std::size_t>() != graphs.size())
        throw std::invalid_argument("pretrain: checkpoint was trained on " +
                                    std::to_string(ckpt.meta.at("graph_count").get<std::size_t>()) + " graphs, got " +
                                    std::to_string(graphs.size()));
    epoch_ = ckpt.meta.at("epoch").get<int>();
    losses_ = ckpt.meta.at("losses").get<std::vector<double>>();
    const auto params = state_.model->parameters();
    std::vector<Matrix> m, v;
    for (const auto* p : params) {
        m.push_back(ckpt.get("adam.m." + p->name));
        v.push_back(ckpt.get("adam.v." + p->name));
    }
    adam_.restore(ckpt.meta.at("adam_step").get<std::uint64_t>(), std::move(m), std::move(v));
    prepare(graphs);
}

void Pretrainer::prepare(std::span<const graph::CellGraph> graphs) {
    for (const auto& g : graphs)
        if (g.feature_dim() != state_.model->feature_dim())
            throw ShapeError("pretrain: graph has " + std::to_string(g.feature_dim()) + " features, model expects " +
                             std::to_string(state_.model->feature_dim()));
    blocks_ = prepare_blocks(graphs, state_.scaler, state_.virtual_edge_weight);
}

std::vector<std::vector<std::size_t>> Pretrainer::epoch_batches(int epoch) const {
    std::vector<std::size_t> order(blocks_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(config_.seed, static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
        const auto end = std::min(order.size(), b + config_.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    // a lone trailing graph would get a full optimizer step of its own
    if (batches.size() > 1 && batches.back().size() < 2) batches.pop_back();
    return batches;
}

std::optional<double> Pretrainer::step(const graph::GraphBatch& batch, Rng& rng) {
    const MaskPlan plan = make_batch_mask_plan(batch, config_.mask_ratio, config_.replace_ratio, rng);
    if (plan.empty()) {
        spdlog::warn("pretrain: batch of {} graphs has no masked nodes; step skipped", batch.graph_count());
        return std::nullopt;
    }
    const acm::ChannelFilters filters = acm::batch_filters(batch, config_.edge_weighting);
    Tape tape;
    std::size_t zero_rows = 0;
    const Var loss = state_.model->loss(tape, batch, filters, plan, &zero_rows);
    if (zero_rows > 0) spdlog::warn("pretrain: {} masked rows with zero norm count as error 1", zero_rows);
    const auto params = state_.model->parameters();
    const auto grads = gradients(tape, loss, params);
    adam_.step(params, grads);
    return loss.value()(0, 0);
}

EpochReport Pretrainer::run_epoch() {
    EpochReport report;
    report.epoch = epoch_ + 1;
    const auto batches = epoch_batches(report.epoch);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        std::vector<graph::GraphBlock> chosen;
        chosen.reserve(batches[b].size());
        for (auto i : batches[b]) chosen.push_back(blocks_[i]);
        const graph::GraphBatch batch = graph::batch_blocks(chosen);
        Rng rng = Rng::derive(config_.seed, static_cast<std::uint64_t>(report.epoch), b + 1);
        if (auto l = step(batch, rng)) {
            total += *l;
            ++report.steps;
        } else {
            ++report.skipped;
        }
    }
    report.mean_loss = report.steps > 0 ? total / static_cast<double>(report.steps) : std::nan("");
    epoch_ = report.epoch;
    losses_.push_back(report.mean_loss);
    return report;
}

acm::Checkpoint Pretrainer::checkpoint() {
    acm::Checkpoint ckpt;
    put_model(ckpt, state_);
    ckpt.meta["trainer_version"] = kCheckpointVersion;
    ckpt.meta["epoch"] = epoch_;
    ckpt.meta["adam_step"] = adam_.steps();
    ckpt.meta["graph_count"] = blocks_.size();
    ckpt.meta["losses"] = losses_;
    const auto params = state_.model->parameters();
    const auto& m = adam_.first_moments();
    const auto& v = adam_.second_moments();
    for (std::size_t k = 0; k < params.size(); ++k) {
        // before the first step Adam has no moments yet
        ckpt.put("adam.m." + params[k]->name, k < m.size() ? m[k] : Matrix(params[k]->value.rows(), params[k]->value.cols()));
        ckpt.put("adam.v." + params[k]->name, k < v.size() ? v[k] : Matrix(params[k]->value.rows(), params[k]->value.cols()));
    }
    return ckpt;
}

}  // namespace cellgraph::pretrain

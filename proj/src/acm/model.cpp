#include "cellgraph/acm/model.hpp"

#include <stdexcept>

#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/ops.hpp"

namespace cellgraph::acm {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, const std::string& name)
    : weight{name + ".weight", xavier_uniform(in, out, rng)}, bias{name + ".bias", Matrix(1, out)} {}

Var Linear::forward(Tape& tape, Var x) {
    return ops::add(ops::matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

namespace {

const char* kChannelNames[kChannels] = {"low", "high", "identity"};

}  // namespace

AcmLayer::AcmLayer(const LayerConfig& config, Rng& rng, const std::string& name) : config_(config) {
    if (config.mlp_depth < 1) throw std::invalid_argument("acm layer: MLP depth must be at least 1");
    if (!(config.temperature > 0.0)) throw std::invalid_argument("acm layer: temperature must be positive");
    if (config.in_dim == 0 || config.out_dim == 0 || (config.mlp_depth > 1 && config.hidden_dim == 0))
        throw std::invalid_argument("acm layer: zero width");
    for (int c = 0; c < kChannels; ++c) {
        const std::string prefix = name + "." + kChannelNames[c];
        std::size_t in = config.in_dim;
        for (int k = 0; k < config.mlp_depth; ++k) {
            const std::size_t out = k + 1 == config.mlp_depth ? config.out_dim : config.hidden_dim;
            mlp_[c].emplace_back(in, out, rng, prefix + ".mlp" + std::to_string(k));
            in = out;
        }
        gate_[c] = {prefix + ".gate", xavier_uniform(config.out_dim, 1, rng)};
    }
    mix_ = {name + ".mix", xavier_uniform(kChannels, kChannels, rng)};
}

Var AcmLayer::channel_mlp(Tape& tape, int channel, Var x) {
    auto& layers = mlp_[channel];
    for (std::size_t k = 0; k < layers.size(); ++k) {
        x = layers[k].forward(tape, x);
        if (k + 1 < layers.size() || config_.final_activation) x = ops::relu(x);
    }
    return x;
}

Var AcmLayer::forward(Tape& tape, Var h, const ChannelFilters& filters, Matrix* alpha) {
    if (h.cols() != config_.in_dim)
        throw ShapeError("acm layer: input has " + std::to_string(h.cols()) + " columns, expected " +
                         std::to_string(config_.in_dim));
    if (config_.mode == ChannelMode::low_pass_only) {
        Var out = channel_mlp(tape, 0, ops::spmm(filters.low, h));
        if (alpha) {
            *alpha = Matrix(h.rows(), kChannels);
            for (std::size_t r = 0; r < h.rows(); ++r) (*alpha)(r, 0) = 1.0f;
        }
        return out;
    }
    const Var channels[kChannels] = {channel_mlp(tape, 0, ops::spmm(filters.low, h)),
                                     channel_mlp(tape, 1, ops::spmm(filters.high, h)), channel_mlp(tape, 2, h)};
    std::vector<Var> gates;
    for (int c = 0; c < kChannels; ++c) gates.push_back(ops::sigmoid(ops::matmul(channels[c], tape.parameter(gate_[c]))));
    Var scores = ops::matmul(ops::concat_cols(gates), tape.parameter(mix_));
    if (config_.temperature != 1.0) scores = ops::scale(scores, static_cast<float>(1.0 / config_.temperature));
    const Var a = ops::row_softmax(scores);
    if (!a.value().all_finite()) throw NumericalError("acm layer: non-finite channel weights");
    if (alpha) *alpha = a.value();
    Var out = ops::mul(channels[0], ops::slice_cols(a, 0, 1));
    for (int c = 1; c < kChannels; ++c) out = ops::add(out, ops::mul(channels[c], ops::slice_cols(a, c, 1)));
    return out;
}

std::vector<Parameter*> AcmLayer::parameters() {
    std::vector<Parameter*> out;
    for (int c = 0; c < kChannels; ++c) {
        for (auto& l : mlp_[c]) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        out.push_back(&gate_[c]);
    }
    out.push_back(&mix_);
    return out;
}

AcmEncoder::AcmEncoder(const EncoderConfig& config, Rng& rng, const std::string& name) : config_(config) {
    if (config.layers < 1) throw std::invalid_argument("acm encoder: needs at least one layer");
    layers_.reserve(static_cast<std::size_t>(config.layers));
    for (int k = 0; k < config.layers; ++k) {
        LayerConfig lc;
        lc.in_dim = k == 0 ? config.in_dim : config.layer_dim;
        lc.hidden_dim = config.hidden_dim;
        lc.out_dim = config.layer_dim;
        lc.mlp_depth = config.mlp_depth;
        lc.final_activation = config.final_activation;
        lc.temperature = config.temperature;
        lc.mode = config.mode;
        layers_.emplace_back(lc, rng, name + ".layer" + std::to_string(k));
    }
    jk_ = Linear(config.layer_dim * static_cast<std::size_t>(config.layers), config.out_dim, rng, name + ".jk");
}

Var AcmEncoder::forward(Tape& tape, Var x, const ChannelFilters& filters) {
    if (filters.low.rows() != x.rows())
        throw ShapeError("acm encoder: filters cover " + std::to_string(filters.low.rows()) + " nodes, input has " +
                         std::to_string(x.rows()));
    std::vector<Var> outputs;
    Var h = x;
    for (auto& layer : layers_) {
        h = layer.forward(tape, h, filters);
        outputs.push_back(h);
    }
    return jk_.forward(tape, outputs.size() == 1 ? outputs[0] : ops::concat_cols(outputs));
}

std::vector<Parameter*> AcmEncoder::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        auto p = layer.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    out.push_back(&jk_.weight);
    out.push_back(&jk_.bias);
    return out;
}

std::size_t AcmEncoder::parameter_count() { return count_parameters(parameters()); }

std::size_t count_parameters(const std::vector<Parameter*>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += p->value.size();
    return n;
}

Matrix region_embedding(const Matrix& h, const graph::GraphBatch& batch) {
    if (h.rows() != batch.node_count()) throw ShapeError("region_embedding: row count does not match the batch");
    Matrix out(batch.graph_count(), h.cols());
    for (std::size_t g = 0; g < batch.graph_count(); ++g) {
        const auto rows = batch.real_rows(g);
        if (rows.empty()) continue;
        for (std::size_t c = 0; c < h.cols(); ++c) {
            double s = 0.0;
            for (auto r : rows) s += h(r, c);
            out(g, c) = static_cast<float>(s / static_cast<double>(rows.size()));
        }
    }
    return out;
}

}  // namespace cellgraph::acm

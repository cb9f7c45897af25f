#include "cellgraph/pretrain/graphmae.hpp"

#include <cmath>
#include <stdexcept>

#include "cellgraph/acm/filters.hpp"
#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/ops.hpp"

namespace cellgraph::pretrain {

namespace {

acm::EncoderConfig encoder_config(const PretrainConfig& c, std::size_t feature_dim) {
    acm::EncoderConfig e;
    e.in_dim = feature_dim;
    e.hidden_dim = e.layer_dim = e.out_dim = c.hidden_dim;
    e.layers = c.encoder_layers;
    e.mlp_depth = c.mlp_depth;
    e.temperature = c.temperature;
    e.mode = c.channel_mode;
    return e;
}

acm::EncoderConfig decoder_config(const PretrainConfig& c, std::size_t feature_dim) {
    acm::EncoderConfig d;
    d.in_dim = c.hidden_dim;
    d.hidden_dim = c.hidden_dim;
    d.layer_dim = d.out_dim = feature_dim;
    d.layers = c.decoder_layers;
    d.mlp_depth = c.mlp_depth;
    d.final_activation = false;  // standardized targets take both signs
    d.temperature = c.temperature;
    d.mode = c.channel_mode;
    return d;
}

const char* mode_name(acm::ChannelMode m) { return m == acm::ChannelMode::adaptive ? "adaptive" : "low_pass_only"; }
const char* weighting_name(acm::EdgeWeighting w) {
    return w == acm::EdgeWeighting::distance ? "distance" : "inverse_distance";
}

}  // namespace

void PretrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("pretrain config: '" + key + "' " + why);
    };
    if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) fail("mask_ratio", "must lie in [0, 1]");
    if (!(replace_ratio >= 0.0 && replace_ratio <= 1.0)) fail("replace_ratio", "must lie in [0, 1]");
    if (!(gamma >= 1.0)) fail("gamma", "must be >= 1");
    if (hidden_dim == 0) fail("hidden_dim", "must be positive");
    if (encoder_layers < 1) fail("encoder_layers", "must be >= 1");
    if (decoder_layers < 1) fail("decoder_layers", "must be >= 1");
    if (mlp_depth < 1) fail("mlp_depth", "must be >= 1");
    if (!(temperature > 0.0)) fail("temperature", "must be positive");
    if (epochs < 0) fail("epochs", "must be >= 0");
    if (batch_size == 0) fail("batch_size", "must be positive");
    if (!(learning_rate >= 0.0)) fail("learning_rate", "must be >= 0");
    if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
    if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
}

nlohmann::json to_json(const PretrainConfig& c) {
    return {{"mask_ratio", c.mask_ratio},
            {"replace_ratio", c.replace_ratio},
            {"gamma", c.gamma},
            {"hidden_dim", c.hidden_dim},
            {"encoder_layers", c.encoder_layers},
            {"decoder_layers", c.decoder_layers},
            {"mlp_depth", c.mlp_depth},
            {"temperature", c.temperature},
            {"channel_mode", mode_name(c.channel_mode)},
            {"edge_weighting", weighting_name(c.edge_weighting)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every}};
}

PretrainConfig config_from_json(const nlohmann::json& j) {
    PretrainConfig c;
    c.mask_ratio = j.at("mask_ratio").get<double>();
    c.replace_ratio = j.at("replace_ratio").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.mlp_depth = j.at("mlp_depth").get<int>();
    c.temperature = j.at("temperature").get<double>();
    const auto mode = j.at("channel_mode").get<std::string>();
    if (mode == "adaptive")
        c.channel_mode = acm::ChannelMode::adaptive;
    else if (mode == "low_pass_only")
        c.channel_mode = acm::ChannelMode::low_pass_only;
    else
        throw std::invalid_argument("unknown channel_mode '" + mode + "'");
    const auto weighting = j.at("edge_weighting").get<std::string>();
    if (weighting == "distance")
        c.edge_weighting = acm::EdgeWeighting::distance;
    else if (weighting == "inverse_distance")
        c.edge_weighting = acm::EdgeWeighting::inverse_distance;
    else
        throw std::invalid_argument("unknown edge_weighting '" + weighting + "'");
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
    return c;
}

FeatureScaler FeatureScaler::fit(std::span<const graph::CellGraph> graphs) {
    if (graphs.empty()) throw std::invalid_argument("feature scaler: no graphs");
    const std::size_t f = graphs[0].feature_dim();
    std::vector<double> sum(f, 0.0), sq(f, 0.0);
    double n = 0.0;
    for (const auto& g : graphs) {
        if (g.feature_dim() != f) throw ShapeError("feature scaler: inconsistent feature dimension");
        for (std::size_t r = 0; r < g.node_count(); ++r)
            for (std::size_t c = 0; c < f; ++c) sum[c] += g.features(r, c);
        n += static_cast<double>(g.node_count());
    }
    FeatureScaler s{Matrix(1, f), Matrix(1, f, 1.0f)};
    if (n == 0.0) return s;
    for (std::size_t c = 0; c < f; ++c) s.mean(0, c) = static_cast<float>(sum[c] / n);
    for (const auto& g : graphs)
        for (std::size_t r = 0; r < g.node_count(); ++r)
            for (std::size_t c = 0; c < f; ++c) {
                const double d = g.features(r, c) - sum[c] / n;
                sq[c] += d * d;
            }
    for (std::size_t c = 0; c < f; ++c) {
        const double sd = std::sqrt(sq[c] / n);
        s.scale(0, c) = sd > 1e-12 * std::max(1.0, std::abs(sum[c] / n)) ? static_cast<float>(sd) : 1.0f;
    }
    return s;
}

Matrix FeatureScaler::apply(const Matrix& x) const {
    if (x.cols() != mean.cols()) throw ShapeError("feature scaler: expected " + std::to_string(mean.cols()) + " features");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean(0, c)) / scale(0, c);
    return out;
}

float mean_edge_weight(std::span<const graph::CellGraph> graphs) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& g : graphs)
        for (const auto& e : g.edges) {
            s += e.weight;
            ++n;
        }
    return n == 0 ? 1.0f : static_cast<float>(s / static_cast<double>(n));
}

GraphMae::GraphMae(const PretrainConfig& config, std::size_t feature_dim)
    : config_(config),
      feature_dim_(feature_dim),
      init_rng_(Rng::derive(config.seed, 0x6d6f64656cULL)),
      encoder_(encoder_config(config, feature_dim), init_rng_, "encoder"),
      decoder_(decoder_config(config, feature_dim), init_rng_, "decoder"),
      encoder_token_{"encoder_token", Matrix(1, feature_dim)},
      decoder_token_{"decoder_token", Matrix(1, config.hidden_dim)} {
    config.validate();
    if (feature_dim == 0) throw std::invalid_argument("graphmae: feature dimension must be positive");
}

std::vector<Parameter*> GraphMae::parameters() {
    auto out = encoder_.parameters();
    auto dec = decoder_.parameters();
    out.insert(out.end(), dec.begin(), dec.end());
    out.push_back(&encoder_token_);
    out.push_back(&decoder_token_);
    return out;
}

Var GraphMae::encode(Tape& tape, Var x, const acm::ChannelFilters& filters) { return encoder_.forward(tape, x, filters); }

Var GraphMae::loss(Tape& tape, const graph::GraphBatch& batch, const acm::ChannelFilters& filters, const MaskPlan& plan,
                   std::size_t* zero_rows) {
    if (batch.features.cols() != feature_dim_)
        throw ShapeError("graphmae: batch has " + std::to_string(batch.features.cols()) + " features, model expects " +
                         std::to_string(feature_dim_));
    const Var target = tape.constant(batch.features);
    const Var corrupted = apply_mask(tape, batch.features, plan, tape.parameter(encoder_token_));
    const Var h = encoder_.forward(tape, corrupted, filters);
    const auto rows = plan.rows();
    const Var remasked = ops::replace_rows(h, rows, tape.parameter(decoder_token_));
    const Var z = decoder_.forward(tape, remasked, filters);
    return sce_loss(target, z, rows, config_.gamma, zero_rows);
}

std::vector<graph::GraphBlock> prepare_blocks(std::span<const graph::CellGraph> graphs, const FeatureScaler& scaler,
                                              float virtual_edge_weight) {
    std::vector<graph::GraphBlock> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) {
        graph::GraphBlock b = acm::add_virtual_node(g, virtual_edge_weight);
        const Matrix z = scaler.apply(g.features);
        std::copy(z.data().begin(), z.data().end(), b.features.data().begin());
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace cellgraph::pretrain

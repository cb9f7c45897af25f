// pretrain and embed.

#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "cli.hpp"

#include "cellgraph/acm/checkpoint.hpp"
#include "cellgraph/graph/dataset.hpp"
#include "cellgraph/pretrain/embed.hpp"
#include "cellgraph/pretrain/train.hpp"

namespace fs = std::filesystem;

namespace cellgraph::cli {

namespace {

struct PretrainOptions {
    fs::path data, out, resume;
    pretrain::PretrainConfig config;
    std::string channel_mode = "adaptive";
    std::string edge_weighting = "distance";
};

void write_losses(const fs::path& path, const std::vector<double>& losses) {
    std::ofstream f(path);
    f << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) f << e + 1 << ',' << num(losses[e]) << '\n';
}

fs::path epoch_checkpoint(const fs::path& dir, int epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "checkpoint_e%04d.cgck", epoch);
    return dir / name;
}

void run_pretrain(PretrainOptions& o, const CLI::App& cmd, const Globals& g) {
    const auto ds = graph::read_dataset(o.data);
    if (ds.graphs.empty()) throw std::runtime_error(o.data.string() + " holds no graphs");
    std::unique_ptr<pretrain::Pretrainer> trainer;
    if (!o.resume.empty()) {
        trainer = std::make_unique<pretrain::Pretrainer>(acm::read_checkpoint(o.resume), ds.graphs);
        spdlog::info("resuming from {} after epoch {}", o.resume.string(), trainer->epochs_done());
    } else {
        // Enum fields go through the JSON form so names are checked in one place.
        auto j = pretrain::to_json(o.config);
        j["channel_mode"] = o.channel_mode;
        j["edge_weighting"] = o.edge_weighting;
        j["seed"] = g.seed;
        const auto config = pretrain::config_from_json(j);
        config.validate();
        trainer = std::make_unique<pretrain::Pretrainer>(config, ds.graphs);
    }
    const auto& config = trainer->config();
    fs::create_directories(o.out);
    spdlog::info("pre-training on {} graphs: d={}, K={}, batch {}, {} epochs", ds.graphs.size(), config.hidden_dim,
                 config.encoder_layers, config.batch_size, config.epochs);

    while (trainer->epochs_done() < config.epochs) {
        pretrain::EpochReport report;
        try {
            report = trainer->run_epoch();
        } catch (const NumericalError&) {
            acm::write_checkpoint(o.out / "nan_state.cgck", trainer->checkpoint());
            write_losses(o.out / "loss.csv", trainer->losses());
            spdlog::error("non-finite values in epoch {}; state saved to nan_state.cgck", trainer->epochs_done() + 1);
            throw;
        }
        spdlog::info("epoch {:4d}  loss {:.6f}  steps {}{}", report.epoch, report.mean_loss, report.steps,
                     report.skipped ? fmt::format("  skipped {}", report.skipped) : "");
        write_losses(o.out / "loss.csv", trainer->losses());
        if (config.checkpoint_every > 0 && report.epoch % config.checkpoint_every == 0)
            acm::write_checkpoint(epoch_checkpoint(o.out, report.epoch), trainer->checkpoint());
    }
    acm::write_checkpoint(o.out / "model.cgck", trainer->checkpoint());
    const auto& losses = trainer->losses();
    write_run_record(o.out, true, cmd, g,
                     {{"epochs", trainer->epochs_done()},
                      {"final_loss", losses.empty() ? 0.0 : losses.back()},
                      {"parameters", trainer->model().parameter_count()},
                      {"config", pretrain::to_json(config)}});
}

struct EmbedOptions {
    fs::path ckpt, data, out;
    std::string level = "region";
};

}  // namespace

Command add_pretrain(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<PretrainOptions>();
    auto& c = o->config;
    auto* cmd = root.add_subcommand("pretrain", "Masked graph autoencoder pre-training");
    cmd->add_option("--data", o->data, "Graph dataset file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_option("--resume", o->resume, "Continue from a training checkpoint")->check(CLI::ExistingFile);
    cmd->add_option("--mask_ratio,--mask-ratio", c.mask_ratio)->capture_default_str();
    cmd->add_option("--replace_ratio,--replace-ratio", c.replace_ratio)->capture_default_str();
    cmd->add_option("--gamma", c.gamma, "Scaled cosine error exponent")->capture_default_str();
    cmd->add_option("--hidden_dim,--hidden-dim", c.hidden_dim)->capture_default_str();
    cmd->add_option("--encoder_layers,--encoder-layers", c.encoder_layers)->capture_default_str();
    cmd->add_option("--decoder_layers,--decoder-layers", c.decoder_layers)->capture_default_str();
    cmd->add_option("--mlp_depth,--mlp-depth", c.mlp_depth, "Layers in each channel MLP")->capture_default_str();
    cmd->add_option("--temperature", c.temperature, "Channel softmax temperature")->capture_default_str();
    cmd->add_option("--channel_mode,--channel-mode", o->channel_mode)
        ->capture_default_str()
        ->check(CLI::IsMember({"adaptive", "low_pass_only"}));
    cmd->add_option("--edge_weighting,--edge-weighting", o->edge_weighting)
        ->capture_default_str()
        ->check(CLI::IsMember({"distance", "inverse_distance"}));
    cmd->add_option("--epochs", c.epochs)->capture_default_str();
    cmd->add_option("--batch_size,--batch-size", c.batch_size, "Graphs per step")->capture_default_str();
    cmd->add_option("--learning_rate,--learning-rate", c.learning_rate)->capture_default_str();
    cmd->add_option("--weight_decay,--weight-decay", c.weight_decay)->capture_default_str();
    cmd->add_option("--checkpoint_every,--checkpoint-every", c.checkpoint_every, "Epochs between checkpoints; 0 for final only")
        ->capture_default_str();
    return {cmd, [o, cmd, &g] { run_pretrain(*o, *cmd, g); }};
}

Command add_embed(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<EmbedOptions>();
    auto* cmd = root.add_subcommand("embed", "Frozen-encoder embeddings");
    cmd->add_option("--ckpt", o->ckpt, "Checkpoint written by pretrain")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", o->data, "Graph dataset file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--level", o->level, "cell or region")->capture_default_str()->check(CLI::IsMember({"cell", "region"}));
    cmd->add_option("--out", o->out, "Output CSV")->required();
    return {cmd, [o, cmd, &g] {
                auto model = pretrain::PretrainedModel::from_checkpoint(acm::read_checkpoint(o->ckpt));
                const auto ds = graph::read_dataset(o->data);
                const auto table = pretrain::embed_graphs(model, ds.graphs, pretrain::parse_level(o->level));
                if (o->out.has_parent_path()) fs::create_directories(o->out.parent_path());
                pretrain::write_embeddings(o->out, table);
                spdlog::info("{} {} embeddings of dimension {}", table.values.rows(), o->level, table.dim());
                write_run_record(o->out, false, *cmd, g,
                                 {{"rows", table.values.rows()}, {"dim", table.dim()}, {"level", o->level}});
            }};
}

}  // namespace cellgraph::cli

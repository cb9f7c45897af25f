#include "cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace cellgraph::cli {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_run_record(const std::filesystem::path& out, bool out_is_dir, const CLI::App& command, const Globals& g,
                      const nlohmann::json& summary) {
    const std::filesystem::path config = out_is_dir ? out / "config.ini" : std::filesystem::path(out.string() + ".config.ini");
    const std::filesystem::path record = out_is_dir ? out / "run.json" : std::filesystem::path(out.string() + ".run.json");
    const CLI::App* root = &command;
    while (root->get_parent()) root = root->get_parent();
    // Globals and the selected command only; unset values are left out so the
    // file reads back to the same run.
    std::istringstream all(root->config_to_str(true, false));
    std::string resolved, line;
    const std::string own = command.get_name() + ".";
    while (std::getline(all, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos || line.compare(eq + 1, std::string::npos, "\"\"") == 0) continue;
        const auto dot = line.find('.');
        if (dot < eq && line.compare(0, own.size(), own) != 0) continue;
        resolved += line + '\n';
    }
    std::ofstream(config) << resolved;
    nlohmann::json j;
    j["command"] = command.get_name();
    j["version"] = CELLGRAPH_VERSION;
    j["seed"] = g.seed;
    j["config"] = resolved;
    j["summary"] = summary;
    std::ofstream(record) << j.dump(2) << '\n';
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Cell graphs from segmented tissue, masked graph autoencoder pre-training and frozen-embedding evaluation",
                 "cellgraph"};
    app.set_version_flag("--version", std::string(CELLGRAPH_VERSION));
    app.set_config("--config,--spec", "", "INI file: flat key = value, one [section] per command");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Global seed")->envname("CELLGRAPH_SEED")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for construction and grid search")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "Only log warnings and errors");

    std::vector<Command> commands;
    for (Registrar add : {&add_build_graphs, &add_synth, &add_pretrain, &add_embed, &add_mil, &add_probe, &add_survival}) {
        commands.push_back(add(app, g));
        commands.back().app->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto logger = spdlog::stderr_color_st("cellgraph");
    spdlog::set_default_logger(logger);
    spdlog::set_level(g.quiet ? spdlog::level::warn : spdlog::level::info);
    try {
        for (auto& c : commands)
            if (app.got_subcommand(c.app)) c.action();
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        spdlog::drop("cellgraph");
        return 1;
    }
    spdlog::drop("cellgraph");
    return 0;
}

}  // namespace cellgraph::cli

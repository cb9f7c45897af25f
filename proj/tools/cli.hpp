#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace cellgraph::cli {

/// Runs the `cellgraph` command line; returns the process exit code.
int run(int argc, const char* const* argv);

struct Globals {
    std::uint64_t seed = 0;
    int threads = 1;
    bool quiet = false;
};

/// A registered subcommand and the action to run when it was selected.
struct Command {
    CLI::App* app = nullptr;
    std::function<void()> action;
};

using Registrar = Command (*)(CLI::App& root, const Globals& globals);

Command add_build_graphs(CLI::App& root, const Globals& g);
Command add_synth(CLI::App& root, const Globals& g);
Command add_pretrain(CLI::App& root, const Globals& g);
Command add_embed(CLI::App& root, const Globals& g);
Command add_mil(CLI::App& root, const Globals& g);
Command add_probe(CLI::App& root, const Globals& g);
Command add_survival(CLI::App& root, const Globals& g);

/// Writes the resolved configuration (`config.ini`) and run metadata plus
/// `summary` (`run.json`). For a directory the files go inside it, for a
/// file output they sit next to it as `<file>.config.ini` / `<file>.run.json`.
void write_run_record(const std::filesystem::path& out, bool out_is_dir, const CLI::App& command,
                      const Globals& g, const nlohmann::json& summary);

/// Shortest round-trip decimal form.
std::string num(double v);

}  // namespace cellgraph::cli

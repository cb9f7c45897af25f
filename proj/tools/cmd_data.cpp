// build-graphs and synth.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "cli.hpp"

#include "cellgraph/construct/build.hpp"
#include "cellgraph/construct/descriptors.hpp"
#include "cellgraph/graph/dataset.hpp"
#include "cellgraph/io/image_io.hpp"
#include "cellgraph/pretrain/embed.hpp"
#include "cellgraph/synth/synth.hpp"
#include "cellgraph/util/csv.hpp"

namespace fs = std::filesystem;

namespace cellgraph::cli {

namespace {

const std::set<std::string> kImageExtensions{".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp"};

// stem -> path of every image file directly inside `dir`
std::map<std::string, fs::path> image_files(const fs::path& dir) {
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (!kImageExtensions.count(ext)) continue;
        const std::string stem = entry.path().stem().string();
        if (!out.emplace(stem, entry.path()).second) throw std::runtime_error(dir.string() + ": two files with stem '" + stem + "'");
    }
    return out;
}

std::map<std::uint32_t, double> read_probabilities(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const auto id = t.column("id"), p = t.column("probability");
    std::map<std::uint32_t, double> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) out[t.number<std::uint32_t>(r, id)] = t.number<double>(r, p);
    return out;
}

struct BuildOptions {
    fs::path images, masks, probabilities, out;
    double pixel_size = 0.5;
    float magnification = 20.0f;
    std::string name;
    bool skip_unpaired = false;
};

void build_graphs(const BuildOptions& o, const CLI::App& cmd, const Globals& g) {
    const auto images = image_files(o.images);
    const auto masks = image_files(o.masks);
    std::vector<std::string> unpaired;
    for (const auto& [stem, _] : images)
        if (!masks.count(stem)) unpaired.push_back("image " + stem);
    for (const auto& [stem, _] : masks)
        if (!images.count(stem)) unpaired.push_back("mask " + stem);
    if (!unpaired.empty()) {
        for (const auto& u : unpaired) spdlog::warn("unpaired {}", u);
        if (!o.skip_unpaired) throw std::runtime_error(std::to_string(unpaired.size()) + " unpaired files (see above)");
    }
    std::vector<std::string> stems;
    for (const auto& [stem, _] : images)
        if (masks.count(stem)) stems.push_back(stem);
    if (stems.empty()) throw std::runtime_error("found 0 image/mask pairs in " + o.images.string());
    spdlog::info("building {} graphs with {} threads", stems.size(), g.threads);

    std::vector<graph::CellGraph> graphs(stems.size());
    std::vector<std::string> errors(stems.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < stems.size(); k = next++) {
            try {
                const auto image = io::read_rgb(images.at(stems[k]));
                const auto mask = io::read_mask(masks.at(stems[k]), o.pixel_size);
                std::map<std::uint32_t, double> probs;
                if (!o.probabilities.empty()) {
                    const fs::path p = o.probabilities / (stems[k] + ".csv");
                    if (fs::exists(p)) probs = read_probabilities(p);
                }
                graphs[k] = construct::build_cell_graph(image, mask, probs, o.magnification);
            } catch (const std::exception& e) {
                errors[k] = stems[k] + ": " + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < g.threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);

    graph::Dataset ds = graph::Dataset::from_graphs(o.name.empty() ? o.out.stem().string() : o.name, std::move(graphs));
    ds.manifest.feature_dim = construct::kDescriptorCount;
    ds.manifest.feature_names = construct::descriptor_names();
    ds.manifest.record_names = stems;
    ds.manifest.magnification = o.magnification;
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    graph::write_dataset(o.out, ds);

    const auto stats = graph::dataset_stats(ds.graphs);
    std::ofstream(o.out.string() + ".stats.csv") << "graphs,avg_nodes,avg_edges,mean_edge_weight\n"
                                                 << stats.graphs << ',' << num(stats.avg_nodes) << ','
                                                 << num(stats.avg_edges) << ',' << num(stats.mean_edge_weight) << '\n';
    spdlog::info("{} graphs, {:.1f} nodes and {:.1f} edges on average", stats.graphs, stats.avg_nodes, stats.avg_edges);
    write_run_record(o.out, false, cmd, g,
                     {{"graphs", stats.graphs}, {"avg_nodes", stats.avg_nodes}, {"avg_edges", stats.avg_edges},
                      {"unpaired_skipped", unpaired.size()}});
}

// Every synth knob; unset ones keep the generator defaults.
struct SynthOptions {
    std::string kind;
    fs::path out;
    std::optional<std::size_t> classes, graphs_per_class, min_cells, max_cells, feature_dim, min_bag, max_bag, graphs,
        rows, cols, stripe_width, patients, dims, count, cells, width_px, height_px;
    std::optional<double> width, height, shift, affected_fraction, context_sd, noise_sd, test_fraction, spacing, jitter,
        signal, context_scale, beta, base_rate, censor_max, min_radius, max_radius, pixel_size;
    bool homophilic = false;
    std::string prefix = "tile";
};

template <class T>
void set(T& field, const std::optional<T>& v) {
    if (v) field = *v;
}

void write_region(const SynthOptions& o, std::uint64_t seed, nlohmann::json& summary) {
    synth::RegionSpec s;
    set(s.classes, o.classes);
    set(s.graphs_per_class, o.graphs_per_class);
    set(s.min_cells, o.min_cells);
    set(s.max_cells, o.max_cells);
    set(s.width_um, o.width);
    set(s.height_um, o.height);
    set(s.feature_dim, o.feature_dim);
    set(s.shift, o.shift);
    set(s.affected_fraction, o.affected_fraction);
    set(s.context_sd, o.context_sd);
    set(s.noise_sd, o.noise_sd);
    set(s.min_bag, o.min_bag);
    set(s.max_bag, o.max_bag);
    set(s.test_fraction, o.test_fraction);
    s.seed = seed;
    const auto data = synth::gen_region_dataset(s);
    graph::write_dataset(o.out / "dataset.cgrf", data.dataset);
    synth::write_bag_table(o.out / "bags.csv", data.bags);
    summary = {{"graphs", data.dataset.graphs.size()}, {"bags", std::set(data.bags.bag.begin(), data.bags.bag.end()).size()}};
}

void write_cells(const SynthOptions& o, std::uint64_t seed, nlohmann::json& summary) {
    synth::CellSpec s;
    set(s.graphs, o.graphs);
    set(s.rows, o.rows);
    set(s.cols, o.cols);
    set(s.spacing_um, o.spacing);
    set(s.jitter_um, o.jitter);
    set(s.feature_dim, o.feature_dim);
    set(s.signal, o.signal);
    set(s.context_sd, o.context_sd);
    set(s.context_scale_um, o.context_scale);
    set(s.noise_sd, o.noise_sd);
    set(s.stripe_width, o.stripe_width);
    s.heterophilic = !o.homophilic;
    s.seed = seed;
    const auto ds = synth::gen_cell_dataset(s);
    graph::write_dataset(o.out / "dataset.cgrf", ds);
    std::ofstream labels(o.out / "node_labels.csv");
    labels << "record,node,label,fold\n";
    double homophily = 0.0;
    for (std::size_t k = 0; k < ds.graphs.size(); ++k) {
        const auto& nl = *ds.graphs[k].node_labels;
        for (std::size_t i = 0; i < nl.size(); ++i)
            labels << k << ',' << i << ',' << nl[i] << ',' << ds.manifest.splits.at("folds")[k] << '\n';
        homophily += graph::edge_homophily(ds.graphs[k]) / static_cast<double>(ds.graphs.size());
    }
    summary = {{"graphs", ds.graphs.size()}, {"edge_homophily", homophily}};
}

void write_survival(const SynthOptions& o, std::uint64_t seed, nlohmann::json& summary) {
    synth::SurvivalSpec s;
    set(s.patients, o.patients);
    set(s.dims, o.dims);
    set(s.beta, o.beta);
    set(s.base_rate, o.base_rate);
    set(s.censor_max_days, o.censor_max);
    s.seed = seed;
    const auto d = synth::gen_survival(s);
    pretrain::EmbeddingTable t;
    t.level = pretrain::EmbeddingLevel::region;
    t.values = Matrix(static_cast<std::size_t>(d.covariates.rows()), static_cast<std::size_t>(d.covariates.cols()));
    for (Eigen::Index i = 0; i < d.covariates.rows(); ++i) {
        t.records.push_back(static_cast<std::size_t>(i));
        for (Eigen::Index c = 0; c < d.covariates.cols(); ++c)
            t.values(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = static_cast<float>(d.covariates(i, c));
    }
    pretrain::write_embeddings(o.out / "embeddings.csv", t);
    std::ofstream clinical(o.out / "clinical.csv");
    clinical << "patient_id,time,event,record\n";
    for (std::size_t i = 0; i < d.outcomes.size(); ++i)
        clinical << "P" << i << ',' << num(d.outcomes.times[i]) << ',' << int(d.outcomes.events[i]) << ',' << i << '\n';
    summary = {{"patients", d.outcomes.size()}, {"events", d.outcomes.event_count()}};
}

void write_tissue(const SynthOptions& o, std::uint64_t seed, nlohmann::json& summary) {
    synth::TissueSpec s;
    set(s.width, o.width_px);
    set(s.height, o.height_px);
    set(s.cells, o.cells);
    set(s.min_radius_px, o.min_radius);
    set(s.max_radius_px, o.max_radius);
    set(s.pixel_size_um, o.pixel_size);
    const std::size_t count = o.count.value_or(3);
    fs::create_directories(o.out / "images");
    fs::create_directories(o.out / "masks");
    for (std::size_t k = 0; k < count; ++k) {
        s.seed = Rng::derive(seed, k).next_u64();
        const auto t = synth::render_tissue(s);
        char index[32];
        std::snprintf(index, sizeof index, "_%03zu.png", k);
        const std::string name = o.prefix + index;
        io::write_rgb(o.out / "images" / name, t.image);
        io::write_mask(o.out / "masks" / name, t.mask);
    }
    summary = {{"tiles", count}, {"pixel_size_um", s.pixel_size_um}};
}

}  // namespace

Command add_build_graphs(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<BuildOptions>();
    auto* cmd = root.add_subcommand("build-graphs", "Cell graphs from RGB images and instance masks");
    cmd->add_option("--images", o->images, "Directory of 8-bit RGB images")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--masks", o->masks, "Directory of instance label images, same stems")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--pixel-size", o->pixel_size, "Microns per pixel")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--probabilities", o->probabilities, "Directory of <stem>.csv files with id,probability");
    cmd->add_option("--magnification", o->magnification, "Recorded objective magnification")->capture_default_str();
    cmd->add_option("--name", o->name, "Dataset name (default: output stem)");
    cmd->add_flag("--skip-unpaired", o->skip_unpaired, "Warn about unpaired files instead of aborting");
    cmd->add_option("--out", o->out, "Output dataset file")->required();
    return {cmd, [o, cmd, &g] { build_graphs(*o, *cmd, g); }};
}

Command add_synth(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<SynthOptions>();
    auto* cmd = root.add_subcommand("synth", "Synthetic datasets with planted signal");
    cmd->add_option("--kind", o->kind, "region, cell, survival or tissue")
        ->required()
        ->check(CLI::IsMember({"region", "cell", "survival", "tissue"}));
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_option("--classes", o->classes);
    cmd->add_option("--graphs-per-class", o->graphs_per_class);
    cmd->add_option("--min-cells", o->min_cells);
    cmd->add_option("--max-cells", o->max_cells);
    cmd->add_option("--width", o->width, "Region window width, µm");
    cmd->add_option("--height", o->height, "Region window height, µm");
    cmd->add_option("--feature-dim", o->feature_dim);
    cmd->add_option("--shift", o->shift);
    cmd->add_option("--affected-fraction", o->affected_fraction);
    cmd->add_option("--context-sd", o->context_sd);
    cmd->add_option("--noise-sd", o->noise_sd);
    cmd->add_option("--min-bag", o->min_bag);
    cmd->add_option("--max-bag", o->max_bag);
    cmd->add_option("--test-fraction", o->test_fraction);
    cmd->add_option("--graphs", o->graphs);
    cmd->add_option("--rows", o->rows);
    cmd->add_option("--cols", o->cols);
    cmd->add_option("--spacing", o->spacing, "Lattice spacing, µm");
    cmd->add_option("--jitter", o->jitter, "Lattice jitter, µm");
    cmd->add_option("--signal", o->signal);
    cmd->add_option("--context-scale", o->context_scale, "Context field wavelength, µm");
    cmd->add_option("--stripe-width", o->stripe_width);
    cmd->add_flag("--homophilic", o->homophilic, "Striped instead of heterophilic node labels");
    cmd->add_option("--patients", o->patients);
    cmd->add_option("--dims", o->dims);
    cmd->add_option("--beta", o->beta);
    cmd->add_option("--base-rate", o->base_rate, "Baseline hazard per day");
    cmd->add_option("--censor-max", o->censor_max, "Censoring upper bound, days");
    cmd->add_option("--count", o->count, "Number of tissue tiles");
    cmd->add_option("--cells", o->cells, "Nuclei per tile");
    cmd->add_option("--width-px", o->width_px);
    cmd->add_option("--height-px", o->height_px);
    cmd->add_option("--min-radius", o->min_radius, "Nucleus radius, pixels");
    cmd->add_option("--max-radius", o->max_radius, "Nucleus radius, pixels");
    cmd->add_option("--pixel-size", o->pixel_size, "Microns per pixel");
    cmd->add_option("--prefix", o->prefix, "Tile file name prefix")->capture_default_str();
    return {cmd, [o, cmd, &g] {
                fs::create_directories(o->out);
                nlohmann::json summary;
                if (o->kind == "region") write_region(*o, g.seed, summary);
                else if (o->kind == "cell") write_cells(*o, g.seed, summary);
                else if (o->kind == "survival") write_survival(*o, g.seed, summary);
                else write_tissue(*o, g.seed, summary);
                spdlog::info("synth {}: {}", o->kind, summary.dump());
                write_run_record(o->out, true, *cmd, g, summary);
            }};
}

}  // namespace cellgraph::cli

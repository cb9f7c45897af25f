#include "cellgraph/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cellgraph/construct/delaunay.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/util/bytes.hpp"

namespace cellgraph::synth {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("synth spec: " + what);
}

// Independent streams per purpose so that changing one knob does not
// reshuffle unrelated draws.
enum Stream : std::uint64_t { kLayout = 1, kFeatures = 2, kBags = 3, kLabels = 4, kTimes = 5, kPixels = 6 };

}  // namespace

void RegionSpec::validate() const {
    require(classes >= 2, "classes must be >= 2");
    require(graphs_per_class >= 1, "graphs_per_class must be >= 1");
    require(min_cells >= 1 && min_cells <= max_cells, "need 1 <= min_cells <= max_cells");
    require(width_um > 0 && height_um > 0, "window must have positive size");
    require(feature_dim >= classes, "feature_dim must be >= classes");
    require(affected_fraction >= 0 && affected_fraction <= 1, "affected_fraction must lie in [0, 1]");
    require(context_sd >= 0 && noise_sd >= 0, "standard deviations must be >= 0");
    require(min_bag >= 1 && min_bag <= max_bag, "need 1 <= min_bag <= max_bag");
    require(test_fraction >= 0 && test_fraction < 1, "test_fraction must lie in [0, 1)");
}

void CellSpec::validate() const {
    require(graphs >= 1, "graphs must be >= 1");
    require(rows >= 2 && cols >= 2, "lattice must be at least 2 x 2");
    require(spacing_um > 0 && spacing_um < 100, "spacing_um must lie in (0, 100)");
    require(jitter_um >= 0 && jitter_um < spacing_um / 4, "jitter_um must lie in [0, spacing/4)");
    require(feature_dim >= 2, "feature_dim must be >= 2");
    require(context_scale_um > 0, "context_scale_um must be positive");
    require(stripe_width >= 1, "stripe_width must be >= 1");
}

std::vector<graph::Edge> proximity_edges(std::span<const graph::Point> positions) {
    std::vector<construct::Vec2> pts;
    pts.reserve(positions.size());
    for (const auto& p : positions) pts.push_back({p.x, p.y});
    const auto pairs = construct::delaunay(pts);
    return construct::prune_and_weight(pairs, pts);
}

RegionData gen_region_dataset(const RegionSpec& spec) {
    spec.validate();
    RegionData out;
    std::vector<graph::CellGraph> graphs;
    const std::size_t total = spec.classes * spec.graphs_per_class;
    for (std::size_t k = 0; k < total; ++k) {
        const auto label = static_cast<std::uint32_t>(k / spec.graphs_per_class);
        Rng layout = Rng::derive(spec.seed, kLayout, k);
        Rng feats = Rng::derive(spec.seed, kFeatures, k);
        graph::CellGraph g;
        const std::size_t n = spec.min_cells + layout.index(spec.max_cells - spec.min_cells + 1);
        for (std::size_t i = 0; i < n; ++i)
            g.positions.push_back({static_cast<float>(layout.uniform(0, spec.width_um)),
                                   static_cast<float>(layout.uniform(0, spec.height_um))});
        g.edges = proximity_edges(g.positions);
        std::vector<double> context(spec.feature_dim);
        for (auto& c : context) c = feats.normal(0.0, spec.context_sd);
        g.features = Matrix(n, spec.feature_dim);
        const auto affected = static_cast<std::size_t>(std::lround(spec.affected_fraction * static_cast<double>(n)));
        std::vector<bool> shifted(n, false);
        for (auto i : feats.sample_without_replacement(n, affected)) shifted[i] = true;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < spec.feature_dim; ++c) {
                double v = context[c] + feats.normal(0.0, spec.noise_sd);
                if (shifted[i] && c == label) v += spec.shift;
                g.features(i, c) = static_cast<float>(v);
            }
        g.graph_label = label;
        g.validate();
        graphs.push_back(std::move(g));
    }

    // bags of consecutive same-class regions, then a per-class test split
    Rng bag_rng = Rng::derive(spec.seed, kBags);
    BagTable& t = out.bags;
    t.bag.resize(total);
    t.label.resize(total);
    t.split.resize(total);
    std::size_t bag = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<std::size_t> members(spec.graphs_per_class);
        for (std::size_t k = 0; k < members.size(); ++k) members[k] = c * spec.graphs_per_class + k;
        bag_rng.shuffle(members);
        std::vector<std::vector<std::size_t>> bags;
        for (std::size_t k = 0; k < members.size();) {
            const std::size_t size = spec.min_bag + bag_rng.index(spec.max_bag - spec.min_bag + 1);
            const std::size_t end = std::min(members.size(), k + size);
            bags.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(k), members.begin() + static_cast<std::ptrdiff_t>(end));
            k = end;
        }
        const auto n_test = static_cast<std::size_t>(std::lround(spec.test_fraction * static_cast<double>(bags.size())));
        for (std::size_t b = 0; b < bags.size(); ++b, ++bag)
            for (auto r : bags[b]) {
                t.bag[r] = bag;
                t.label[r] = static_cast<std::uint32_t>(c);
                t.split[r] = b < n_test ? "test" : "train";
            }
    }
    out.dataset = graph::Dataset::from_graphs("synthetic-regions", std::move(graphs));
    for (std::size_t c = 0; c < spec.classes; ++c) out.dataset.manifest.class_names.push_back("class" + std::to_string(c));
    out.dataset.manifest.splits["holdout"] = t.split;
    std::vector<std::string> bag_tags;
    for (auto b : t.bag) bag_tags.push_back("bag" + std::to_string(b));
    out.dataset.manifest.splits["bag"] = bag_tags;
    return out;
}

graph::Dataset gen_cell_dataset(const CellSpec& spec) {
    spec.validate();
    std::vector<graph::CellGraph> graphs;
    const double row_step = spec.spacing_um * std::sqrt(3.0) / 2.0;
    // class signal directions 120 degrees apart
    const double angle[kCellClasses] = {0.0, 2.0 * std::numbers::pi / 3.0, 4.0 * std::numbers::pi / 3.0};
    for (std::size_t k = 0; k < spec.graphs; ++k) {
        Rng layout = Rng::derive(spec.seed, kLayout, k);
        Rng feats = Rng::derive(spec.seed, kFeatures, k);
        graph::CellGraph g;
        std::vector<std::uint32_t> labels;
        for (std::size_t i = 0; i < spec.rows; ++i)
            for (std::size_t j = 0; j < spec.cols; ++j) {
                // row i is offset by i/2 spacing, so site (i, j) touches (i, j +- 1),
                // (i +- 1, j) and (i - 1, j - 1), (i + 1, j + 1)
                const double x = (static_cast<double>(j) - 0.5 * static_cast<double>(i)) * spec.spacing_um +
                                 0.5 * static_cast<double>(spec.rows) * spec.spacing_um;
                const double y = static_cast<double>(i) * row_step;
                g.positions.push_back({static_cast<float>(x + layout.uniform(-spec.jitter_um, spec.jitter_um)),
                                       static_cast<float>(y + layout.uniform(-spec.jitter_um, spec.jitter_um))});
                std::uint32_t label;
                if (spec.heterophilic)
                    label = static_cast<std::uint32_t>((i + j) % kCellClasses);
                else
                    label = static_cast<std::uint32_t>((j / spec.stripe_width) % kCellClasses);
                labels.push_back(label);
            }
        g.edges = proximity_edges(g.positions);
        // smooth field: a random plane wave per feature axis
        const std::size_t n = g.positions.size();
        g.features = Matrix(n, spec.feature_dim);
        std::vector<double> kx(2), ky(2), phase(2);
        for (int a = 0; a < 2; ++a) {
            const double theta = feats.uniform(0, 2 * std::numbers::pi);
            kx[a] = 2 * std::numbers::pi / spec.context_scale_um * std::cos(theta);
            ky[a] = 2 * std::numbers::pi / spec.context_scale_um * std::sin(theta);
            phase[a] = feats.uniform(0, 2 * std::numbers::pi);
        }
        for (std::size_t v = 0; v < n; ++v) {
            const double px = g.positions[v].x, py = g.positions[v].y;
            for (std::size_t c = 0; c < spec.feature_dim; ++c) {
                double f = feats.normal(0.0, spec.noise_sd);
                if (c < 2) {
                    f += spec.signal * (c == 0 ? std::cos(angle[labels[v]]) : std::sin(angle[labels[v]]));
                    f += spec.context_sd * std::numbers::sqrt2 * std::sin(kx[c] * px + ky[c] * py + phase[c]);
                }
                g.features(v, c) = static_cast<float>(f);
            }
        }
        g.node_labels = labels;
        g.validate();
        graphs.push_back(std::move(g));
    }
    graph::Dataset ds = graph::Dataset::from_graphs(spec.heterophilic ? "synthetic-heterophilic-cells" : "synthetic-striped-cells",
                                                    std::move(graphs));
    ds.manifest.class_names = {"type0", "type1", "type2"};
    // graph-level folds for probing
    std::vector<std::string> folds;
    for (std::size_t k = 0; k < spec.graphs; ++k) folds.push_back("fold" + std::to_string(k % 3));
    ds.manifest.splits["folds"] = folds;
    return ds;
}

void write_bag_table(const std::filesystem::path& path, const BagTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "record,bag,label,split\n";
    for (std::size_t r = 0; r < table.bag.size(); ++r)
        out << r << ',' << table.bag[r] << ',' << table.label[r] << ',' << table.split[r] << '\n';
}

BagTable read_bag_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "record,bag,label,split" && line != "record,bag,label,split\r")
        throw FormatError(path.string() + ": expected header record,bag,label,split");
    BagTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string rec, bag, label, split;
        if (!std::getline(ss, rec, ',') || !std::getline(ss, bag, ',') || !std::getline(ss, label, ',') ||
            !std::getline(ss, split))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
        try {
            if (std::stoul(rec) != t.bag.size())
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": records must be listed in order");
            t.bag.push_back(std::stoul(bag));
            t.label.push_back(static_cast<std::uint32_t>(std::stoul(label)));
        } catch (const std::logic_error&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
        t.split.push_back(split);
    }
    return t;
}

SurvivalData gen_survival(const SurvivalSpec& spec) {
    if (spec.patients == 0 || spec.dims == 0) throw std::invalid_argument("synth spec: patients and dims must be positive");
    if (!(spec.base_rate > 0) || !(spec.censor_max_days > 0))
        throw std::invalid_argument("synth spec: base_rate and censor_max_days must be positive");
    Rng cov = Rng::derive(spec.seed, kFeatures);
    Rng times = Rng::derive(spec.seed, kTimes);
    SurvivalData d;
    d.covariates.resize(static_cast<Eigen::Index>(spec.patients), static_cast<Eigen::Index>(spec.dims));
    for (Eigen::Index i = 0; i < d.covariates.rows(); ++i)
        for (Eigen::Index c = 0; c < d.covariates.cols(); ++c) d.covariates(i, c) = cov.normal();
    for (Eigen::Index i = 0; i < d.covariates.rows(); ++i) {
        const double rate = spec.base_rate * std::exp(spec.beta * d.covariates(i, 0));
        // 1 - u keeps the log argument in (0, 1]
        const double t = -std::log(1.0 - times.uniform()) / rate;
        const double c = spec.censor_max_days * (1.0 - times.uniform());
        // whole days, at least one
        d.outcomes.times.push_back(std::max(1.0, std::ceil(std::min(t, c))));
        d.outcomes.events.push_back(t <= c);
    }
    return d;
}

Tissue render_tissue(const TissueSpec& spec) {
    if (spec.width == 0 || spec.height == 0) throw std::invalid_argument("synth spec: tile must be nonempty");
    if (!(spec.min_radius_px > 0 && spec.min_radius_px <= spec.max_radius_px))
        throw std::invalid_argument("synth spec: need 0 < min_radius_px <= max_radius_px");
    Rng layout = Rng::derive(spec.seed, kLayout);
    Rng pix = Rng::derive(spec.seed, kPixels);
    Tissue t{construct::RgbImage(spec.width, spec.height), construct::InstanceMask(spec.width, spec.height, spec.pixel_size_um)};
    for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x) {
            const auto jitter = static_cast<int>(pix.index(12));
            t.image.set(x, y, static_cast<std::uint8_t>(230 + jitter / 2), static_cast<std::uint8_t>(200 + jitter),
                        static_cast<std::uint8_t>(220 + jitter / 3));
        }
    std::uint32_t id = 0;
    for (std::size_t k = 0; k < spec.cells; ++k) {
        const double r1 = layout.uniform(spec.min_radius_px, spec.max_radius_px);
        const double r2 = r1 * layout.uniform(0.6, 1.0);
        const double cx = layout.uniform(r1, static_cast<double>(spec.width) - r1);
        const double cy = layout.uniform(r1, static_cast<double>(spec.height) - r1);
        const double theta = layout.uniform(0, std::numbers::pi);
        const double base = layout.uniform(60, 140);
        ++id;
        const double c = std::cos(theta), s = std::sin(theta);
        const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - r1)));
        const auto x1 = std::min(spec.width - 1, static_cast<std::size_t>(std::ceil(cx + r1)));
        const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - r1)));
        const auto y1 = std::min(spec.height - 1, static_cast<std::size_t>(std::ceil(cy + r1)));
        for (std::size_t y = y0; y <= y1; ++y)
            for (std::size_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
                const double u = (c * dx + s * dy) / r1, v = (-s * dx + c * dy) / r2;
                if (u * u + v * v > 1.0) continue;
                // later nuclei overlap earlier ones
                t.mask.at(x, y) = id;
                const double shade = base + 40.0 * (u * u + v * v) + static_cast<double>(pix.index(20));
                t.image.set(x, y, static_cast<std::uint8_t>(std::min(255.0, shade + 30)),
                            static_cast<std::uint8_t>(std::min(255.0, shade * 0.6)),
                            static_cast<std::uint8_t>(std::min(255.0, shade + 60)));
            }
    }
    return t;
}

}  // namespace cellgraph::synth

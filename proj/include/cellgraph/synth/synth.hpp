#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cellgraph/construct/image.hpp"
#include "cellgraph/graph/dataset.hpp"
#include "cellgraph/survival/survival.hpp"

namespace cellgraph::synth {

/// Graph-labelled regions grouped into labelled bags (slides).
///
/// Cell features are a per-region context vector, per-cell noise and, for a
/// random `affected_fraction` of cells, the class shift `shift * e_c` along
/// feature axis c. Class 0 carries no shift when `shift_class_zero` is off.
struct RegionSpec {
    std::size_t classes = 2;
    std::size_t graphs_per_class = 200;
    std::size_t min_cells = 20;
    std::size_t max_cells = 40;
    double width_um = 200.0;
    double height_um = 200.0;
    std::size_t feature_dim = 16;
    double shift = 3.0;
    double affected_fraction = 0.5;
    double context_sd = 1.0;
    double noise_sd = 0.3;
    std::size_t min_bag = 2;  // regions per bag
    std::size_t max_bag = 4;
    double test_fraction = 0.2;  // of bags, per class
    std::uint64_t seed = 0;

    void validate() const;
};

/// Node-labelled graphs on a jittered triangular lattice.
///
/// Heterophilic layout colours lattice site (i, j) with (i + j) mod 3, so
/// every lattice edge joins different classes; the homophilic layout uses
/// vertical stripes. Features are the class signal vector (unit vectors 120
/// degrees apart in the first two feature axes, scaled by `signal`), a
/// spatially smooth context field along the same axes and per-cell noise.
struct CellSpec {
    std::size_t graphs = 20;
    std::size_t rows = 12;
    std::size_t cols = 12;
    double spacing_um = 20.0;
    double jitter_um = 2.0;
    std::size_t feature_dim = 8;
    double signal = 1.0;
    double context_sd = 2.0;
    double context_scale_um = 150.0;  // wavelength of the smooth field
    double noise_sd = 0.5;
    bool heterophilic = true;
    std::size_t stripe_width = 4;  // lattice columns per stripe when homophilic
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr std::size_t kCellClasses = 3;

/// Bag membership and labels of a region dataset, one entry per record.
struct BagTable {
    std::vector<std::size_t> bag;
    std::vector<std::uint32_t> label;
    std::vector<std::string> split;  // "train" or "test"
};

struct RegionData {
    graph::Dataset dataset;
    BagTable bags;
};

/// Delaunay edges shorter than 100 µm between the given cell positions.
std::vector<graph::Edge> proximity_edges(std::span<const graph::Point> positions);

RegionData gen_region_dataset(const RegionSpec& spec);
graph::Dataset gen_cell_dataset(const CellSpec& spec);

/// Writes `record,bag,label,split`.
void write_bag_table(const std::filesystem::path& path, const BagTable& table);
BagTable read_bag_table(const std::filesystem::path& path);

struct SurvivalSpec {
    std::size_t patients = 200;
    std::size_t dims = 4;
    double beta = 1.0;          // log-hazard per unit of covariate 0
    double base_rate = 1.0 / 365.0;  // per day
    double censor_max_days = 1500.0;  // censoring uniform on (0, max]
    std::uint64_t seed = 0;
};

struct SurvivalData {
    Eigen::MatrixXd covariates;
    survival::Outcomes outcomes;
};

/// Exponential event times with log-hazard `beta * x_0`.
SurvivalData gen_survival(const SurvivalSpec& spec);

/// A rendered tile: elliptical nuclei on a pale background, with the
/// matching instance mask.
struct TissueSpec {
    std::size_t width = 256;
    std::size_t height = 256;
    std::size_t cells = 25;
    double min_radius_px = 4.0;
    double max_radius_px = 8.0;
    double pixel_size_um = 0.5;
    std::uint64_t seed = 0;
};

struct Tissue {
    construct::RgbImage image;
    construct::InstanceMask mask;
};

Tissue render_tissue(const TissueSpec& spec);

}  // namespace cellgraph::synth

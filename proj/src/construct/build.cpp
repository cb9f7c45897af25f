#include "cellgraph/construct/build.hpp"

#include "cellgraph/construct/delaunay.hpp"
#include "cellgraph/construct/descriptors.hpp"

namespace cellgraph::construct {

graph::CellGraph build_cell_graph(const RgbImage& image, const InstanceMask& mask,
                                  const std::map<std::uint32_t, double>& probabilities, float magnification) {
    const CellMeasurements cells = extract_descriptors(image, mask, probabilities);
    const std::size_t n = cells.descriptors.size();

    graph::CellGraph g;
    g.magnification = magnification;
    g.features = Matrix(n, kDescriptorCount);
    std::vector<Vec2> stored(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < kDescriptorCount; ++f) g.features(i, f) = static_cast<float>(cells.descriptors[i][f]);
        const graph::Point p{static_cast<float>(cells.centroids_um[i].x), static_cast<float>(cells.centroids_um[i].y)};
        g.positions.push_back(p);
        // triangulate and measure the positions as stored, so weights match them exactly
        stored[i] = {p.x, p.y};
    }
    g.edges = prune_and_weight(delaunay(stored), stored);
    g.validate();
    return g;
}

}  // namespace cellgraph::construct

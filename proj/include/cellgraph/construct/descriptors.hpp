#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cellgraph/construct/image.hpp"
#include "cellgraph/construct/predicates.hpp"

namespace cellgraph::construct {

inline constexpr std::size_t kDescriptorCount = 73;
inline constexpr std::size_t kColorOffset = 0;       // 24 values
inline constexpr std::size_t kMorphologyOffset = 24;  // 13 values
inline constexpr std::size_t kTextureOffset = 37;     // 36 values

using CellDescriptor = std::array<double, kDescriptorCount>;

/// Names in output order.
const std::vector<std::string>& descriptor_names();
std::size_t descriptor_index(const std::string& name);

struct CellMeasurements {
    std::vector<CellDescriptor> descriptors;  // ascending instance id
    std::vector<Vec2> centroids_um;           // mean pixel centre times pixel size
    std::vector<std::uint32_t> instance_ids;  // original ids
};

/// Color, morphology and texture descriptors of every labelled cell.
/// `probabilities` maps original instance ids to detector confidence; cells
/// without an entry get 1.0. Each cell reads only its own pixels.
CellMeasurements extract_descriptors(const RgbImage& image, const InstanceMask& mask,
                                     const std::map<std::uint32_t, double>& probabilities = {});

}  // namespace cellgraph::construct

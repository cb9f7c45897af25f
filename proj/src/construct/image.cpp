#include "cellgraph/construct/image.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace cellgraph::construct {

void RgbImage::set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &pixels[3 * (y * width + x)];
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

CanonicalMask canonicalize(const InstanceMask& mask) {
    if (mask.ids.size() != mask.width * mask.height)
        throw std::invalid_argument("instance mask: pixel count does not match width x height");
    if (!(mask.pixel_size_um > 0.0)) throw std::invalid_argument("instance mask: pixel size must be positive");
    CanonicalMask out;
    std::vector<std::uint32_t> seen;
    for (auto id : mask.ids)
        if (id != 0) seen.push_back(id);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    std::unordered_map<std::uint32_t, std::uint32_t> rename;
    for (std::size_t k = 0; k < seen.size(); ++k) rename.emplace(seen[k], static_cast<std::uint32_t>(k + 1));
    out.mask = mask;
    for (auto& id : out.mask.ids)
        if (id != 0) id = rename.at(id);
    out.original_ids = std::move(seen);
    return out;
}

}  // namespace cellgraph::construct

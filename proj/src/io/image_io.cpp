#include "cellgraph/io/image_io.hpp"

#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cellgraph::io {

construct::RgbImage read_rgb(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot read image " + path.string());
    if (m.depth() != CV_8U) throw std::runtime_error(path.string() + ": expected an 8-bit image");
    cv::Mat rgb;
    switch (m.channels()) {
        case 1: cv::cvtColor(m, rgb, cv::COLOR_GRAY2RGB); break;
        case 3: cv::cvtColor(m, rgb, cv::COLOR_BGR2RGB); break;
        case 4: cv::cvtColor(m, rgb, cv::COLOR_BGRA2RGB); break;
        default: throw std::runtime_error(path.string() + ": unsupported channel count");
    }
    construct::RgbImage out(static_cast<std::size_t>(rgb.cols), static_cast<std::size_t>(rgb.rows));
    for (int y = 0; y < rgb.rows; ++y) {
        const auto* row = rgb.ptr<std::uint8_t>(y);
        std::copy(row, row + 3 * rgb.cols, out.pixels.begin() + 3 * static_cast<std::size_t>(y) * out.width);
    }
    return out;
}

construct::InstanceMask read_mask(const std::filesystem::path& path, double pixel_size_um) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw std::runtime_error("cannot read mask " + path.string());
    if (m.channels() != 1) throw std::runtime_error(path.string() + ": mask must have one channel");
    construct::InstanceMask out(static_cast<std::size_t>(m.cols), static_cast<std::size_t>(m.rows), pixel_size_um);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            std::int64_t v = 0;
            switch (m.depth()) {
                case CV_8U: v = m.at<std::uint8_t>(y, x); break;
                case CV_16U: v = m.at<std::uint16_t>(y, x); break;
                case CV_32S: v = m.at<std::int32_t>(y, x); break;
                default: throw std::runtime_error(path.string() + ": mask must be 8, 16 or 32-bit integer");
            }
            if (v < 0) throw std::runtime_error(path.string() + ": negative instance id");
            out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<std::uint32_t>(v);
        }
    return out;
}

void write_rgb(const std::filesystem::path& path, const construct::RgbImage& image) {
    cv::Mat rgb(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3,
                const_cast<std::uint8_t*>(image.pixels.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

void write_mask(const std::filesystem::path& path, const construct::InstanceMask& mask) {
    cv::Mat m(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_16UC1);
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x) {
            const auto id = mask.at(x, y);
            if (id > 65535) throw std::runtime_error(path.string() + ": instance id above 65535");
            m.at<std::uint16_t>(static_cast<int>(y), static_cast<int>(x)) = static_cast<std::uint16_t>(id);
        }
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace cellgraph::io

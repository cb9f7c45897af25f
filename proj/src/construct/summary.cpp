#include "cellgraph/construct/summary.hpp"

#include <algorithm>
#include <cmath>

namespace cellgraph::construct {

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.std = std::sqrt(m2);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    // rounding noise around a constant would otherwise give arbitrary shape stats
    const double scale = std::max(std::abs(s.min), std::abs(s.max));
    if (s.max == s.min) {
        s.mean = s.min;
        s.std = 0.0;
        return s;
    }
    if (s.std <= 1e-12 * scale) return s;
    s.skew = m3 / (m2 * s.std);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
    return s;
}

}  // namespace cellgraph::construct

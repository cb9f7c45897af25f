#pragma once

#include <span>

namespace cellgraph::construct {

/// Population moments of a sample. Skewness and excess kurtosis are 0 when
/// the sample is (numerically) constant; every field is 0 for an empty sample.
struct Summary {
    double mean = 0.0;
    double std = 0.0;
    double skew = 0.0;
    double kurtosis = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::span<const double> values);

}  // namespace cellgraph::construct

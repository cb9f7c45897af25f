#pragma once

// Per-bag, double-precision re-implementation of the three MIL heads.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cellgraph/heads/mil.hpp"

namespace cellgraph::testing {

using Vec = std::vector<double>;

inline Vec row_of(const Matrix& m, std::size_t r) { return Vec(m.row(r).begin(), m.row(r).end()); }

// x^T W (+ b) for W stored in x out.
inline Vec affine(const Vec& x, const Matrix& w, const Matrix* b) {
    Vec out(w.cols(), 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j) {
        for (std::size_t i = 0; i < x.size(); ++i) out[j] += x[i] * w(i, j);
        if (b) out[j] += (*b)(0, j);
    }
    return out;
}

inline Vec reference_g(heads::MilModel& m, Vec x) {
    for (std::size_t k = 0; k < m.g_weights.size(); ++k) {
        x = affine(x, m.g_weights[k].value, m.g_biases.empty() ? nullptr : &m.g_biases[k].value);
        if (k + 1 < m.g_weights.size())
            for (auto& v : x) v = std::max(v, 0.0);
    }
    return x;
}

inline Vec reference_attention(heads::MilModel& m, const Matrix& bag) {
    Vec scores;
    for (std::size_t j = 0; j < bag.rows(); ++j) {
        Vec t = affine(row_of(bag, j), m.v.value, nullptr);
        double s = 0.0;
        for (std::size_t q = 0; q < t.size(); ++q) s += std::tanh(t[q]) * m.w.value(q, 0);
        scores.push_back(s);
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (auto& s : scores) z += (s = std::exp(s - mx));
    for (auto& s : scores) s /= z;
    return scores;
}

inline Vec reference_logits(heads::MilModel& m, const Matrix& bag) {
    const Vec a = reference_attention(m, bag);
    const std::size_t d = bag.cols();
    Vec out;
    auto accumulate = [&](const Vec& v, double scale) {
        if (out.empty()) out.assign(v.size(), 0.0);
        for (std::size_t c = 0; c < v.size(); ++c) out[c] += scale * v[c];
    };
    if (m.variant() == heads::MilVariant::abmil) {
        Vec pooled(d, 0.0);
        for (std::size_t j = 0; j < bag.rows(); ++j)
            for (std::size_t c = 0; c < d; ++c) pooled[c] += a[j] * bag(j, c);
        return reference_g(m, pooled);
    }
    for (std::size_t j = 0; j < bag.rows(); ++j) {
        Vec h = row_of(bag, j);
        if (m.variant() == heads::MilVariant::add) {
            for (auto& v : h) v *= a[j];
            accumulate(reference_g(m, h), 1.0);
        } else {
            accumulate(reference_g(m, h), a[j]);
        }
    }
    return out;
}

}  // namespace cellgraph::testing

#include "cellgraph/heads/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cellgraph::heads {

namespace {

void check_inputs(std::span<const std::uint32_t> truth, std::size_t n, std::size_t classes) {
    if (truth.empty()) throw std::invalid_argument("metrics: empty input");
    if (truth.size() != n)
        throw std::invalid_argument("metrics: " + std::to_string(truth.size()) + " labels vs " + std::to_string(n) +
                                    " predictions");
    for (auto t : truth)
        if (t >= classes) throw std::invalid_argument("metrics: label " + std::to_string(t) + " out of range");
}

struct Confusion {
    std::vector<double> tp, fp, fn;
};

Confusion confusion(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> pred, std::size_t classes) {
    check_inputs(truth, pred.size(), classes);
    Confusion c{std::vector<double>(classes), std::vector<double>(classes), std::vector<double>(classes)};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (pred[i] >= classes) throw std::invalid_argument("metrics: prediction out of range");
        if (truth[i] == pred[i]) {
            c.tp[truth[i]] += 1;
        } else {
            c.fn[truth[i]] += 1;
            c.fp[pred[i]] += 1;
        }
    }
    return c;
}

std::vector<double> column(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
    return out;
}

// Area under the ROC curve of scores for the positive set, via ranks.
double binary_auroc(const std::vector<double>& s, const std::vector<bool>& pos) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] < s[b]; });
    double rank_sum = 0.0, n_pos = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && s[order[j]] == s[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;  // mean 1-based rank
        for (std::size_t k = i; k < j; ++k)
            if (pos[order[k]]) {
                rank_sum += mid;
                n_pos += 1;
            }
        i = j;
    }
    const double n_neg = static_cast<double>(s.size()) - n_pos;
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

double binary_average_precision(const std::vector<double>& s, const std::vector<bool>& pos) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    const double total_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
    double tp = 0.0, seen = 0.0, ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && s[order[j]] == s[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) tp += pos[order[k]] ? 1.0 : 0.0;
        seen += static_cast<double>(j - i);
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / seen);
        prev_recall = recall;
        i = j;
    }
    return ap;
}

template <typename F>
double one_vs_rest(std::span<const std::uint32_t> truth, const Matrix& scores, bool need_negatives, F binary) {
    check_inputs(truth, scores.rows(), scores.cols());
    double sum = 0.0;
    int used = 0;
    for (std::size_t c = 0; c < scores.cols(); ++c) {
        std::vector<bool> pos(truth.size());
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            pos[i] = truth[i] == c;
            n_pos += pos[i];
        }
        if (n_pos == 0 || (need_negatives && n_pos == truth.size())) continue;
        sum += binary(column(scores, c), pos);
        ++used;
    }
    return used == 0 ? std::nan("") : sum / used;
}

}  // namespace

double macro_f1(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> pred, std::size_t classes) {
    const Confusion c = confusion(truth, pred, classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double denom = 2 * c.tp[k] + c.fp[k] + c.fn[k];
        sum += denom > 0 ? 2 * c.tp[k] / denom : 0.0;
    }
    return sum / static_cast<double>(classes);
}

double balanced_accuracy(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> pred,
                         std::size_t classes) {
    const Confusion c = confusion(truth, pred, classes);
    double sum = 0.0;
    int present = 0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double support = c.tp[k] + c.fn[k];
        if (support == 0) continue;
        sum += c.tp[k] / support;
        ++present;
    }
    return sum / present;
}

double auroc(std::span<const std::uint32_t> truth, const Matrix& scores) {
    return one_vs_rest(truth, scores, true, binary_auroc);
}

double auprc(std::span<const std::uint32_t> truth, const Matrix& scores) {
    return one_vs_rest(truth, scores, false, binary_average_precision);
}

Labels argmax_rows(const Matrix& scores) {
    Labels out(scores.rows());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        const auto row = scores.row(r);
        out[r] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

ClassificationMetrics evaluate(std::span<const std::uint32_t> truth, const Matrix& scores) {
    const Labels pred = argmax_rows(scores);
    ClassificationMetrics m;
    m.macro_f1 = macro_f1(truth, pred, scores.cols());
    m.balanced_accuracy = balanced_accuracy(truth, pred, scores.cols());
    m.auroc = auroc(truth, scores);
    m.auprc = auprc(truth, scores);
    return m;
}

}  // namespace cellgraph::heads

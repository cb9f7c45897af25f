#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cellgraph/numerics/matrix.hpp"

namespace cellgraph::heads {

using Labels = std::vector<std::uint32_t>;

struct ClassificationMetrics {
    double macro_f1 = 0.0;
    double balanced_accuracy = 0.0;
    double auroc = 0.0;  // NaN when no class has both positives and negatives
    double auprc = 0.0;
};

/// Unweighted mean of per-class F1 over classes 0..classes-1; a class with
/// no true and no predicted members scores 0 and still counts.
double macro_f1(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> pred, std::size_t classes);

/// Mean recall over the classes present in `truth`.
double balanced_accuracy(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> pred,
                         std::size_t classes);

/// One-vs-rest AUROC (ties count half), macro-averaged over classes that
/// have both positive and negative samples.
double auroc(std::span<const std::uint32_t> truth, const Matrix& scores);

/// One-vs-rest average precision (step interpolation, tied scores grouped),
/// macro-averaged over classes with at least one positive.
double auprc(std::span<const std::uint32_t> truth, const Matrix& scores);

/// Row-wise argmax; the lowest index wins ties.
Labels argmax_rows(const Matrix& scores);

/// All four metrics, predicting the argmax of `scores` (N x classes).
ClassificationMetrics evaluate(std::span<const std::uint32_t> truth, const Matrix& scores);

}  // namespace cellgraph::heads

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cellgraph/heads/metrics.hpp"

namespace cellgraph::heads {

struct ProbeConfig {
    double l2 = 1e-3;  // on weights, not intercepts; the data term is a mean over samples
    int max_iterations = 1000;
    double gradient_tolerance = 1e-10;
    bool standardize = true;
};

/// Multinomial logistic regression with an L2 penalty, fitted by L-BFGS on
/// the full batch. Deterministic.
class LogisticProbe {
public:
    LogisticProbe() = default;

    void fit(const Matrix& x, std::span<const std::uint32_t> y, std::size_t classes, const ProbeConfig& config = {});
    /// N x classes class probabilities.
    Matrix predict_proba(const Matrix& x) const;
    /// Mean log-likelihood of the labels (no penalty).
    double log_likelihood(const Matrix& x, std::span<const std::uint32_t> y) const;

    const Eigen::MatrixXd& weights() const noexcept { return w_; }     // d x classes, standardized inputs
    const Eigen::VectorXd& intercepts() const noexcept { return b_; }  // classes
    int iterations() const noexcept { return iterations_; }

private:
    Eigen::MatrixXd prepare(const Matrix& x) const;

    Eigen::RowVectorXd mean_, scale_;
    Eigen::MatrixXd w_;
    Eigen::VectorXd b_;
    int iterations_ = 0;
};

struct ProbeFoldResult {
    std::string fold;
    ClassificationMetrics metrics;
};

/// Trains on all records outside each distinct fold tag and tests on the
/// tag. Throws if a training side holds a single class.
std::vector<ProbeFoldResult> probe_folds(const Matrix& x, std::span<const std::uint32_t> y, std::size_t classes,
                                         std::span<const std::string> fold_tags, const ProbeConfig& config = {});

}  // namespace cellgraph::heads

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cellgraph::survival {

/// Right-censored outcomes aligned with the rows of a covariate matrix.
struct Outcomes {
    std::vector<double> times;  // days, > 0
    std::vector<bool> events;   // true = death observed

    std::size_t size() const noexcept { return times.size(); }
    /// Throws unless lengths agree and every time is positive and finite.
    void validate() const;
    std::size_t event_count() const;
};

struct CoxConfig {
    double l2 = 0.1;
    double tolerance = 1e-9;  // on the gradient infinity norm
    int max_iterations = 100;
    bool standardize = true;
};

/// Ridge-penalized Cox model. Coefficients act on standardized covariates.
struct CoxModel {
    Eigen::VectorXd beta;
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;
    double l2 = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;  // infinity norm at the solution
    double objective = 0.0;      // penalized log partial likelihood
    std::vector<double> objective_trace;  // after each accepted step, starting at beta = 0

    /// Linear predictor for raw covariate rows.
    Eigen::VectorXd risk(const Eigen::MatrixXd& x) const;
};

/// Breslow log partial likelihood minus (l2/2)|beta|^2.
double cox_objective(const Eigen::MatrixXd& x, const Outcomes& y, const Eigen::VectorXd& beta, double l2);

/// Newton iterations with step halving from beta = 0. Throws on zero events
/// or if no step improves the objective; `converged` reports whether the
/// tolerance was met within max_iterations.
CoxModel cox_fit(const Eigen::MatrixXd& x, const Outcomes& y, const CoxConfig& config = {});

/// true = high risk: strictly above the median risk.
std::vector<bool> risk_split(std::span<const double> risks);

struct KmStep {
    double time = 0.0;
    double survival = 1.0;
    std::size_t at_risk = 0;
    std::size_t events = 0;
};

/// Product-limit estimate with one step per distinct event time. The curve
/// is 1 before the first step.
std::vector<KmStep> kaplan_meier(const Outcomes& y);

struct LogRankResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double observed_a = 0.0;
    double expected_a = 0.0;
    double variance = 0.0;
};

LogRankResult logrank(const Outcomes& a, const Outcomes& b);

/// Survival function of the chi-square distribution.
double chi2_sf(double x, double dof);

/// Harrell's C over pairs (i, j) with t_i < t_j and an event at i; higher
/// risk at i is concordant, equal risks count one half.
double c_index(std::span<const double> risks, const Outcomes& y);

/// Out-of-fold risks from a k-fold split (folds dealt round-robin after a
/// seeded shuffle), scored together.
double cross_validated_c_index(const Eigen::MatrixXd& x, const Outcomes& y, int folds, std::uint64_t seed,
                               const CoxConfig& config = {});

}  // namespace cellgraph::survival

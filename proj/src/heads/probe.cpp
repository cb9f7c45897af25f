#include "cellgraph/heads/probe.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <ceres/ceres.h>

namespace cellgraph::heads {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& x) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(r, c);
    return out;
}

// Row-wise log-softmax of scores.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& s) {
    Eigen::MatrixXd out = s;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        const double lse = m + std::log((s.row(r).array() - m).exp().sum());
        out.row(r).array() -= lse;
    }
    return out;
}

// Penalized mean negative log-likelihood over parameters packed as
// [W column-major (d x k), b (k)].
class Objective final : public ceres::FirstOrderFunction {
public:
    Objective(const Eigen::MatrixXd& x, std::span<const std::uint32_t> y, Eigen::Index k, double l2)
        : x_(x), y_(y.begin(), y.end()), k_(k), l2_(l2) {}

    int NumParameters() const override { return static_cast<int>((x_.cols() + 1) * k_); }

    bool Evaluate(const double* params, double* cost, double* gradient) const override {
        const Eigen::Index d = x_.cols(), n = x_.rows();
        const Eigen::Map<const Eigen::MatrixXd> w(params, d, k_);
        const Eigen::Map<const Eigen::RowVectorXd> b(params + d * k_, k_);
        const Eigen::MatrixXd logp = log_softmax((x_ * w).rowwise() + b);
        double nll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) nll -= logp(i, y_[static_cast<std::size_t>(i)]);
        *cost = nll / static_cast<double>(n) + 0.5 * l2_ * w.squaredNorm();
        if (gradient) {
            Eigen::MatrixXd resid = logp.array().exp();
            for (Eigen::Index i = 0; i < n; ++i) resid(i, y_[static_cast<std::size_t>(i)]) -= 1.0;
            resid /= static_cast<double>(n);
            Eigen::Map<Eigen::MatrixXd> gw(gradient, d, k_);
            Eigen::Map<Eigen::RowVectorXd> gb(gradient + d * k_, k_);
            gw = x_.transpose() * resid + l2_ * w;
            gb = resid.colwise().sum();
        }
        return true;
    }

private:
    const Eigen::MatrixXd& x_;
    std::vector<std::uint32_t> y_;
    Eigen::Index k_;
    double l2_;
};

}  // namespace

Eigen::MatrixXd LogisticProbe::prepare(const Matrix& x) const {
    if (static_cast<Eigen::Index>(x.cols()) != mean_.size())
        throw std::invalid_argument("probe: expected " + std::to_string(mean_.size()) + " features, got " +
                                    std::to_string(x.cols()));
    Eigen::MatrixXd z = to_eigen(x);
    z.rowwise() -= mean_;
    return z.array().rowwise() / scale_.array();
}

void LogisticProbe::fit(const Matrix& x, std::span<const std::uint32_t> y, std::size_t classes,
                        const ProbeConfig& config) {
    if (x.rows() == 0) throw std::invalid_argument("probe: no training samples");
    if (y.size() != x.rows()) throw std::invalid_argument("probe: label count does not match rows");
    if (!(config.l2 >= 0.0)) throw std::invalid_argument("probe: l2 must be >= 0");
    std::set<std::uint32_t> present;
    for (auto l : y) {
        if (l >= classes) throw std::invalid_argument("probe: label " + std::to_string(l) + " out of range");
        present.insert(l);
    }
    if (present.size() < 2) throw std::invalid_argument("probe: training data holds a single class");
    const auto d = static_cast<Eigen::Index>(x.cols());
    const auto k = static_cast<Eigen::Index>(classes);
    const Eigen::MatrixXd raw = to_eigen(x);
    mean_ = Eigen::RowVectorXd::Zero(d);
    scale_ = Eigen::RowVectorXd::Ones(d);
    if (config.standardize) {
        mean_ = raw.colwise().mean();
        for (Eigen::Index c = 0; c < d; ++c) {
            const double sd = std::sqrt((raw.col(c).array() - mean_(c)).square().mean());
            if (sd > 1e-12 * std::max(1.0, std::abs(mean_(c)))) scale_(c) = sd;
        }
    }
    const Eigen::MatrixXd z = prepare(x);

    std::vector<double> params(static_cast<std::size_t>((d + 1) * k), 0.0);
    ceres::GradientProblem problem(new Objective(z, y, k, config.l2));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::LBFGS;
    options.max_num_iterations = config.max_iterations;
    options.gradient_tolerance = config.gradient_tolerance;
    options.function_tolerance = 1e-14;
    options.parameter_tolerance = 1e-14;
    options.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, params.data(), &summary);
    if (!std::isfinite(summary.final_cost)) throw std::runtime_error("probe: optimization diverged");
    iterations_ = static_cast<int>(summary.iterations.size());
    w_ = Eigen::Map<const Eigen::MatrixXd>(params.data(), d, k);
    b_ = Eigen::Map<const Eigen::VectorXd>(params.data() + d * k, k);
}

Matrix LogisticProbe::predict_proba(const Matrix& x) const {
    if (w_.size() == 0 && b_.size() == 0) throw std::logic_error("probe: not fitted");
    const Eigen::MatrixXd logp = log_softmax((prepare(x) * w_).rowwise() + b_.transpose());
    Matrix out(x.rows(), static_cast<std::size_t>(w_.cols()));
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c)
            out(r, c) = static_cast<float>(std::exp(logp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    return out;
}

double LogisticProbe::log_likelihood(const Matrix& x, std::span<const std::uint32_t> y) const {
    const Eigen::MatrixXd logp = log_softmax((prepare(x) * w_).rowwise() + b_.transpose());
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += logp(static_cast<Eigen::Index>(i), y[i]);
    return sum / static_cast<double>(y.size());
}

std::vector<ProbeFoldResult> probe_folds(const Matrix& x, std::span<const std::uint32_t> y, std::size_t classes,
                                         std::span<const std::string> fold_tags, const ProbeConfig& config) {
    if (fold_tags.size() != x.rows() || y.size() != x.rows())
        throw std::invalid_argument("probe: embeddings, labels and folds differ in length");
    const std::set<std::string> tags(fold_tags.begin(), fold_tags.end());
    if (tags.size() < 2) throw std::invalid_argument("probe: need at least two folds");
    std::vector<ProbeFoldResult> out;
    for (const auto& tag : tags) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < fold_tags.size(); ++i) (fold_tags[i] == tag ? te : tr).push_back(i);
        auto take = [&](const std::vector<std::size_t>& rows, Matrix& xs, Labels& ys) {
            xs = Matrix(rows.size(), x.cols());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                std::copy(x.row(rows[r]).begin(), x.row(rows[r]).end(), xs.row(r).begin());
                ys.push_back(y[rows[r]]);
            }
        };
        Matrix xtr, xte;
        Labels ytr, yte;
        take(tr, xtr, ytr);
        take(te, xte, yte);
        LogisticProbe probe;
        try {
            probe.fit(xtr, ytr, classes, config);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("probe fold '" + tag + "': " + e.what());
        }
        out.push_back({tag, evaluate(yte, probe.predict_proba(xte))});
    }
    return out;
}

}  // namespace cellgraph::heads

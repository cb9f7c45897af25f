#include "cellgraph/survival/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "cellgraph/numerics/rng.hpp"

namespace cellgraph::survival {

void Outcomes::validate() const {
    if (times.size() != events.size()) throw std::invalid_argument("survival: times and events differ in length");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > 0.0) || !std::isfinite(times[i]))
            throw std::invalid_argument("survival: time at row " + std::to_string(i) + " must be positive");
}

std::size_t Outcomes::event_count() const { return static_cast<std::size_t>(std::count(events.begin(), events.end(), true)); }

namespace {

// Row indices sorted by descending time so risk sets grow as we scan.
std::vector<std::size_t> by_descending_time(const Outcomes& y) {
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return y.times[a] > y.times[b]; });
    return order;
}

struct Derivatives {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

// Breslow log partial likelihood and derivatives (penalty excluded).
Derivatives partial_likelihood(const Eigen::MatrixXd& x, const Outcomes& y, const Eigen::VectorXd& beta, bool second) {
    const auto p = x.cols();
    const Eigen::VectorXd eta = x * beta;
    Derivatives d{0.0, Eigen::VectorXd::Zero(p), second ? Eigen::MatrixXd::Zero(p, p) : Eigen::MatrixXd()};
    const auto order = by_descending_time(y);
    // exp(eta) can overflow for large coefficients; shift by the max
    const double shift = eta.size() ? eta.maxCoeff() : 0.0;
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = second ? Eigen::MatrixXd::Zero(p, p) : Eigen::MatrixXd();
    for (std::size_t k = 0; k < order.size();) {
        std::size_t j = k;
        double events = 0.0;
        Eigen::VectorXd event_x = Eigen::VectorXd::Zero(p);
        double event_eta = 0.0;
        while (j < order.size() && y.times[order[j]] == y.times[order[k]]) {
            const auto i = static_cast<Eigen::Index>(order[j]);
            const double w = std::exp(eta(i) - shift);
            s0 += w;
            s1 += w * x.row(i).transpose();
            if (second) s2 += w * x.row(i).transpose() * x.row(i);
            if (y.events[order[j]]) {
                events += 1.0;
                event_x += x.row(i).transpose();
                event_eta += eta(i);
            }
            ++j;
        }
        if (events > 0.0) {
            const Eigen::VectorXd mean = s1 / s0;
            d.value += event_eta - events * (std::log(s0) + shift);
            d.gradient += event_x - events * mean;
            if (second) d.hessian -= events * (s2 / s0 - mean * mean.transpose());
        }
        k = j;
    }
    return d;
}

}  // namespace

Eigen::VectorXd CoxModel::risk(const Eigen::MatrixXd& x) const {
    if (x.cols() != beta.size()) throw std::invalid_argument("cox: covariate dimension mismatch");
    Eigen::MatrixXd z = x;
    z.rowwise() -= mean;
    z = z.array().rowwise() / scale.array();
    return z * beta;
}

double cox_objective(const Eigen::MatrixXd& x, const Outcomes& y, const Eigen::VectorXd& beta, double l2) {
    return partial_likelihood(x, y, beta, false).value - 0.5 * l2 * beta.squaredNorm();
}

CoxModel cox_fit(const Eigen::MatrixXd& x, const Outcomes& y, const CoxConfig& config) {
    y.validate();
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("cox: covariate rows do not match outcomes");
    if (y.event_count() == 0) throw std::invalid_argument("cox: no events");
    if (!(config.l2 >= 0.0)) throw std::invalid_argument("cox: l2 must be >= 0");
    const auto p = x.cols();
    CoxModel m;
    m.l2 = config.l2;
    m.mean = Eigen::RowVectorXd::Zero(p);
    m.scale = Eigen::RowVectorXd::Ones(p);
    if (config.standardize) {
        m.mean = x.colwise().mean();
        for (Eigen::Index c = 0; c < p; ++c) {
            const double sd = std::sqrt((x.col(c).array() - m.mean(c)).square().mean());
            if (sd > 1e-12 * std::max(1.0, std::abs(m.mean(c)))) m.scale(c) = sd;
        }
    }
    Eigen::MatrixXd z = x;
    z.rowwise() -= m.mean;
    z = z.array().rowwise() / m.scale.array();

    m.beta = Eigen::VectorXd::Zero(p);
    m.objective = cox_objective(z, y, m.beta, config.l2);
    m.objective_trace.push_back(m.objective);
    for (m.iterations = 0; m.iterations < config.max_iterations; ++m.iterations) {
        Derivatives d = partial_likelihood(z, y, m.beta, true);
        d.gradient -= config.l2 * m.beta;
        d.hessian -= config.l2 * Eigen::MatrixXd::Identity(p, p);
        m.gradient_norm = p ? d.gradient.lpNorm<Eigen::Infinity>() : 0.0;
        if (m.gradient_norm < config.tolerance) {
            m.converged = true;
            break;
        }
        // -H is positive semidefinite; LDLT copes with the unpenalized singular case
        const Eigen::VectorXd step = (-d.hessian).ldlt().solve(d.gradient);
        // Near the optimum the predicted gain drops below the rounding noise of
        // the objective; the full Newton step is then taken as is.
        const double noise = 1e-13 * (1.0 + std::abs(m.objective));
        const bool tiny = 0.5 * d.gradient.dot(step) < noise;
        double t = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            const Eigen::VectorXd cand = m.beta + t * step;
            const double obj = cox_objective(z, y, cand, config.l2);
            if (std::isfinite(obj) && (obj >= m.objective || (tiny && obj >= m.objective - noise))) {
                m.beta = cand;
                m.objective = obj;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // at the floating-point optimum; reported through `converged`
        m.objective_trace.push_back(m.objective);
    }
    if (!m.converged) {
        Derivatives d = partial_likelihood(z, y, m.beta, false);
        d.gradient -= config.l2 * m.beta;
        m.gradient_norm = p ? d.gradient.lpNorm<Eigen::Infinity>() : 0.0;
        m.converged = m.gradient_norm < config.tolerance;
    }
    if (!m.beta.allFinite()) throw std::runtime_error("cox: coefficients are not finite");
    return m;
}

std::vector<bool> risk_split(std::span<const double> risks) {
    if (risks.empty()) return {};
    std::vector<double> sorted(risks.begin(), risks.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<bool> high(n);
    for (std::size_t i = 0; i < n; ++i) high[i] = risks[i] > median;
    return high;
}

std::vector<KmStep> kaplan_meier(const Outcomes& y) {
    y.validate();
    if (y.size() == 0) throw std::invalid_argument("kaplan-meier: empty input");
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return y.times[a] < y.times[b]; });
    std::vector<KmStep> steps;
    std::size_t at_risk = y.size();
    double s = 1.0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t j = k, events = 0;
        while (j < order.size() && y.times[order[j]] == y.times[order[k]]) events += y.events[order[j++]];
        if (events > 0) {
            s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
            steps.push_back({y.times[order[k]], s, at_risk, events});
        }
        at_risk -= j - k;
        k = j;
    }
    return steps;
}

double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

LogRankResult logrank(const Outcomes& a, const Outcomes& b) {
    a.validate();
    b.validate();
    if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("log-rank: both groups must be nonempty");
    struct Obs {
        double time;
        bool event;
        bool in_a;
    };
    std::vector<Obs> all;
    for (std::size_t i = 0; i < a.size(); ++i) all.push_back({a.times[i], a.events[i], true});
    for (std::size_t i = 0; i < b.size(); ++i) all.push_back({b.times[i], b.events[i], false});
    std::sort(all.begin(), all.end(), [](const Obs& p, const Obs& q) { return p.time < q.time; });
    LogRankResult r;
    double n = static_cast<double>(all.size()), na = static_cast<double>(a.size());
    for (std::size_t k = 0; k < all.size();) {
        std::size_t j = k;
        double d = 0, da = 0, removed_a = 0;
        while (j < all.size() && all[j].time == all[k].time) {
            d += all[j].event;
            da += all[j].event && all[j].in_a;
            removed_a += all[j].in_a;
            ++j;
        }
        if (d > 0) {
            r.observed_a += da;
            r.expected_a += d * na / n;
            if (n > 1) r.variance += d * (na / n) * (1 - na / n) * (n - d) / (n - 1);
        }
        n -= static_cast<double>(j - k);
        na -= removed_a;
        k = j;
    }
    if (r.variance > 0.0) {
        const double diff = r.observed_a - r.expected_a;
        r.statistic = diff * diff / r.variance;
        r.p_value = chi2_sf(r.statistic, 1.0);
    }
    return r;
}

double c_index(std::span<const double> risks, const Outcomes& y) {
    y.validate();
    if (risks.size() != y.size()) throw std::invalid_argument("c-index: risks and outcomes differ in length");
    if (y.size() < 2) throw std::invalid_argument("c-index: need at least two subjects");
    double concordant = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!y.events[i]) continue;
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (!(y.times[i] < y.times[j])) continue;
            pairs += 1.0;
            concordant += risks[i] > risks[j] ? 1.0 : (risks[i] == risks[j] ? 0.5 : 0.0);
        }
    }
    if (pairs == 0.0) throw std::invalid_argument("c-index: no comparable pairs");
    return concordant / pairs;
}

double cross_validated_c_index(const Eigen::MatrixXd& x, const Outcomes& y, int folds, std::uint64_t seed,
                               const CoxConfig& config) {
    if (folds < 2 || static_cast<std::size_t>(folds) > y.size())
        throw std::invalid_argument("c-index: fold count must lie in [2, n]");
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold_of(y.size());
    for (std::size_t k = 0; k < order.size(); ++k) fold_of[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    std::vector<double> risks(y.size());
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
        Outcomes ytr;
        for (auto i : tr) {
            ytr.times.push_back(y.times[static_cast<std::size_t>(i)]);
            ytr.events.push_back(y.events[static_cast<std::size_t>(i)]);
        }
        const CoxModel m = cox_fit(x(tr, Eigen::all), ytr, config);
        const Eigen::VectorXd r = m.risk(x(te, Eigen::all));
        for (std::size_t k = 0; k < te.size(); ++k) risks[static_cast<std::size_t>(te[k])] = r(static_cast<Eigen::Index>(k));
    }
    return c_index(risks, y);
}

}  // namespace cellgraph::survival

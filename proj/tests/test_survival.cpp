#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/survival/survival.hpp"
#include "support/oracles.hpp"

using namespace cellgraph;
using namespace cellgraph::survival;

namespace {

Outcomes outcomes(std::vector<double> t, std::vector<bool> e) { return Outcomes{std::move(t), std::move(e)}; }

// Exponential event times with log-hazard beta * x, uniform censoring.
Outcomes planted(const Eigen::MatrixXd& x, double beta, Rng& rng) {
    Outcomes y;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double rate = 0.01 * std::exp(beta * x(i, 0));
        const double t = -std::log(1.0 - rng.uniform()) / rate;
        const double c = rng.uniform(50.0, 400.0);
        y.times.push_back(std::max(1e-3, std::min(t, c)));
        y.events.push_back(t <= c);
    }
    return y;
}

}  // namespace

TEST_CASE("kaplan-meier") {
    SUBCASE("hand product-limit case") {
        const auto s = kaplan_meier(outcomes({1, 2, 3}, {true, true, false}));
        REQUIRE(s.size() == 2);
        CHECK(s[0].time == 1.0);
        CHECK(s[0].survival == 1.0 - 1.0 / 3.0);
        CHECK(s[1].time == 2.0);
        CHECK(s[1].survival == (1.0 - 1.0 / 3.0) * (1.0 - 1.0 / 2.0));
    }
    SUBCASE("no events leaves the curve at 1") { CHECK(kaplan_meier(outcomes({4, 2, 9}, {false, false, false})).empty()); }
    SUBCASE("two events among four at risk") {
        const auto s = kaplan_meier(outcomes({5, 5, 7, 8}, {true, true, false, true}));
        CHECK(s[0].survival == 0.5);
        CHECK(s[0].at_risk == 4);
        CHECK(s[0].events == 2);
    }
    SUBCASE("order invariant, non-increasing, inside [0, 1]") {
        Rng rng(1);
        for (int t = 0; t < 30; ++t) {
            Outcomes y;
            for (int i = 0; i < 25; ++i) {
                y.times.push_back(1 + static_cast<double>(rng.index(10)));
                y.events.push_back(rng.bernoulli(0.6));
            }
            const auto s = kaplan_meier(y);
            std::vector<std::size_t> perm(y.size());
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            Outcomes z;
            for (auto i : perm) {
                z.times.push_back(y.times[i]);
                z.events.push_back(y.events[i]);
            }
            const auto s2 = kaplan_meier(z);
            REQUIRE(s.size() == s2.size());
            double prev = 1.0;
            for (std::size_t k = 0; k < s.size(); ++k) {
                CHECK(s[k].survival == s2[k].survival);
                CHECK(s[k].survival <= prev);
                CHECK(s[k].survival >= 0.0);
                prev = s[k].survival;
            }
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS(kaplan_meier(outcomes({}, {})));
        CHECK_THROWS(kaplan_meier(outcomes({0.0}, {true})));
    }
}

TEST_CASE("log-rank") {
    const Outcomes a = outcomes({3, 5, 7, 9, 12}, {true, true, false, true, true});
    SUBCASE("identical groups") {
        const auto r = logrank(a, a);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
    }
    SUBCASE("toy table matches per-time tabulation") {
        const Outcomes b = outcomes({1, 2, 5, 6, 8, 10}, {true, true, true, false, true, false});
        // Hand tabulation: at each distinct event time list (n, n_a, d, d_a).
        struct Row {
            double n, na, d, da;
        };
        const std::vector<Row> rows{{11, 5, 1, 0}, {10, 5, 1, 0}, {9, 5, 1, 1}, {8, 4, 2, 1},
                                    {4, 2, 1, 0}, {3, 2, 1, 1}, {1, 1, 1, 1}};
        double o = 0, e = 0, v = 0;
        for (const auto& r : rows) {
            o += r.da;
            e += r.d * r.na / r.n;
            if (r.n > 1) v += r.d * (r.na / r.n) * (1 - r.na / r.n) * (r.n - r.d) / (r.n - 1);
        }
        const auto r = logrank(a, b);
        CHECK(r.observed_a == o);
        CHECK(r.expected_a == doctest::Approx(e).epsilon(1e-12));
        CHECK(r.variance == doctest::Approx(v).epsilon(1e-12));
        CHECK(r.statistic == doctest::Approx((o - e) * (o - e) / v).epsilon(1e-12));
        // symmetric in group labels
        CHECK(logrank(b, a).statistic == doctest::Approx(r.statistic).epsilon(1e-12));
    }
    SUBCASE("no events") {
        const auto r = logrank(outcomes({1, 2}, {false, false}), outcomes({3}, {false}));
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
    }
}

TEST_CASE("chi-square tail") {
    CHECK(std::abs(chi2_sf(3.841, 1.0) - 0.05) < 1e-3);
    // Simpson integration of the df=1 density over [3.841, 80]
    auto pdf = [](double x) { return std::exp(-x / 2) / std::sqrt(2 * M_PI * x); };
    const double lo = 3.841, hi = 80.0;
    const int n = 20000;
    const double h = (hi - lo) / n;
    double s = pdf(lo) + pdf(hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(lo + i * h);
    CHECK(std::abs(chi2_sf(3.841, 1.0) - s * h / 3) < 1e-8);
    CHECK(chi2_sf(0.0, 1.0) == 1.0);
}

TEST_CASE("c-index") {
    SUBCASE("anti-ordered risks are fully concordant") {
        const Outcomes y = outcomes({1, 2, 3, 4, 5}, {true, true, true, true, true});
        const std::vector<double> r{5, 4, 3, 2, 1};
        CHECK(c_index(r, y) == 1.0);
    }
    SUBCASE("agrees with an independent pair enumeration") {
        Rng rng(2);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 2 + rng.index(30);
            Outcomes y;
            std::vector<double> r;
            for (std::size_t i = 0; i < n; ++i) {
                y.times.push_back(1 + static_cast<double>(rng.index(8)));
                y.events.push_back(rng.bernoulli(0.7));
                r.push_back(static_cast<double>(rng.index(5)));
            }
            const auto [num, den] = testing::c_index_pairs(r, y);
            if (den == 0) {
                CHECK_THROWS(c_index(r, y));
            } else {
                CHECK(c_index(r, y) == num / den);
            }
        }
    }
    SUBCASE("random risks are near one half") {
        Rng rng(3);
        const std::size_t n = 2000;
        Outcomes y;
        std::vector<double> r;
        for (std::size_t i = 0; i < n; ++i) {
            y.times.push_back(rng.uniform(1, 100));
            y.events.push_back(true);
            r.push_back(rng.uniform());
        }
        // all pairs comparable; the C statistic has sd about 1/sqrt(3n)
        CHECK(std::abs(c_index(r, y) - 0.5) < 3.0 / std::sqrt(3.0 * n));
    }
    SUBCASE("errors") {
        CHECK_THROWS(c_index(std::vector<double>{1}, outcomes({1}, {true})));
        CHECK_THROWS(c_index(std::vector<double>{1, 2}, outcomes({1, 2}, {false, false})));
    }
}

TEST_CASE("cox fit") {
    SUBCASE("identical covariates give zero coefficients") {
        Eigen::MatrixXd x = Eigen::MatrixXd::Constant(8, 2, 3.0);
        const Outcomes y = outcomes({1, 2, 3, 4, 5, 6, 7, 8}, {true, false, true, true, false, true, true, true});
        const CoxModel m = cox_fit(x, y);
        CHECK(m.beta.norm() == 0.0);
        CHECK(m.converged);
    }
    SUBCASE("1-d fit matches a grid scan of the penalized likelihood") {
        Rng rng(4);
        for (int t = 0; t < 5; ++t) {
            Eigen::MatrixXd x(30, 1);
            for (Eigen::Index i = 0; i < 30; ++i) x(i, 0) = rng.normal();
            const Outcomes y = planted(x, 1.0, rng);
            CoxConfig cfg;
            cfg.standardize = false;
            cfg.l2 = 0.5;
            const CoxModel m = cox_fit(x, y, cfg);
            double best = -1e300, arg = 0;
            for (double b = -5; b <= 5; b += 1e-3) {
                const double v = cox_objective(x, y, Eigen::VectorXd::Constant(1, b), cfg.l2);
                if (v > best) {
                    best = v;
                    arg = b;
                }
            }
            CHECK(std::abs(m.beta(0) - arg) < 1e-2);
            CHECK(m.converged);
            for (std::size_t k = 1; k < m.objective_trace.size(); ++k)
                CHECK(m.objective_trace[k] >= m.objective_trace[k - 1] - 1e-12 * std::abs(m.objective_trace[k - 1]));
        }
    }
    SUBCASE("covariate that orders event times gets a positive coefficient") {
        Eigen::MatrixXd x(10, 1);
        Outcomes y;
        for (int i = 0; i < 10; ++i) {
            x(i, 0) = 10 - i;  // higher covariate, earlier death
            y.times.push_back(i + 1);
            y.events.push_back(true);
        }
        CoxConfig cfg;
        cfg.l2 = 1e-2;
        CHECK(cox_fit(x, y, cfg).beta(0) > 0.0);
    }
    SUBCASE("planted risk direction and stratification") {
        Rng rng(5);
        Eigen::MatrixXd x(300, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        const Outcomes y = planted(x, 1.2, rng);
        const CoxModel m = cox_fit(x, y);
        CHECK(m.converged);
        CHECK(m.beta(0) > 0.5);
        CHECK(std::abs(m.beta(1)) < 0.3);
        const Eigen::VectorXd r = m.risk(x);
        const std::vector<double> risks(r.data(), r.data() + r.size());
        const auto high = risk_split(risks);
        Outcomes a, b;
        for (std::size_t i = 0; i < y.size(); ++i) {
            Outcomes& g = high[i] ? a : b;
            g.times.push_back(y.times[i]);
            g.events.push_back(y.events[i]);
        }
        CHECK(logrank(a, b).p_value < 0.01);
        CHECK(c_index(risks, y) > 0.65);
        const double cv = cross_validated_c_index(x, y, 5, 9);
        CHECK(cv > 0.6);
        CHECK(cv <= c_index(risks, y) + 0.05);
    }
    SUBCASE("errors") {
        Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
        CHECK_THROWS_WITH(cox_fit(x, outcomes({1, 2, 3}, {false, false, false})), doctest::Contains("no events"));
        CHECK_THROWS(cox_fit(x, outcomes({1, 2}, {true, true})));
    }
}

TEST_CASE("risk split") {
    const std::vector<double> r{1, 2, 3, 4};
    CHECK(risk_split(r) == std::vector<bool>{false, false, true, true});
    const std::vector<double> same(5, 2.0);
    CHECK(risk_split(same) == std::vector<bool>(5, false));
    const std::vector<double> odd{5, 1, 3};
    CHECK(risk_split(odd) == std::vector<bool>{true, false, false});
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> x(1 + rng.index(20)), scaled, warped;
        for (auto& v : x) v = rng.normal();
        for (double v : x) {
            scaled.push_back(3.5 * v);
            warped.push_back(std::exp(v) + 2);
        }
        CHECK(risk_split(scaled) == risk_split(x));
        CHECK(risk_split(warped) == risk_split(x));
        const auto h = risk_split(x);
        const auto highs = std::count(h.begin(), h.end(), true);
        CHECK(std::abs(2 * highs - static_cast<long>(x.size())) <= 1);
    }
}

#pragma once

// Central finite-difference gradient checking for tape-recorded functions.

#include <cmath>
#include <functional>
#include <vector>

#include "cellgraph/numerics/tape.hpp"

namespace cellgraph::testing {

/// Builds a scalar loss from leaf variables bound on a fresh tape.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;  // worst over inputs of |analytic - numeric| / max(|analytic|, |numeric|)
    std::size_t worst_input = 0;
};

/// Compares tape gradients with central differences of step h.
/// Relative error is measured per input as a vector norm ratio.
inline GradCheckResult gradcheck(const LossBuilder& build, std::vector<Matrix> inputs, double h = 1e-3) {
    std::vector<Matrix> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Matrix& m : inputs) vars.push_back(tape.variable(m));
        Var loss = build(tape, vars);
        tape.backward(loss);
        for (const Var& v : vars) analytic.push_back(tape.grad(v));
    }
    auto eval = [&](const std::vector<Matrix>& xs) {
        Tape tape;
        std::vector<Var> vars;
        for (const Matrix& m : xs) vars.push_back(tape.constant(m));
        return static_cast<double>(build(tape, vars).value()(0, 0));
    };
    GradCheckResult res;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const float orig = inputs[k].data()[i];
            inputs[k].data()[i] = static_cast<float>(orig + h);
            const double fp = eval(inputs);
            inputs[k].data()[i] = static_cast<float>(orig - h);
            const double fm = eval(inputs);
            inputs[k].data()[i] = orig;
            // use the step actually representable in float
            const double step = static_cast<double>(static_cast<float>(orig + h)) -
                                static_cast<double>(static_cast<float>(orig - h));
            const double numeric = (fp - fm) / step;
            const double a = analytic[k].data()[i];
            diff2 += (a - numeric) * (a - numeric);
            an2 += a * a;
            nu2 += numeric * numeric;
        }
        const double denom = std::max(std::sqrt(an2), std::sqrt(nu2));
        const double rel = denom < 1e-7 ? std::sqrt(diff2) : std::sqrt(diff2) / denom;
        if (rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_input = k;
        }
    }
    return res;
}

struct ParameterCheckResult {
    double rel_error = 0.0;     // |analytic - numeric| / max(|analytic|, |numeric|) over all checked coordinates
    std::size_t checked = 0;
    std::size_t kinks = 0;      // coordinates skipped as straddling a ReLU kink
};

/// Central-difference check over all parameters jointly, treated as one
/// vector. `build` records the loss on a fresh tape, binding the parameters
/// itself. A coordinate whose one-sided slopes disagree by more than
/// `kink_tolerance` (relative) sits on a non-differentiable point and is
/// skipped.
inline ParameterCheckResult gradcheck_parameters(const std::function<Var(Tape&)>& build,
                                                 const std::vector<Parameter*>& params, double h = 1e-3,
                                                 double kink_tolerance = 0.05) {
    std::vector<Matrix> analytic;
    double f0 = 0.0;
    {
        Tape tape;
        Var loss = build(tape);
        f0 = loss.value()(0, 0);
        tape.backward(loss);
        for (const Parameter* p : params) analytic.push_back(tape.grad(*p));
    }
    auto eval = [&] {
        Tape tape;
        return static_cast<double>(build(tape).value()(0, 0));
    };
    ParameterCheckResult res;
    double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& data = params[k]->value.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const float orig = data[i];
            const auto up = static_cast<float>(orig + h), down = static_cast<float>(orig - h);
            data[i] = up;
            const double fp = eval();
            data[i] = down;
            const double fm = eval();
            data[i] = orig;
            const double right = (fp - f0) / (static_cast<double>(up) - orig);
            const double left = (f0 - fm) / (orig - static_cast<double>(down));
            const double scale = std::max({std::abs(left), std::abs(right), 1e-2});
            if (std::abs(left - right) > kink_tolerance * scale) {
                ++res.kinks;
                continue;
            }
            const double numeric = (fp - fm) / (static_cast<double>(up) - static_cast<double>(down));
            const double a = analytic[k].data()[i];
            diff2 += (a - numeric) * (a - numeric);
            an2 += a * a;
            nu2 += numeric * numeric;
            ++res.checked;
        }
    }
    const double denom = std::max(std::sqrt(an2), std::sqrt(nu2));
    res.rel_error = denom < 1e-7 ? std::sqrt(diff2) : std::sqrt(diff2) / denom;
    return res;
}

}  // namespace cellgraph::testing

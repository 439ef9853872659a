#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kdlite/nn/errors.hpp"
#include "kdlite/nn/var.hpp"

namespace kdlite::nn {

struct GradCheckOptions {
    double eps = 1e-6;
    double tol = 1e-4;
    // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    // near-zero gradients from turning rounding noise into huge ratios.
    double floor = 1e-3;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = false;
};

using NamedParams = std::vector<std::pair<std::string, Var>>;

// Compares the analytic gradient of `objective` w.r.t. every element of every
// parameter against central differences. `objective` must rebuild the graph
// on each call and be deterministic.
inline GradCheckReport grad_check(const std::function<Var()>& objective, const NamedParams& params,
                                  const GradCheckOptions& opts = {}) {
    if (!(opts.eps >= 1e-6 && opts.eps <= 1e-4)) throw CheckError("grad_check: eps must lie in [1e-6, 1e-4]");

    for (const auto& [name, p] : params) p.node()->value.zero_grad();
    Var loss = objective();
    if (!std::isfinite(loss.item())) throw CheckError("grad_check: objective is not finite");
    backward(loss);

    auto evaluate = [&] {
        NoGradGuard guard;
        const double v = objective().item();
        if (!std::isfinite(v)) throw CheckError("grad_check: objective is not finite under perturbation");
        return v;
    };

    GradCheckReport report;
    for (const auto& [name, p] : params) {
        Tensor& t = p.node()->value;
        const std::vector<double> analytic = t.grad;
        GradCheckEntry entry{name};
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.data[i];
            t.data[i] = saved + opts.eps;
            const double up = evaluate();
            t.data[i] = saved - opts.eps;
            const double down = evaluate();
            t.data[i] = saved;
            const double numeric = (up - down) / (2.0 * opts.eps);
            const double a = analytic.empty() ? 0.0 : analytic[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
            const double rel = std::abs(a - numeric) / denom;
            if (i == 0 || rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    }
    report.passed = report.max_rel_error <= opts.tol;
    for (const auto& [name, p] : params) p.node()->value.zero_grad();
    return report;
}

}  // namespace kdlite::nn

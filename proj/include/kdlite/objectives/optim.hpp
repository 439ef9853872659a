#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kdlite/nn.hpp"

namespace kdlite::objectives {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update. `grads[i]` belongs to `params[i]`. Nothing
// is modified if any gradient is non-finite.
inline void adam_step(const std::vector<std::vector<double>*>& params,
                      const std::vector<const std::vector<double>*>& grads, AdamState& state) {
    if (params.size() != grads.size()) throw DimensionError("adam: params/grads count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i]->size() != params[i]->size()) throw DimensionError("adam: grad size mismatch");
        for (double g : *grads[i]) {
            if (!std::isfinite(g)) {
                throw NumericError("adam: non-finite gradient in parameter " + std::to_string(i) +
                                   ", step aborted");
            }
        }
    }
    if (state.first_moment.empty()) {
        for (const auto* p : params) {
            state.first_moment.emplace_back(p->size(), 0.0);
            state.second_moment.emplace_back(p->size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) throw DimensionError("adam: state/param count mismatch");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(state.beta1, t);
    const double correct2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        const auto& g = *grads[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correct1;
            const double v_hat = v[j] / correct2;
            p[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

// Convenience wrapper over a model's parameter list.
class Adam {
public:
    explicit Adam(nn::NamedParams params, AdamState state = {}) : params_(std::move(params)), state_(std::move(state)) {}

    void zero_grad() {
        for (auto& [name, p] : params_) p.node()->value.zero_grad();
    }

    void step() {
        std::vector<std::vector<double>*> values;
        std::vector<const std::vector<double>*> grads;
        for (auto& [name, p] : params_) {
            values.push_back(&p.node()->value.data);
            grads.push_back(&p.node()->value.grad);
        }
        adam_step(values, grads, state_);
    }

    AdamState& state() { return state_; }
    const AdamState& state() const { return state_; }

private:
    nn::NamedParams params_;
    AdamState state_;
};

struct StepLrState {
    double base_lr = 1e-3;
    double gamma = 0.9;
    std::size_t step_size = 1;
};

// base_lr * gamma^floor(epoch / step_size), epoch counted from 0.
inline double steplr_update(const StepLrState& s, std::size_t epoch) {
    if (s.step_size == 0) throw ConfigError("steplr: step_size must be positive");
    return s.base_lr * std::pow(s.gamma, static_cast<double>(epoch / s.step_size));
}

}  // namespace kdlite::objectives

#pragma once

// Test-only reference computations. Nothing here calls into the library's
// differentiation or layer code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace kdlite::oracle {

// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = f(x);
        x[i] = saved - eps;
        const double down = f(x);
        x[i] = saved;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unrolled scalar LSTM (hidden size 1, input size 1) over a token sequence,
// gate order input, forget, cell, output. wx/wh/b hold the four gate entries.
inline std::vector<double> scalar_lstm(const std::vector<double>& xs, const double wx[4], const double wh[4],
                                       const double b[4]) {
    double h = 0.0, c = 0.0;
    std::vector<double> out;
    for (double x : xs) {
        const double i = sigmoid(wx[0] * x + wh[0] * h + b[0]);
        const double f = sigmoid(wx[1] * x + wh[1] * h + b[1]);
        const double g = std::tanh(wx[2] * x + wh[2] * h + b[2]);
        const double o = sigmoid(wx[3] * x + wh[3] * h + b[3]);
        c = f * c + i * g;
        h = o * std::tanh(c);
        out.push_back(h);
    }
    return out;
}

// Direct attention pooling for one sentence: u_j = tanh(W h_j + b),
// a_j = softmax_j(u_j . u_w), s = sum_j a_j h_j. Row-major W [n x n].
struct AttentionOracle {
    std::vector<double> weights;
    std::vector<double> pooled;
};

inline AttentionOracle attention_oracle(const std::vector<std::vector<double>>& hs, const std::vector<double>& w,
                                        const std::vector<double>& b, const std::vector<double>& uw) {
    const std::size_t n = uw.size();
    std::vector<long double> scores;
    for (const auto& h : hs) {
        long double score = 0.0L;
        for (std::size_t r = 0; r < n; ++r) {
            long double acc = b[r];
            for (std::size_t c = 0; c < n; ++c) acc += static_cast<long double>(w[r * n + c]) * h[c];
            score += std::tanh(acc) * static_cast<long double>(uw[r]);
        }
        scores.push_back(score);
    }
    long double total = 0.0L;
    for (auto s : scores) total += std::exp(s);
    AttentionOracle out{std::vector<double>(hs.size()), std::vector<double>(n, 0.0)};
    for (std::size_t j = 0; j < hs.size(); ++j) {
        out.weights[j] = static_cast<double>(std::exp(scores[j]) / total);
        for (std::size_t c = 0; c < n; ++c) out.pooled[c] += out.weights[j] * hs[j][c];
    }
    return out;
}

}  // namespace kdlite::oracle

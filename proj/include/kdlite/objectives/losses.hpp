#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kdlite/nn.hpp"

namespace kdlite::objectives {

using nn::IntTensor;
using nn::Node;
using nn::Tensor;
using nn::Var;

// Mixing weight between gold-label cross-entropy (alpha) and teacher-logit
// MSE (1 - alpha).
struct DistillWeights {
    double alpha = 0.5;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
};

// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
inline Var cross_entropy(const Var& logits, const IntTensor& labels) {
    if (logits.shape().size() != 2) throw DimensionError("cross_entropy: logits must be [B x C]");
    const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
    if (labels.size() != batch) throw DimensionError("cross_entropy: labels/batch mismatch");
    if (batch == 0) throw DimensionError("cross_entropy: empty batch");
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] < 0 || labels[b] > 1) {
            throw LabelError("cross_entropy: label " + std::to_string(labels[b]) + " not in {0, 1}");
        }
    }
    const auto& z = logits.value().data;
    std::vector<double> probs(batch * classes);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = z.data() + b * classes;
        const double peak = *std::max_element(row, row + classes);
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - peak);
        const double log_norm = peak + std::log(s);
        for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - log_norm);
        total += log_norm - row[labels[b]];
    }
    return nn::make_result("cross_entropy", Tensor::scalar(total / static_cast<double>(batch)), {logits},
                           [batch, classes, probs = std::move(probs), labels = labels.data](Node& self) {
                               auto* dz = nn::parent_grad(self, 0);
                               if (!dz) return;
                               const double g = self.value.grad[0] / static_cast<double>(batch);
                               for (std::size_t b = 0; b < batch; ++b) {
                                   for (std::size_t c = 0; c < classes; ++c) {
                                       const double target = static_cast<std::int64_t>(c) == labels[b] ? 1.0 : 0.0;
                                       (*dz)[b * classes + c] += g * (probs[b * classes + c] - target);
                                   }
                               }
                           });
}

// Mean over every element of (student - teacher)^2. Teacher is a constant.
inline Var mse_logits(const Var& student, const Tensor& teacher) {
    if (student.shape() != teacher.shape) {
        throw DimensionError("mse_logits: student " + nn::to_string(student.shape()) + " vs teacher " +
                                 nn::to_string(teacher.shape));
    }
    const std::size_t n = student.size();
    if (n == 0) throw DimensionError("mse_logits: empty input");
    std::vector<double> diff(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = student.value().data[i] - teacher.data[i];
        total += diff[i] * diff[i];
    }
    return nn::make_result("mse_logits", Tensor::scalar(total / static_cast<double>(n)), {student},
                           [n, diff = std::move(diff)](Node& self) {
                               auto* ds = nn::parent_grad(self, 0);
                               if (!ds) return;
                               const double g = 2.0 * self.value.grad[0] / static_cast<double>(n);
                               for (std::size_t i = 0; i < n; ++i) (*ds)[i] += g * diff[i];
                           });
}

inline Var distill_loss(const Var& logits, const IntTensor& labels, const Tensor& teacher_logits,
                        DistillWeights w) {
    w.validate();
    if (teacher_logits.shape.empty() || teacher_logits.shape[0] != labels.size()) {
        throw CacheError("distill_loss: teacher logits missing for part of the batch");
    }
    return nn::add(nn::scale(cross_entropy(logits, labels), w.alpha),
                   nn::scale(mse_logits(logits, teacher_logits), 1.0 - w.alpha));
}

}  // namespace kdlite::objectives

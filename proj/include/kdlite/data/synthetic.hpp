#pragma once

#include <string>
#include <vector>

#include "kdlite/data/dataset.hpp"
#include "kdlite/data/logit_cache.hpp"
#include "kdlite/nn/rng.hpp"

namespace kdlite::data {

struct SyntheticTeacherOptions {
    double quality = 1.0;  // probability that argmax(logits) equals the gold label
    double margin_min = 2.0;
    double margin_max = 6.0;
};

// Stand-in teacher for runs without a fine-tuned transformer. Per example, in
// order: one uniform draw decides agreement (u < quality), a second draws the
// margin m ~ U[margin_min, margin_max). The predicted class gets +m/2 and the
// other class -m/2.
inline std::vector<LogitRecord> synthetic_teacher(const std::string& split,
                                                  const std::vector<TokenizedExample>& examples,
                                                  const SyntheticTeacherOptions& opts, nn::Rng& rng) {
    if (!(opts.quality >= 0.5 && opts.quality <= 1.0)) {
        throw ConfigError("synthetic teacher: quality must lie in [0.5, 1.0]");
    }
    if (!(opts.margin_min >= 0.0 && opts.margin_max >= opts.margin_min)) {
        throw ConfigError("synthetic teacher: margin range must satisfy 0 <= min <= max");
    }
    std::vector<LogitRecord> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const bool agree = rng.uniform() < opts.quality;
        const double margin = rng.uniform(opts.margin_min, opts.margin_max);
        const int predicted = agree ? ex.label : 1 - ex.label;
        LogitRecord r{split, ex.example_id, {}};
        r.logits[static_cast<std::size_t>(predicted)] = margin / 2.0;
        r.logits[static_cast<std::size_t>(1 - predicted)] = -margin / 2.0;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace kdlite::data

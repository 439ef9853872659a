#pragma once

// Synthetic sentiment corpora for tests and the acceptance binary.

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kdlite/data/dataset.hpp"
#include "kdlite/nn/rng.hpp"

namespace kdlite::toy {

inline const std::array<const char*, 6> kPositive{"good", "great", "superb", "lovely", "moving", "fun"};
inline const std::array<const char*, 6> kNegative{"bad", "dull", "awful", "boring", "weak", "flat"};
inline const std::array<const char*, 16> kFiller{"the", "a", "film", "movie", "plot", "cast", "it", "is",
                                                 "and", "of", "story", "scene", "this", "very", "with", "was"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& words, nn::Rng& rng) {
    return words[rng.below(N)];
}

// Every sentence carries at least one word from its class lexicon and none
// from the other, so a bag-of-words indicator separates the classes.
inline std::vector<data::RawRecord> separable_corpus(std::size_t n, nn::Rng& rng) {
    std::vector<data::RawRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const std::size_t len = 3 + rng.below(6);
        const std::size_t cue = rng.below(len);
        std::string s;
        for (std::size_t t = 0; t < len; ++t) {
            if (t) s += ' ';
            s += t == cue ? (label ? pick(kPositive, rng) : pick(kNegative, rng)) : pick(kFiller, rng);
        }
        out.push_back({s, label});
    }
    return out;
}

// Sentences whose words lean towards the gold class (cue words appear with
// probability `signal` from the gold lexicon and `signal / 3` from the other).
inline std::vector<data::RawRecord> weak_signal_corpus(std::size_t n, double signal, nn::Rng& rng) {
    std::vector<data::RawRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = rng.below(2) ? 1 : 0;
        const std::size_t len = 6 + rng.below(7);
        std::string s;
        for (std::size_t t = 0; t < len; ++t) {
            if (t) s += ' ';
            const double u = rng.uniform();
            const bool gold_cue = u < signal, other_cue = !gold_cue && u < signal * 4.0 / 3.0;
            if (gold_cue || other_cue) {
                const bool positive = (label == 1) == gold_cue;
                s += positive ? pick(kPositive, rng) : pick(kNegative, rng);
            } else {
                s += pick(kFiller, rng);
            }
        }
        out.push_back({s, label});
    }
    return out;
}

// Flips each label independently with probability `rate`.
inline std::vector<data::RawRecord> with_label_noise(std::vector<data::RawRecord> recs, double rate, nn::Rng& rng) {
    for (auto& r : recs) {
        if (rng.uniform() < rate) r.label = 1 - r.label;
    }
    return recs;
}

inline void write_tsv(const std::filesystem::path& path, const std::vector<data::RawRecord>& recs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "sentence\tlabel\n";
    for (const auto& r : recs) out << r.sentence << '\t' << r.label << '\n';
}

// Writes train/dev/test TSVs into `dir`, creating it if needed.
inline void write_corpus_dir(const std::filesystem::path& dir, const std::vector<data::RawRecord>& train,
                             const std::vector<data::RawRecord>& dev, const std::vector<data::RawRecord>& test) {
    std::filesystem::create_directories(dir);
    write_tsv(dir / "train.tsv", train);
    write_tsv(dir / "dev.tsv", dev);
    write_tsv(dir / "test.tsv", test);
}

}  // namespace kdlite::toy

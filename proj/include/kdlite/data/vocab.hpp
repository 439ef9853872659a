#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kdlite/data/text.hpp"
#include "kdlite/nn/errors.hpp"

namespace kdlite::data {

inline constexpr std::int64_t kPadId = 0;
inline constexpr std::int64_t kUnkId = 1;

class Vocabulary {
public:
    Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

    // `tokens` excludes PAD and UNK, which always take ids 0 and 1.
    explicit Vocabulary(const std::vector<std::string>& tokens) {
        tokens_.emplace_back(kPadToken);
        tokens_.emplace_back(kUnkToken);
        for (const auto& t : tokens) tokens_.push_back(t);
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], static_cast<std::int64_t>(i)).second) {
                throw VocabError("vocabulary: duplicate token '" + tokens_[i] + "'");
            }
        }
    }

    std::size_t size() const noexcept { return tokens_.size(); }

    std::int64_t lookup(std::string_view token) const {
        const auto it = index_.find(std::string(token));
        return it == index_.end() ? kUnkId : it->second;
    }

    const std::string& token(std::int64_t id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
            throw VocabError("vocabulary: id " + std::to_string(id) + " out of range");
        }
        return tokens_[static_cast<std::size_t>(id)];
    }

    // Every token in id order, PAD and UNK included.
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    // Inverse of tokens(): expects PAD and UNK in the first two slots.
    static Vocabulary from_tokens(const std::vector<std::string>& all) {
        if (all.size() < 2 || all[0] != kPadToken || all[1] != kUnkToken) {
            throw VocabError("vocabulary: serialized form must start with <PAD>, <UNK>");
        }
        return Vocabulary(std::vector<std::string>(all.begin() + 2, all.end()));
    }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int64_t> index_;
};

// Ids follow descending frequency, ties broken lexicographically.
template <typename Sentences>
Vocabulary build_vocab(const Sentences& sentences, std::size_t min_freq = 1, std::size_t max_tokens = kMaxTokens) {
    std::map<std::string, std::size_t> counts;
    std::size_t seen = 0;
    for (const auto& s : sentences) {
        ++seen;
        const Tokens toks = tokenize(std::string_view(s), max_tokens);
        if (toks.degenerate) continue;
        for (const auto& t : toks.tokens) {
            if (t == kPadToken || t == kUnkToken) continue;
            ++counts[t];
        }
    }
    if (seen == 0) throw VocabError("build_vocab: empty corpus");
    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [tok, n] : counts) {
        if (n >= min_freq) ranked.emplace_back(tok, n);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens;
    tokens.reserve(ranked.size());
    for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
    return Vocabulary(tokens);
}

}  // namespace kdlite::data

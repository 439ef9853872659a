#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kdlite/data/text.hpp"
#include "kdlite/data/vocab.hpp"
#include "kdlite/nn/errors.hpp"
#include "kdlite/nn/rng.hpp"
#include "kdlite/nn/tensor.hpp"

namespace kdlite::data {

struct RawRecord {
    std::string sentence;
    int label = 0;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return cols;
}

}  // namespace detail

// Parses a `sentence<TAB>label` file with a header row. Columns are located
// by header name, so extra columns (e.g. an index) are tolerated.
inline std::vector<RawRecord> parse_split(std::istream& in, const std::string& split_tag = "") {
    const std::string where = split_tag.empty() ? "tsv" : "tsv[" + split_tag + "]";
    std::string line;
    if (!std::getline(in, line)) throw ParseError(where + ": missing header row", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_tabs(line);
    std::size_t sentence_col = header.size(), label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "sentence") sentence_col = i;
        if (header[i] == "label") label_col = i;
    }
    if (sentence_col == header.size() || label_col == header.size()) {
        throw ParseError(where + ": header must name 'sentence' and 'label' columns", 1);
    }

    std::vector<RawRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        const auto cols = detail::split_tabs(line);
        if (cols.size() != header.size()) {
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                                 std::to_string(cols.size()),
                             line_no);
        }
        if (!valid_utf8(cols[sentence_col])) throw ParseError(where + ": sentence is not valid UTF-8", line_no);
        const std::string& raw = cols[label_col];
        if (raw == "0" || raw == "1") {
            records.push_back({cols[sentence_col], raw[0] - '0'});
        } else if (raw == "2") {
            throw LabelError(where + ": neutral label 2 on line " + std::to_string(line_no) +
                             " (binary split expected)");
        } else {
            throw LabelError(where + ": label '" + raw + "' on line " + std::to_string(line_no) + " not in {0, 1}");
        }
    }
    return records;
}

inline std::vector<RawRecord> load_split(const std::string& path, const std::string& split_tag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return parse_split(in, split_tag);
}

inline Vocabulary build_vocab(const std::vector<RawRecord>& records, std::size_t min_freq = 1,
                              std::size_t max_tokens = kMaxTokens) {
    std::vector<std::string_view> sentences;
    sentences.reserve(records.size());
    for (const auto& r : records) sentences.emplace_back(r.sentence);
    return build_vocab(sentences, min_freq, max_tokens);
}

struct TokenizedExample {
    std::int64_t example_id = 0;  // 0-based data-row index within its split
    std::vector<std::int64_t> ids;
    int label = 0;
    std::optional<std::array<double, 2>> teacher_logits;
};

inline std::vector<TokenizedExample> encode(const std::vector<RawRecord>& records, const Vocabulary& vocab,
                                            std::size_t max_tokens = kMaxTokens) {
    std::vector<TokenizedExample> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        TokenizedExample ex;
        ex.example_id = static_cast<std::int64_t>(i);
        ex.label = records[i].label;
        for (const auto& t : tokenize(records[i].sentence, max_tokens).tokens) ex.ids.push_back(vocab.lookup(t));
        out.push_back(std::move(ex));
    }
    return out;
}

struct Batch {
    nn::IntTensor ids;    // [B x T], right-padded with kPadId
    nn::BoolTensor mask;  // [B x T]
    nn::IntTensor labels;  // [B]
    std::optional<nn::Tensor> teacher_logits;  // [B x 2], all-or-nothing
    std::vector<std::int64_t> example_ids;

    std::size_t size() const { return labels.size(); }
    std::size_t steps() const { return ids.shape.empty() ? 0 : ids.shape[1]; }
};

inline Batch collate(std::span<const TokenizedExample* const> members, std::size_t min_length) {
    std::size_t steps = std::max<std::size_t>(min_length, 1);
    for (const auto* ex : members) steps = std::max(steps, ex->ids.size());
    const std::size_t rows = members.size();
    Batch batch;
    batch.ids = nn::IntTensor({rows, steps}, kPadId);
    batch.mask = nn::BoolTensor({rows, steps}, 0);
    batch.labels = nn::IntTensor({rows}, 0);
    const bool with_teacher = rows > 0 && members[0]->teacher_logits.has_value();
    if (with_teacher) batch.teacher_logits = nn::Tensor({rows, 2});
    for (std::size_t b = 0; b < rows; ++b) {
        const auto& ex = *members[b];
        if (ex.ids.empty()) throw Error("collate: example " + std::to_string(ex.example_id) + " has no tokens");
        for (std::size_t t = 0; t < ex.ids.size(); ++t) {
            batch.ids[b * steps + t] = ex.ids[t];
            batch.mask[b * steps + t] = 1;
        }
        batch.labels[b] = ex.label;
        batch.example_ids.push_back(ex.example_id);
        if (ex.teacher_logits.has_value() != with_teacher) {
            throw CacheError("collate: teacher logits missing for example id " + std::to_string(ex.example_id));
        }
        if (with_teacher) {
            batch.teacher_logits->data[2 * b] = (*ex.teacher_logits)[0];
            batch.teacher_logits->data[2 * b + 1] = (*ex.teacher_logits)[1];
        }
    }
    return batch;
}

// Splits `examples` into consecutive batches, visiting them in a seeded random
// order when `shuffle` is set. Each batch is padded to its longest member but
// never below `min_length`.
inline std::vector<Batch> make_batches(const std::vector<TokenizedExample>& examples, std::size_t batch_size,
                                       bool shuffle, nn::Rng& rng, std::size_t min_length = 1) {
    if (batch_size == 0) throw ConfigError("make_batches: batch_size must be at least 1");
    std::vector<const TokenizedExample*> order;
    order.reserve(examples.size());
    for (const auto& ex : examples) order.push_back(&ex);
    if (shuffle) rng.shuffle(std::span(order));
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, order.size() - start);
        batches.push_back(collate(std::span(order).subspan(start, n), min_length));
    }
    return batches;
}

}  // namespace kdlite::data

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdlite/data/dataset.hpp"
#include "kdlite/nn/errors.hpp"

namespace kdlite::data {

// One cached teacher output: raw pre-softmax logits for (split, example id).
struct LogitRecord {
    std::string split;
    std::int64_t id = 0;
    std::array<double, 2> logits{};

    bool operator==(const LogitRecord&) const = default;
};

class LogitCache {
public:
    using Key = std::pair<std::string, std::int64_t>;

    void insert(const LogitRecord& r) {
        if (!std::isfinite(r.logits[0]) || !std::isfinite(r.logits[1])) {
            throw CacheError("logit cache: non-finite logits for " + r.split + "/" + std::to_string(r.id));
        }
        if (!entries_.emplace(Key{r.split, r.id}, r.logits).second) {
            throw CacheError("logit cache: duplicate record " + r.split + "/" + std::to_string(r.id));
        }
    }

    bool contains(const std::string& split, std::int64_t id) const { return entries_.count({split, id}) != 0; }

    const std::array<double, 2>& at(const std::string& split, std::int64_t id) const {
        const auto it = entries_.find({split, id});
        if (it == entries_.end()) {
            throw CacheError("logit cache: no teacher logits for split '" + split + "' id " + std::to_string(id));
        }
        return it->second;
    }

    std::size_t size() const { return entries_.size(); }

    std::size_t count(const std::string& split) const {
        std::size_t n = 0;
        for (const auto& [key, v] : entries_) n += key.first == split;
        return n;
    }

    std::vector<std::string> splits() const {
        std::vector<std::string> out;
        for (const auto& [key, v] : entries_) {
            if (out.empty() || out.back() != key.first) out.push_back(key.first);
        }
        return out;
    }

    // Records ordered by (split, id).
    std::vector<LogitRecord> records() const {
        std::vector<LogitRecord> out;
        out.reserve(entries_.size());
        for (const auto& [key, v] : entries_) out.push_back({key.first, key.second, v});
        return out;
    }

    bool operator==(const LogitCache&) const = default;

private:
    std::map<Key, std::array<double, 2>> entries_;
};

// JSON-Lines, one {"split": str, "id": int, "logits": [l0, l1]} per line.
// Doubles are written in shortest round-trip form.
inline void write_logits(std::ostream& out, const std::vector<LogitRecord>& records) {
    for (const auto& r : records) {
        if (!std::isfinite(r.logits[0]) || !std::isfinite(r.logits[1])) {
            throw CacheError("logit cache: refusing to write non-finite logits for id " + std::to_string(r.id));
        }
        nlohmann::ordered_json line;
        line["split"] = r.split;
        line["id"] = r.id;
        line["logits"] = {r.logits[0], r.logits[1]};
        out << line.dump() << '\n';
    }
}

inline LogitCache read_logits(std::istream& in) {
    LogitCache cache;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("logit cache: ") + e.what(), line_no);
        }
        if (!j.is_object() || !j.contains("split") || !j.contains("id") || !j.contains("logits") ||
            !j["split"].is_string() || !j["id"].is_number_integer() || !j["logits"].is_array() ||
            j["logits"].size() != 2 || !j["logits"][0].is_number() || !j["logits"][1].is_number()) {
            throw ParseError("logit cache: expected {\"split\": str, \"id\": int, \"logits\": [num, num]}", line_no);
        }
        LogitRecord r{j["split"].get<std::string>(), j["id"].get<std::int64_t>(),
                      {j["logits"][0].get<double>(), j["logits"][1].get<double>()}};
        if (r.id < 0) throw ParseError("logit cache: negative id", line_no);
        try {
            cache.insert(r);
        } catch (const CacheError& e) {
            throw CacheError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
        }
    }
    return cache;
}

inline void logits_save(const std::string& path, const std::vector<LogitRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    write_logits(out, records);
    if (!out) throw IoError("failed writing " + path);
}

inline LogitCache logits_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_logits(in);
}

struct CoverageIssue {
    std::string split;
    std::string problem;
};

// Compares the cache against the row count of each split: every id in
// [0, rows) must be present and nothing outside that range.
inline std::vector<CoverageIssue> check_coverage(const LogitCache& cache,
                                                 const std::map<std::string, std::size_t>& split_rows) {
    std::vector<CoverageIssue> issues;
    for (const auto& [split, rows] : split_rows) {
        std::size_t missing = 0;
        std::int64_t first_missing = -1;
        for (std::size_t i = 0; i < rows; ++i) {
            if (!cache.contains(split, static_cast<std::int64_t>(i))) {
                if (missing++ == 0) first_missing = static_cast<std::int64_t>(i);
            }
        }
        if (missing) {
            issues.push_back({split, std::to_string(missing) + " of " + std::to_string(rows) +
                                         " ids missing (first: " + std::to_string(first_missing) + ")"});
        }
        const std::size_t present = cache.count(split);
        if (present + missing > rows) {
            issues.push_back({split, std::to_string(present + missing - rows) + " ids beyond the " +
                                         std::to_string(rows) + " rows of the split"});
        }
    }
    for (const auto& split : cache.splits()) {
        if (!split_rows.count(split)) issues.push_back({split, "split not present in the data directory"});
    }
    return issues;
}

// Attaches teacher logits to every example of `split`, failing on the first gap.
inline void attach_teacher(std::vector<TokenizedExample>& examples, const LogitCache& cache, const std::string& split) {
    for (auto& ex : examples) ex.teacher_logits = cache.at(split, ex.example_id);
}

}  // namespace kdlite::data

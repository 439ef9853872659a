#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kdlite::data {

inline constexpr std::size_t kMaxTokens = 128;
inline constexpr std::string_view kPadToken = "<PAD>";
inline constexpr std::string_view kUnkToken = "<UNK>";

namespace detail {

// Decodes one UTF-8 code point at `pos`; nullopt on malformed input.
inline std::optional<std::uint32_t> decode_utf8(std::string_view s, std::size_t pos, std::size_t& width) {
    const auto lead = static_cast<unsigned char>(s[pos]);
    std::uint32_t cp = 0;
    if (lead < 0x80) {
        width = 1;
        return lead;
    } else if ((lead >> 5) == 0x6) {
        width = 2;
        cp = lead & 0x1f;
    } else if ((lead >> 4) == 0xe) {
        width = 3;
        cp = lead & 0x0f;
    } else if ((lead >> 3) == 0x1e) {
        width = 4;
        cp = lead & 0x07;
    } else {
        return std::nullopt;
    }
    if (pos + width > s.size()) return std::nullopt;
    for (std::size_t i = 1; i < width; ++i) {
        const auto cont = static_cast<unsigned char>(s[pos + i]);
        if ((cont >> 6) != 0x2) return std::nullopt;
        cp = (cp << 6) | (cont & 0x3f);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    static constexpr std::uint32_t min_for_width[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_width[width] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return std::nullopt;
    return cp;
}

inline bool is_unicode_space(std::uint32_t cp) {
    return (cp >= 0x09 && cp <= 0x0d) || cp == 0x20 || cp == 0x85 || cp == 0xa0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200a) || cp == 0x2028 || cp == 0x2029 || cp == 0x202f || cp == 0x205f ||
           cp == 0x3000;
}

}  // namespace detail

inline bool valid_utf8(std::string_view s) {
    for (std::size_t pos = 0; pos < s.size();) {
        std::size_t width = 0;
        if (!detail::decode_utf8(s, pos, width)) return false;
        pos += width;
    }
    return true;
}

struct Tokens {
    std::vector<std::string> tokens;
    bool degenerate = false;  // input had no tokens; `tokens` is the single UNK marker
};

// Lowercases ASCII letters, splits on Unicode whitespace and keeps at most
// `max_tokens` tokens. Malformed UTF-8 bytes are kept verbatim.
inline Tokens tokenize(std::string_view sentence, std::size_t max_tokens = kMaxTokens) {
    Tokens out;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && out.tokens.size() < max_tokens) out.tokens.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t pos = 0; pos < sentence.size();) {
        std::size_t width = 1;
        const auto cp = detail::decode_utf8(sentence, pos, width);
        if (!cp) width = 1;
        if (cp && detail::is_unicode_space(*cp)) {
            flush();
        } else if (width == 1) {
            char c = sentence[pos];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            current.push_back(c);
        } else {
            current.append(sentence.substr(pos, width));
        }
        pos += width;
    }
    flush();
    if (out.tokens.empty()) {
        out.tokens.emplace_back(kUnkToken);
        out.degenerate = true;
    }
    return out;
}

}  // namespace kdlite::data

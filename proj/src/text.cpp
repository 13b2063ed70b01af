#include "evex/text.hpp"

#include <array>
#include <cctype>

namespace evex::text {

namespace {

inline bool is_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

inline std::size_t sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;  // malformed lead byte, treat as a lone scalar
}

}  // namespace

std::size_t char_length(std::string_view utf8) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < utf8.size();) {
        std::size_t len = sequence_length(static_cast<unsigned char>(utf8[i]));
        if (i + len > utf8.size()) len = 1;
        i += len;
        ++n;
    }
    return n;
}

std::vector<std::size_t> char_to_byte_index(std::string_view utf8) {
    std::vector<std::size_t> index;
    index.reserve(utf8.size() + 1);
    for (std::size_t i = 0; i < utf8.size();) {
        index.push_back(i);
        std::size_t len = sequence_length(static_cast<unsigned char>(utf8[i]));
        if (i + len > utf8.size()) len = 1;
        i += len;
    }
    index.push_back(utf8.size());
    return index;
}

char32_t decode_scalar(std::string_view utf8, std::size_t& pos) {
    unsigned char lead = static_cast<unsigned char>(utf8[pos]);
    std::size_t len = sequence_length(lead);
    if (pos + len > utf8.size()) len = 1;
    char32_t cp = 0;
    switch (len) {
        case 1:
            cp = lead;
            break;
        case 2:
            cp = lead & 0x1F;
            break;
        case 3:
            cp = lead & 0x0F;
            break;
        default:
            cp = lead & 0x07;
            break;
    }
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char b = static_cast<unsigned char>(utf8[pos + i]);
        if (!is_continuation(b)) {
            pos += 1;
            return lead;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += len;
    return cp;
}

bool is_ascii_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

std::size_t count_words(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char ch : s) {
        bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string normalize_word(std::string_view w) {
    std::size_t begin = 0;
    std::size_t end = w.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(w[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(w[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(w[i]))));
    }
    return out;
}

bool is_stopword(std::string_view w) {
    static const std::array<std::string_view, 24> kStopwords = {
        "the", "a",  "an",  "and", "or",   "of",   "to",   "in",
        "on",  "at", "is",  "was", "are",  "were", "be",   "with",
        "for", "as", "by",  "it",  "its",  "this", "that", "from",
    };
    for (auto s : kStopwords) {
        if (s == w) return true;
    }
    return false;
}

}  // namespace evex::text

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evex::text {

// Number of unicode scalar values in a UTF-8 string. Malformed bytes count
// as one scalar each so indices stay total.
std::size_t char_length(std::string_view utf8);

// Byte offset of each char index, plus a final entry equal to the byte
// length. Size is char_length(utf8) + 1.
std::vector<std::size_t> char_to_byte_index(std::string_view utf8);

// Decodes the scalar starting at byte `pos`; advances `pos` past it.
// Malformed sequences yield the raw byte value.
char32_t decode_scalar(std::string_view utf8, std::size_t& pos);

bool is_ascii_space(char32_t c);

// Whitespace-separated tokens of raw text.
std::size_t count_words(std::string_view s);
std::vector<std::string_view> split_words(std::string_view s);

// ASCII lowercase; leading/trailing punctuation stripped. Used for lexical
// matching only, never for stored text.
std::string normalize_word(std::string_view w);

bool is_stopword(std::string_view lowercased);

}  // namespace evex::text

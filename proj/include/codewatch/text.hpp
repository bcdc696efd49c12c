#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace codewatch::text {

// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to
// U+FFFD one byte at a time so every input has a defined length.
std::u32string decode_utf8(std::string_view bytes);

bool is_valid_utf8(std::string_view bytes);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t scalar_count(std::string_view bytes);

// Splits on '\n'; a trailing '\r' on each piece is dropped. An empty input
// yields one empty line, a trailing newline does not add an extra line.
std::vector<std::string> split_lines(std::string_view text);

bool is_blank(std::string_view s);

}  // namespace codewatch::text

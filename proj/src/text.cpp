#include "codewatch/text.hpp"

namespace codewatch::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::u32string decode(std::string_view bytes, bool& all_valid) {
  all_valid = true;
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto lead = static_cast<unsigned char>(bytes[i]);
    std::size_t width = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      width = 1;
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      width = 2;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      width = 3;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      width = 4;
      cp = lead & 0x07;
    }
    bool valid = width != 0 && i + width <= bytes.size();
    for (std::size_t k = 1; valid && k < width; ++k) {
      const auto c = static_cast<unsigned char>(bytes[i + k]);
      if (!is_continuation(c)) {
        valid = false;
      } else {
        cp = (cp << 6) | (c & 0x3F);
      }
    }
    if (valid) {
      // Reject overlong forms, surrogates and out-of-range values.
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      if (cp < kMin[width] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        valid = false;
      }
    }
    if (valid) {
      out.push_back(cp);
      i += width;
    } else {
      out.push_back(kReplacement);
      all_valid = false;
      ++i;
    }
  }
  return out;
}

}  // namespace

std::u32string decode_utf8(std::string_view bytes) {
  bool valid = true;
  return decode(bytes, valid);
}

bool is_valid_utf8(std::string_view bytes) {
  bool valid = true;
  decode(bytes, valid);
  return valid;
}

std::size_t scalar_count(std::string_view bytes) {
  return decode_utf8(bytes).size();
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t begin = 0;
  while (true) {
    const auto nl = text.find('\n', begin);
    auto piece = text.substr(begin, nl == std::string_view::npos ? text.npos : nl - begin);
    if (!piece.empty() && piece.back() == '\r') piece.remove_suffix(1);
    if (nl == std::string_view::npos) {
      if (!piece.empty() || lines.empty()) lines.emplace_back(piece);
      break;
    }
    lines.emplace_back(piece);
    begin = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n' && c != '\f' && c != '\v') {
      return false;
    }
  }
  return true;
}

}  // namespace codewatch::text

#include "probe/tokenize.hpp"

#include <array>
#include <utility>

namespace probe {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string fold_punctuation(std::string_view text) {
  static const std::array<std::pair<std::string_view, std::string_view>, 9> kMap{{
      {"\xE2\x80\x98", "'"},   // left single quote
      {"\xE2\x80\x99", "'"},   // right single quote
      {"\xE2\x80\x9C", "\""},  // left double quote
      {"\xE2\x80\x9D", "\""},  // right double quote
      {"\xE2\x80\x93", "-"},   // en dash
      {"\xE2\x80\x94", "-"},   // em dash
      {"\xE2\x80\xA6", "..."},
      {"\xC2\xA0", " "},       // no-break space
      {"\xE2\x80\x8B", ""},    // zero-width space
  }};
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    bool replaced = false;
    if (static_cast<unsigned char>(text[i]) >= 0x80) {
      for (const auto& [from, to] : kMap) {
        if (text.substr(i, from.size()) == from) {
          out += to;
          i += from.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(text[i++]);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::string folded = fold_punctuation(text);
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : folded) {
    if (is_word_byte(static_cast<unsigned char>(c))) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::string folded = fold_punctuation(text);
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : folded) {
    if (is_space(c)) {
      flush();
    } else if (is_word_byte(static_cast<unsigned char>(c))) {
      cur.push_back(lower(c));
    }
  }
  flush();
  return tokens;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = lower(c);
  return out;
}

std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

}  // namespace probe

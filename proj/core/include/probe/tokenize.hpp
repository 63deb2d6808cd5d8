#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace probe {

/// Maps typographic quotes, apostrophes and dashes to their ASCII forms.
std::string fold_punctuation(std::string_view text);

/// Shared tokenizer for ROUGE and Jaccard: lowercase, split on runs of
/// non-alphanumeric ASCII. Bytes >= 0x80 count as word characters so UTF-8
/// words are kept whole. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

/// Word-frequency tokenizer: whitespace split, lowercase, punctuation removed
/// inside the word ("Here's" -> "heres", "rewrites.xlsx" -> "rewritesxlsx").
std::vector<std::string> word_tokens(std::string_view text);

std::string to_lower_ascii(std::string_view text);

std::string trim(std::string_view text);

}  // namespace probe

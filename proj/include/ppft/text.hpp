#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace ppft {

// Shared normalization for synthetic prompts and attack-side metrics:
// ASCII lowercase, punctuation treated as whitespace, whitespace split.
// Bytes >= 0x80 pass through untouched so multi-byte UTF-8 stays intact.
inline std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (c >= 0x80) {
      cur.push_back(static_cast<char>(c));
    } else if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline std::string normalize_text(std::string_view text) {
  std::string out;
  for (const std::string& tok : normalize_tokens(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

// True when `needle` occurs as a contiguous run inside `haystack`.
inline bool contains_token_run(const std::vector<std::string>& haystack,
                               const std::vector<std::string>& needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    bool hit = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (haystack[i + j] != needle[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

}  // namespace ppft

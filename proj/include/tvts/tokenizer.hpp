#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tvts/common.hpp"

namespace tvts::corpus {

// Closed vocabulary over the narration templates plus the three specials.
struct Vocab {
  std::vector<std::string> words;  // id -> word
  std::unordered_map<std::string, int> index;

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  int size() const { return static_cast<int>(words.size()); }
};

Vocab builtin_vocab();

// Whitespace split, lowercase, exact lookup ([UNK] fallback), [CLS] prepended,
// then padded or truncated to max_len.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab, int max_len);
// Inverse on the real-word ids; specials are dropped.
std::string detokenize(const std::vector<int>& ids, const Vocab& vocab);

std::string join_words(const std::vector<std::string>& words);
std::string lowercase(std::string s);

}  // namespace tvts::corpus

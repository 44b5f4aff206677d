#include "tvts/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace tvts::corpus {

namespace {
// Single source of truth for every word the narration templates can emit.
const char* kTemplateWords[] = {
    "the", "it", "is", "at", "near", "now", "still",
    "looks", "keeps", "moving", "moves", "turns", "around", "changes",
    "direction", "bounces", "off",
    "edge", "corner", "center", "left", "right", "top", "bottom",
    "circle", "square", "up", "down",
    "red", "green", "blue", "yellow", "purple", "orange",
};
}  // namespace

Vocab builtin_vocab() {
  Vocab v;
  v.words = {"[PAD]", "[UNK]", "[CLS]"};
  std::vector<std::string> body(std::begin(kTemplateWords), std::end(kTemplateWords));
  std::sort(body.begin(), body.end());
  body.erase(std::unique(body.begin(), body.end()), body.end());
  v.words.insert(v.words.end(), body.begin(), body.end());
  for (int i = 0; i < static_cast<int>(v.words.size()); ++i) v.index[v.words[static_cast<size_t>(i)]] = i;
  return v;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab, int max_len) {
  if (max_len < 1) throw ConfigError("tokenize: max_len must be >= 1");
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(max_len));
  ids.push_back(Vocab::kCls);
  std::istringstream ss(lowercase(text));
  std::string word;
  while (ss >> word && static_cast<int>(ids.size()) < max_len) {
    const auto it = vocab.index.find(word);
    ids.push_back(it == vocab.index.end() ? Vocab::kUnk : it->second);
  }
  ids.resize(static_cast<size_t>(max_len), Vocab::kPad);
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab.size()) throw VocabError("detokenize: id " + std::to_string(id) + " out of range");
    if (id == Vocab::kPad || id == Vocab::kUnk || id == Vocab::kCls) continue;
    if (!out.empty()) out += ' ';
    out += vocab.words[static_cast<size_t>(id)];
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace tvts::corpus

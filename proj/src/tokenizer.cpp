#include "gtr/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

#include "gtr/source_model.hpp"

namespace gtr {
namespace {

constexpr std::array<std::string_view, 5> kSpecials = {"<bos>", "<eos>", "<unk>", "<TYPE>", "<nl>"};

constexpr std::array<std::string_view, 13> kOperators = {"...", "**=", "//=", "->", "==", "!=", "<=",
                                                         ">=",  "**",  "//",  "+=", "-=", ":="};

bool ident_start(unsigned char c) { return c == '_' || std::isalpha(c) || c >= 0x80; }
bool ident_char(unsigned char c) { return ident_start(c) || std::isdigit(c); }

}  // namespace

std::vector<std::string> tokenize_code(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      bool newline = false;
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
        newline = newline || text[i] == '\n';
        ++i;
      }
      if (newline && !out.empty() && out.back() != "<nl>") out.emplace_back("<nl>");
      continue;
    }
    if (text.compare(i, kTypePlaceholder.size(), kTypePlaceholder) == 0) {
      out.emplace_back(kTypePlaceholder);
      i += kTypePlaceholder.size();
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(static_cast<unsigned char>(text[j]))) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    if (std::isdigit(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    bool matched = false;
    for (std::string_view op : kOperators) {
      if (text.compare(i, op.size(), op) == 0) {
        out.emplace_back(op);
        i += op.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.emplace_back(1, text[i++]);
  }
  if (!out.empty() && out.back() == "<nl>") out.pop_back();
  return out;
}

std::string detokenize_type(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.empty()) continue;
    if (!out.empty() && ident_char(static_cast<unsigned char>(out.back())) &&
        ident_char(static_cast<unsigned char>(t.front())))
      out += ' ';
    out += t;
    if (t == ",") out += ' ';
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  for (std::string_view s : kSpecials) {
    index_.emplace(std::string(s), static_cast<int>(tokens_.size()));
    tokens_.emplace_back(s);
  }
  for (const auto& t : tokens) {
    if (index_.count(t)) continue;
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& streams, int min_count,
                             std::size_t max_size) {
  std::unordered_map<std::string, long> counts;
  for (const auto& s : streams)
    for (const auto& t : s) ++counts[t];
  std::vector<std::pair<std::string, long>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_count) continue;
    if (std::find(kSpecials.begin(), kSpecials.end(), tok) != kSpecials.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size > 0) {
    const std::size_t room = max_size > kSpecials.size() ? max_size - kSpecials.size() : 0;
    if (ranked.size() > room) ranked.resize(room);
  }
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocabulary(tokens);
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace gtr

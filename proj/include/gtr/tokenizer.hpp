#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gtr {

// Splits code into identifiers, numbers, operators and single punctuation
// characters. Whitespace runs containing a newline become one `<nl>` token;
// other whitespace is dropped. `<TYPE>` is kept whole.
std::vector<std::string> tokenize_code(std::string_view text);

// Joins type tokens back into type text: commas are followed by one space,
// everything else is glued (two adjacent identifiers keep a separating space).
std::string detokenize_type(const std::vector<std::string>& tokens);

class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kType = 3;
  static constexpr int kNewline = 4;
  static constexpr int kNumSpecial = 5;

  // Specials only.
  Vocabulary();
  // Specials first, then the given tokens in order (duplicates and specials
  // are skipped).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  // Counts tokens over all streams; keeps those seen at least `min_count`
  // times, ordered by frequency descending then text. `max_size` of 0 means
  // no cap (the cap includes the specials).
  static Vocabulary build(const std::vector<std::vector<std::string>>& streams, int min_count = 1,
                          std::size_t max_size = 0);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> ids(const std::vector<std::string>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

}  // namespace gtr

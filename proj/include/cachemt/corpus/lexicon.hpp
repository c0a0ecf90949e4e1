#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cachemt::corpus {

// One translation option: `source` translates to `target`, conditioned on
// `marker` for ambiguous types.
struct LexiconEntry {
  std::string source;
  std::optional<std::string> marker;
  std::string target;
  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

class Lexicon {
 public:
  void add(LexiconEntry entry);

  bool contains(const std::string& source) const { return by_source_.count(source) != 0; }
  bool is_ambiguous(const std::string& source) const;
  bool is_marker(const std::string& token) const { return markers_.count(token) != 0; }
  // Every target the source type may translate to, in insertion order.
  std::vector<std::string> candidates(const std::string& source) const;
  std::optional<std::string> translate(const std::string& source, const std::optional<std::string>& marker) const;

  const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }
  friend bool operator==(const Lexicon& a, const Lexicon& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<LexiconEntry> entries_;
  std::map<std::string, std::vector<std::size_t>> by_source_;
  std::set<std::string> markers_;
};

// "source<TAB>marker<TAB>target" per line; "-" stands for no marker.
Lexicon load_lexicon(const std::string& path);
void save_lexicon(const Lexicon& lexicon, const std::string& path);

}  // namespace cachemt::corpus

#include "cachemt/corpus/lexicon.hpp"

#include <fstream>

#include "cachemt/error.hpp"

namespace cachemt::corpus {

void Lexicon::add(LexiconEntry entry) {
  if (entry.source.empty() || entry.target.empty()) throw ContractError("lexicon entry needs source and target");
  if (entry.marker) {
    if (entry.marker->empty()) throw ContractError("empty lexicon marker");
    markers_.insert(*entry.marker);
  }
  for (std::size_t i : by_source_[entry.source]) {
    if (entries_[i].marker == entry.marker) {
      throw ContractError("duplicate lexicon entry for " + entry.source);
    }
  }
  by_source_[entry.source].push_back(entries_.size());
  entries_.push_back(std::move(entry));
}

bool Lexicon::is_ambiguous(const std::string& source) const {
  auto it = by_source_.find(source);
  return it != by_source_.end() && it->second.size() > 1;
}

std::vector<std::string> Lexicon::candidates(const std::string& source) const {
  std::vector<std::string> out;
  auto it = by_source_.find(source);
  if (it == by_source_.end()) return out;
  for (std::size_t i : it->second) out.push_back(entries_[i].target);
  return out;
}

std::optional<std::string> Lexicon::translate(const std::string& source,
                                              const std::optional<std::string>& marker) const {
  auto it = by_source_.find(source);
  if (it == by_source_.end()) return std::nullopt;
  for (std::size_t i : it->second) {
    if (entries_[i].marker == marker) return entries_[i].target;
  }
  return std::nullopt;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw ParseError(path, lineno, "expected source<TAB>marker<TAB>target");
    }
    LexiconEntry e;
    e.source = line.substr(0, a);
    const std::string marker = line.substr(a + 1, b - a - 1);
    if (marker != "-") e.marker = marker;
    e.target = line.substr(b + 1);
    try {
      lex.add(std::move(e));
    } catch (const ContractError& err) {
      throw ParseError(path, lineno, err.what());
    }
  }
  return lex;
}

void save_lexicon(const Lexicon& lexicon, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : lexicon.entries()) {
    out << e.source << '\t' << (e.marker ? *e.marker : "-") << '\t' << e.target << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace cachemt::corpus

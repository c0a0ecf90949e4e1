#include "cachemt/corpus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "cachemt/error.hpp"

namespace cachemt::corpus {

std::size_t DocumentCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& doc : documents) n += doc.size();
  return n;
}

std::vector<std::vector<Sentence>> DocumentCorpus::source_documents() const {
  std::vector<std::vector<Sentence>> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) {
    auto& d = out.emplace_back();
    for (const auto& pair : doc) d.push_back(pair.source);
  }
  return out;
}

std::vector<std::vector<Sentence>> DocumentCorpus::target_documents() const {
  std::vector<std::vector<Sentence>> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) {
    auto& d = out.emplace_back();
    for (const auto& pair : doc) d.push_back(pair.target);
  }
  return out;
}

Sentence tokenize(const std::string& text) {
  Sentence tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string join(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

// Splits the stream into documents of raw lines, enforcing the blank-line
// rules shared by both file layouts.
template <typename LineFn>
void read_blocks(std::istream& in, const std::string& name, LineFn&& on_line) {
  std::string line;
  std::size_t lineno = 0;
  bool in_document = false;
  std::size_t doc_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      if (!in_document) throw ParseError(name, lineno, "empty document");
      in_document = false;
      ++doc_index;
      continue;
    }
    on_line(doc_index, line, lineno, !in_document);
    in_document = true;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

}  // namespace

DocumentCorpus parse_corpus(std::istream& in, const std::string& name) {
  DocumentCorpus corpus;
  read_blocks(in, name, [&](std::size_t, const std::string& line, std::size_t lineno, bool starts) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(name, lineno, "expected source<TAB>target");
    if (line.find('\t', tab + 1) != std::string::npos) throw ParseError(name, lineno, "more than one tab");
    SentencePair pair{tokenize(line.substr(0, tab)), tokenize(line.substr(tab + 1))};
    if (pair.source.empty()) throw ParseError(name, lineno, "empty source sentence");
    if (pair.target.empty()) throw ParseError(name, lineno, "empty target sentence");
    if (starts) corpus.documents.emplace_back();
    corpus.documents.back().push_back(std::move(pair));
  });
  return corpus;
}

DocumentCorpus load_corpus(const std::string& path) {
  auto in = open_input(path);
  return parse_corpus(in, path);
}

void write_corpus(std::ostream& out, const DocumentCorpus& corpus) {
  for (const auto& doc : corpus.documents) {
    for (const auto& pair : doc) out << join(pair.source) << '\t' << join(pair.target) << '\n';
    out << '\n';
  }
}

void save_corpus(const DocumentCorpus& corpus, const std::string& path) {
  auto out = open_output(path);
  write_corpus(out, corpus);
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::vector<Sentence>> parse_documents(std::istream& in, const std::string& name) {
  std::vector<std::vector<Sentence>> docs;
  read_blocks(in, name, [&](std::size_t, const std::string& line, std::size_t lineno, bool starts) {
    if (line.find('\t') != std::string::npos) throw ParseError(name, lineno, "unexpected tab");
    if (starts) docs.emplace_back();
    docs.back().push_back(tokenize(line));
  });
  return docs;
}

std::vector<std::vector<Sentence>> load_documents(const std::string& path) {
  auto in = open_input(path);
  return parse_documents(in, path);
}

void write_documents(std::ostream& out, const std::vector<std::vector<Sentence>>& docs) {
  for (const auto& doc : docs) {
    for (const auto& s : doc) {
      if (s.empty()) throw ContractError("empty sentences cannot be written in the document format");
      out << join(s) << '\n';
    }
    out << '\n';
  }
}

void save_documents(const std::vector<std::vector<Sentence>>& docs, const std::string& path) {
  auto out = open_output(path);
  write_documents(out, docs);
  if (!out) throw DataError("write failed: " + path);
}

nmt::Vocab build_side_vocab(const std::vector<const Sentence*>& sentences, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const Sentence* s : sentences) {
    for (const auto& tok : *s) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic, so a stable sort by count
  // keeps ties in token order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  nmt::Vocab vocab;
  const std::size_t room = max_size > nmt::kReservedCount ? max_size - nmt::kReservedCount : 0;
  for (std::size_t i = 0; i < ranked.size() && vocab.size() - nmt::kReservedCount < room; ++i) {
    if (!vocab.contains(ranked[i].first)) vocab.add(ranked[i].first);
  }
  return vocab;
}

Vocabularies build_vocab(const DocumentCorpus& corpus, std::size_t max_size) {
  std::vector<const Sentence*> src, tgt;
  for (const auto& doc : corpus.documents) {
    for (const auto& pair : doc) {
      src.push_back(&pair.source);
      tgt.push_back(&pair.target);
    }
  }
  return {build_side_vocab(src, max_size), build_side_vocab(tgt, max_size)};
}

std::vector<EncodedDocument> encode(const DocumentCorpus& corpus, const Vocabularies& vocab) {
  std::vector<EncodedDocument> out;
  out.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    auto& enc = out.emplace_back();
    enc.reserve(doc.size());
    for (const auto& pair : doc) {
      EncodedPair p{vocab.source.encode(pair.source), vocab.target.encode(pair.target)};
      p.target.push_back(nmt::kEos);
      enc.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<std::vector<nmt::WordId>> encode_sources(const std::vector<Sentence>& sentences,
                                                     const nmt::Vocab& vocab) {
  std::vector<std::vector<nmt::WordId>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.encode(s));
  return out;
}

}  // namespace cachemt::corpus

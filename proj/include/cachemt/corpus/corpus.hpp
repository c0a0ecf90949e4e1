#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "cachemt/nmt/vocab.hpp"

namespace cachemt::corpus {

using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence source;
  Sentence target;
  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

using Document = std::vector<SentencePair>;

// Ordered documents of ordered sentence pairs. Document boundaries are kept
// because they define the lifetime of the translation cache.
struct DocumentCorpus {
  std::vector<Document> documents;

  std::size_t sentence_count() const;
  std::vector<std::vector<Sentence>> source_documents() const;
  std::vector<std::vector<Sentence>> target_documents() const;

  friend bool operator==(const DocumentCorpus&, const DocumentCorpus&) = default;
};

// Text format: one "source<TAB>target" pair per line, tokens separated by
// spaces, a single blank line after each document.
DocumentCorpus parse_corpus(std::istream& in, const std::string& name = "<stream>");
DocumentCorpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const DocumentCorpus& corpus);
void save_corpus(const DocumentCorpus& corpus, const std::string& path);

// Same layout with one sentence per line and no tab (translation input and
// output).
std::vector<std::vector<Sentence>> parse_documents(std::istream& in, const std::string& name = "<stream>");
std::vector<std::vector<Sentence>> load_documents(const std::string& path);
void write_documents(std::ostream& out, const std::vector<std::vector<Sentence>>& docs);
void save_documents(const std::vector<std::vector<Sentence>>& docs, const std::string& path);

Sentence tokenize(const std::string& text);
std::string join(const Sentence& tokens);

struct Vocabularies {
  nmt::Vocab source;
  nmt::Vocab target;
};

// Keeps the max_size - 4 most frequent tokens per side (ties broken
// lexicographically); the rest map to UNK. max_size counts the reserved ids.
nmt::Vocab build_side_vocab(const std::vector<const Sentence*>& sentences, std::size_t max_size);
Vocabularies build_vocab(const DocumentCorpus& corpus, std::size_t max_size);

struct EncodedPair {
  std::vector<nmt::WordId> source;
  std::vector<nmt::WordId> target;  // terminated by kEos
};
using EncodedDocument = std::vector<EncodedPair>;

std::vector<EncodedDocument> encode(const DocumentCorpus& corpus, const Vocabularies& vocab);
std::vector<std::vector<nmt::WordId>> encode_sources(const std::vector<Sentence>& sentences, const nmt::Vocab& vocab);

}  // namespace cachemt::corpus

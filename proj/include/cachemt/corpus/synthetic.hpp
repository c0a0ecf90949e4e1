#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cachemt/corpus/corpus.hpp"
#include "cachemt/corpus/lexicon.hpp"

namespace cachemt::corpus {

// Where the sense marker sits relative to the first occurrence of an
// ambiguous word.
enum class MarkerPlacement { Before, After };

std::string to_string(MarkerPlacement p);
MarkerPlacement parse_marker_placement(const std::string& text);

// Document-level testbed. Regular source words translate one-to-one. Each
// ambiguous source word has two senses; a document draws one sense per
// active ambiguous word, announces it once with a marker token next to the
// first occurrence, and repeats the word later without the marker.
struct SynthConfig {
  std::size_t source_vocab = 60;  // regular + ambiguous + marker types
  std::size_t documents = 2000;
  std::size_t sentences_per_document = 6;
  std::size_t min_length = 3;
  std::size_t max_length = 6;
  std::size_t ambiguous_types = 8;
  std::size_t senses = 2;
  std::size_t ambiguous_per_document = 2;
  std::size_t min_later = 1;
  std::size_t max_later = 2;
  MarkerPlacement marker_placement = MarkerPlacement::Before;
  std::uint64_t seed = 1;

  std::size_t regular_types() const;
  // Throws ContractError on inconsistent or too-small settings.
  void validate() const;
};

struct AmbiguousOccurrence {
  std::size_t document = 0;
  std::size_t sentence = 0;
  std::size_t position = 0;  // index in the source sentence (and target)
  std::string source;
  std::size_t sense = 0;
  bool first = false;
};

struct SyntheticCorpus {
  DocumentCorpus corpus;
  Lexicon lexicon;
  std::vector<AmbiguousOccurrence> occurrences;
  // senses[doc] maps each active ambiguous word to its drawn sense.
  std::vector<std::vector<std::pair<std::string, std::size_t>>> senses;
};

// Deterministic in cfg (including the seed). The lexicon depends only on the
// type counts, so corpora generated with different seeds share it.
SyntheticCorpus generate_synthetic(const SynthConfig& cfg);
Lexicon synthetic_lexicon(const SynthConfig& cfg);

// Word-for-word translation of a source document given its sense draws.
Document apply_lexicon(const std::vector<Sentence>& source_doc, const Lexicon& lexicon,
                       const std::vector<std::pair<std::string, std::size_t>>& senses);

}  // namespace cachemt::corpus

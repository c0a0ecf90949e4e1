#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cachemt/corpus/corpus.hpp"
#include "cachemt/corpus/lexicon.hpp"

namespace cachemt::decode {

using corpus::Sentence;

struct BleuOptions {
  bool lowercase = true;
  // Add-one smoothing of the 2- to 4-gram precisions.
  bool smoothing = true;
};

struct BleuResult {
  double score = 0.0;  // in [0, 1]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

// Corpus-level 4-gram BLEU against a single reference per sentence.
BleuResult bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                const BleuOptions& options = {});

struct ConsistencyResult {
  double rate = 1.0;  // consistent / repeated; 1 when nothing repeats
  std::size_t repeated = 0;
  std::size_t consistent = 0;
  std::size_t unknown_tokens = 0;  // source tokens outside the lexicon
};

// Over source types that occur at least twice in a document (markers
// excluded): the type is translated consistently when every sentence that
// contains it yields the same non-empty set of its lexicon translations in
// the corresponding output sentence.
ConsistencyResult consistency_rate(const std::vector<std::vector<Sentence>>& source_docs,
                                   const std::vector<std::vector<Sentence>>& output_docs,
                                   const corpus::Lexicon& lexicon);

struct AmbiguityResult {
  std::size_t first_total = 0;
  std::size_t first_correct = 0;
  std::size_t later_total = 0;
  std::size_t later_correct = 0;

  double first_accuracy() const;
  double later_accuracy() const;
};

// Accuracy on ambiguous source words. An occurrence counts as correct when
// the output sentence contains the reference sense and no other sense of the
// same word. "First" is the first occurrence of the word in its document.
AmbiguityResult ambiguity_accuracy(const corpus::DocumentCorpus& reference,
                                   const std::vector<std::vector<Sentence>>& output_docs,
                                   const corpus::Lexicon& lexicon);

struct Evaluation {
  BleuResult bleu;
  AmbiguityResult ambiguity;
  ConsistencyResult consistency;
};

Evaluation evaluate(const corpus::DocumentCorpus& reference, const std::vector<std::vector<Sentence>>& output_docs,
                    const corpus::Lexicon& lexicon, const BleuOptions& options = {});

}  // namespace cachemt::decode

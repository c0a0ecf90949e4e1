#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cachemt/cache/cache.hpp"
#include "cachemt/corpus/corpus.hpp"
#include "cachemt/decode/beam_search.hpp"
#include "cachemt/nmt/vocab.hpp"

namespace cachemt::decode {

// Matching-probability mass per slot age, where age 0 is the most recently
// written slot. Accumulated over every decoding step that read the cache.
struct PositionHistogram {
  std::vector<double> mass;
  std::size_t steps = 0;

  void add(std::span<const std::size_t> ages, const numeric::Vector& match_probs);
  // Mean mass per step for each age; throws ContractError when empty.
  std::vector<double> normalized() const;
};

// One JSON record per age: {"age": i, "mass": m}. Throws ContractError when
// the histogram is empty.
std::string histogram_report(const PositionHistogram& hist);

struct TranslateOptions {
  BeamOptions beam;
  std::size_t cache_capacity = 25;
  cache::UpdateRule rule = cache::UpdateRule::Average;
  // Default: the cache is cleared at each document start.
  bool persist_across_documents = false;
};

struct DocumentTranslation {
  std::vector<Hypothesis> sentences;
};

// Translates documents sentence by sentence. After each sentence the 1-best
// decoding trace is written to the cache, so later sentences see it.
class DocumentTranslator {
 public:
  DocumentTranslator(const nmt::Model& model, TranslateOptions options);

  DocumentTranslation translate(std::span<const std::vector<WordId>> sources);

  // The steps of translate(), for callers that inspect the cache between
  // sentences: begin_document clears the cache unless it persists, and
  // translate_sentence decodes one sentence and then writes its trace.
  void begin_document();
  Hypothesis translate_sentence(std::span<const WordId> source);

  const cache::Cache& cache() const noexcept { return cache_; }
  const PositionHistogram& histogram() const noexcept { return histogram_; }
  const TranslateOptions& options() const noexcept { return options_; }

 private:
  const nmt::Model& model_;
  TranslateOptions options_;
  cache::Cache cache_;
  PositionHistogram histogram_;
};

struct CorpusTranslation {
  std::vector<std::vector<corpus::Sentence>> documents;
  PositionHistogram histogram;
};

// Encodes, translates document by document and decodes back to tokens.
CorpusTranslation translate_corpus(const nmt::Model& model, const nmt::Vocab& source_vocab,
                                   const nmt::Vocab& target_vocab,
                                   const std::vector<std::vector<corpus::Sentence>>& sources,
                                   const TranslateOptions& options);

}  // namespace cachemt::decode

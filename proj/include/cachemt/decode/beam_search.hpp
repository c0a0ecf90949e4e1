#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cachemt/cache/cache.hpp"
#include "cachemt/cache/fusion.hpp"
#include "cachemt/nmt/decoder_step.hpp"
#include "cachemt/nmt/model.hpp"

namespace cachemt::decode {

using nmt::WordId;

struct BeamOptions {
  std::size_t beam_width = 10;
  std::size_t max_len = 80;  // output tokens including the final EOS
  cache::FusionMode fusion = cache::FusionMode::None;
  // Rank finished hypotheses by log-probability per token instead of the
  // raw sum. Off by default.
  bool length_normalize = false;

  void validate() const;
};

struct Hypothesis {
  std::vector<WordId> tokens;  // ends with kEos
  double log_prob = 0.0;
  // One step per emitted token with context, state, combined state, gate,
  // match distribution and the emitted word.
  std::vector<nmt::DecoderStep> trace;
};

// Beam search over sequences of target words ending in EOS. PAD and BOS are
// never emitted; at position max_len only EOS is allowed. The cache is read
// but never modified.
Hypothesis beam_search(const nmt::Model& model, std::span<const WordId> source, const cache::Cache* cache,
                       const BeamOptions& options);

// Log-probability of a given output under the same scoring as beam_search.
double score_sequence(const nmt::Model& model, std::span<const WordId> source, std::span<const WordId> tokens,
                      const cache::Cache* cache, cache::FusionMode fusion);

}  // namespace cachemt::decode

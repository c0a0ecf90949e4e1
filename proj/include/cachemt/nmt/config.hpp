#pragma once

#include <cstddef>

namespace cachemt::nmt {

// Defaults are full-scale translation settings; small runs override
// the dimensions (see with_dims).
struct ModelConfig {
  std::size_t embedding_dim = 620;
  std::size_t hidden_dim = 1000;   // d: encoder/decoder state width
  std::size_t context_dim = 2000;  // l: attention context width, always 2 * d
  std::size_t cache_capacity = 25;
  std::size_t max_sentence_len = 80;
  std::size_t beam_width = 10;
  double dropout_rate = 0.0;

  static ModelConfig with_dims(std::size_t embedding, std::size_t hidden) {
    ModelConfig c;
    c.embedding_dim = embedding;
    c.hidden_dim = hidden;
    c.context_dim = 2 * hidden;
    return c;
  }

  // The alignment network's hidden width.
  std::size_t attention_dim() const noexcept { return hidden_dim; }

  // Throws ContractError when a field is out of range.
  void validate() const;
};

}  // namespace cachemt::nmt

#include "cachemt/nmt/config.hpp"

#include "cachemt/error.hpp"

namespace cachemt::nmt {

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden_dim == 0) throw ContractError("model dimensions must be positive");
  if (context_dim != 2 * hidden_dim) throw ContractError("context width must be twice the hidden width");
  if (max_sentence_len == 0) throw ContractError("max_sentence_len must be positive");
  if (beam_width == 0) throw ContractError("beam_width must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractError("dropout_rate must be in [0, 1)");
}

}  // namespace cachemt::nmt

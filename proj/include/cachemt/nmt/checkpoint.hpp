#pragma once

#include <string>

#include "cachemt/nmt/config.hpp"
#include "cachemt/nmt/model.hpp"
#include "cachemt/nmt/vocab.hpp"

namespace cachemt::nmt {

inline constexpr const char* kCheckpointMagic = "CACHEMT-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Vocab source_vocab;
  Vocab target_vocab;
  numeric::ParameterStore params;
};

// Layout:
//   CACHEMT-CHECKPOINT 1\n
//   config <n>\n          followed by n "key=value" lines
//   vocab source <n>\n    followed by n token lines (ids 0..n-1)
//   vocab target <n>\n
//   tensors <n>\n
//   then per tensor: "tensor <name> <trainable> <rank> <dims...>\n" and the
//   raw little-endian float64 payload followed by "\n"
//   end\n
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, const Vocab& source, const Vocab& target);
Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cachemt::nmt

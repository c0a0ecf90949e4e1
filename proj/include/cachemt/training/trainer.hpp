#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cachemt/cache/cache.hpp"
#include "cachemt/cache/fusion.hpp"
#include "cachemt/corpus/corpus.hpp"
#include "cachemt/nmt/decoder_step.hpp"
#include "cachemt/nmt/model.hpp"
#include "cachemt/training/optimizer.hpp"

namespace cachemt::training {

using corpus::EncodedDocument;
using corpus::EncodedPair;

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t pretrain_epochs = 15;
  std::size_t finetune_epochs = 5;
  std::size_t batch_size = 80;
  std::size_t max_sentence_len = 80;  // longer training pairs are skipped
  std::uint64_t seed = 1;

  void validate() const;
};

struct FinetuneConfig {
  cache::FusionMode fusion = cache::FusionMode::Deep;
  std::size_t cache_capacity = 25;
  cache::UpdateRule rule = cache::UpdateRule::Average;

  void validate() const;
};

struct EpochRecord {
  std::string pass;  // "pretrain" or "finetune"
  std::size_t epoch = 0;
  double loss = 0.0;         // per-token NLL over the training data
  double tune_metric = 0.0;  // per-token NLL over the tuning data
  std::size_t tokens = 0;
  std::size_t updates = 0;
  bool selected = false;  // best tuning metric so far
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  nmt::Model model;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  std::size_t skipped_pairs = 0;
};

// Teacher-forced decoder states and contexts for one sentence; `word` holds
// the reference token emitted at each step.
std::vector<nmt::DecoderStep> forced_steps(const nmt::Model& model, const EncodedPair& pair);

struct SentenceLoss {
  double loss = 0.0;  // -sum_t log p(y_t)
  std::vector<nmt::DecoderStep> trace;
};

// Negative log-likelihood of a reference pair, reading from `cache` (which is
// not modified) through the given fusion. With a null or empty cache, or
// FusionMode::None, this equals -Model::log_likelihood.
SentenceLoss sentence_nll(const nmt::Model& model, const EncodedPair& pair, const cache::Cache* cache,
                          cache::FusionMode fusion);

// Per-token NLL of the baseline model over all sentences; no gradients.
double corpus_nll(const nmt::Model& model, std::span<const EncodedDocument> docs, std::size_t* tokens = nullptr);

// Summed NLL of the given pairs; accumulates gradients of every "nmt."
// parameter into the model's store.
double pretrain_objective(nmt::Model& model, std::span<const EncodedPair> pairs);

// Fixed representations for fine-tuning, computed once since theta is frozen.
using ForcedDocument = std::vector<std::vector<nmt::DecoderStep>>;
std::vector<ForcedDocument> forced_representations(const nmt::Model& model, std::span<const EncodedDocument> docs);

// Summed NLL of the documents with the cache reset at each document start
// and written after each reference sentence. When `with_gradient` is set the
// gradient of the active fusion parameters is accumulated into the store.
double finetune_objective(nmt::Model& model, const FinetuneConfig& cfg, std::span<const EncodedDocument> docs,
                          std::span<const ForcedDocument> forced, bool with_gradient,
                          std::size_t* tokens = nullptr);

// First pass: NLL training of theta. Attaches (frozen) fusion parameters so
// checkpoints always carry them. Keeps the epoch with the lowest tuning NLL;
// without tuning data the last epoch is kept.
TrainResult pretrain(nmt::Model model, std::span<const EncodedDocument> train,
                     std::span<const EncodedDocument> tune, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

// Second pass: theta frozen, only the parameters of cfg.fusion train.
TrainResult finetune(nmt::Model model, std::span<const EncodedDocument> train,
                     std::span<const EncodedDocument> tune, const FinetuneConfig& fcfg, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

// Freezes everything except the parameter group used by `fusion`.
void freeze_for_finetune(numeric::ParameterStore& params, cache::FusionMode fusion);

}  // namespace cachemt::training

#include "cachemt/training/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "cachemt/error.hpp"
#include "cachemt/numeric/random.hpp"

namespace cachemt::training {

using cache::FusionMode;
using nmt::DecoderStep;
using nmt::WordId;
using numeric::Vector;

void TrainConfig::validate() const {
  optimizer.validate();
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (max_sentence_len == 0) throw ContractError("max_sentence_len must be positive");
}

void FinetuneConfig::validate() const {
  if (fusion == FusionMode::None) throw ContractError("fine-tuning needs a fusion mode other than none");
  if (cache_capacity == 0) throw ContractError("fine-tuning needs a cache with positive capacity");
}

namespace {

void zero_trainable_grads(numeric::ParameterStore& params) {
  for (auto& [name, entry] : params) {
    if (entry.trainable) entry.grad.fill(0.0);
  }
}

void check_finite(double loss, const char* where) {
  if (!std::isfinite(loss)) throw DivergenceError(std::string("non-finite loss during ") + where);
}

// -log p(y_t) for one fused step; optionally accumulates the gradient of the
// active fusion parameters. The decoder state never depends on the fused
// state, so the only path from the fusion parameters to the loss runs
// through the output layer.
double fused_step_loss(nmt::Model& model, FusionMode fusion, const cache::Cache& cache, WordId y_prev,
                       const DecoderStep& forced, bool with_gradient) {
  const cache::FusedOutput fo = cache::fused_output(model, fusion, &cache, y_prev, forced.state, forced.context);
  const double p = fo.probs[forced.word];
  const double loss = -std::log(p);
  if (!with_gradient || fo.memory.size() == 0) return loss;

  auto& params = model.params();
  if (fusion == FusionMode::Deep) {
    Vector dlogits = fo.probs;
    dlogits[forced.word] -= 1.0;
    const Vector d_combined = model.output_state_gradient(dlogits);
    const auto& lam = fo.step.gate;
    const Vector d_pre = (d_combined.array() * (fo.memory - forced.state).array() * lam.array() *
                          (1.0 - lam.array()))
                             .matrix();
    params.grad("cache.U").matrix().noalias() += d_pre * forced.state.transpose();
    params.grad("cache.V").matrix().noalias() += d_pre * forced.context.transpose();
    params.grad("cache.W").matrix().noalias() += d_pre * fo.memory.transpose();
  } else {
    const double lam = fo.shallow_lambda;
    const double d_lambda = -(fo.cache_probs[forced.word] - fo.vocab_probs[forced.word]) / p;
    const double d_pre = d_lambda * lam * (1.0 - lam);
    params.grad("shallow.u").flat() += d_pre * forced.state;
    params.grad("shallow.v").flat() += d_pre * forced.context;
    params.grad("shallow.w").flat() += d_pre * fo.memory;
  }
  return loss;
}

bool fits(const EncodedPair& pair, std::size_t max_len) {
  return !pair.source.empty() && pair.source.size() <= max_len && pair.target.size() <= max_len + 1;
}

}  // namespace

std::vector<DecoderStep> forced_steps(const nmt::Model& model, const EncodedPair& pair) {
  model.check_target(pair.target);
  const nmt::EncoderStates enc = model.encode(pair.source);
  Vector s = model.initial_state(enc);
  std::vector<DecoderStep> steps(pair.target.size());
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    const WordId y_prev = t == 0 ? nmt::kBos : pair.target[t - 1];
    nmt::Attention att = model.attend(s, y_prev, enc);
    s = model.decoder_step(y_prev, s, att.context);
    DecoderStep& step = steps[t];
    step.t = t;
    step.context = std::move(att.context);
    step.state = s;
    step.word = pair.target[t];
  }
  return steps;
}

SentenceLoss sentence_nll(const nmt::Model& model, const EncodedPair& pair, const cache::Cache* cache,
                          FusionMode fusion) {
  SentenceLoss out;
  const auto steps = forced_steps(model, pair);
  out.trace.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const WordId y_prev = t == 0 ? nmt::kBos : pair.target[t - 1];
    cache::FusedOutput fo = cache::fused_output(model, fusion, cache, y_prev, steps[t].state, steps[t].context);
    out.loss -= std::log(fo.probs[steps[t].word]);
    fo.step.t = t;
    fo.step.word = steps[t].word;
    out.trace.push_back(std::move(fo.step));
  }
  return out;
}

double corpus_nll(const nmt::Model& model, std::span<const EncodedDocument> docs, std::size_t* tokens) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& doc : docs) {
    for (const auto& pair : doc) {
      total -= model.log_likelihood(pair.source, pair.target);
      n += pair.target.size();
    }
  }
  if (tokens != nullptr) *tokens = n;
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double pretrain_objective(nmt::Model& model, std::span<const EncodedPair> pairs) {
  double loss = 0.0;
  for (const auto& pair : pairs) {
    const nmt::SentenceTape tape = model.forward(pair.source, pair.target);
    loss -= tape.log_likelihood;
    model.backward(tape);
  }
  return loss;
}

std::vector<ForcedDocument> forced_representations(const nmt::Model& model, std::span<const EncodedDocument> docs) {
  std::vector<ForcedDocument> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    auto& fd = out.emplace_back();
    fd.reserve(doc.size());
    for (const auto& pair : doc) fd.push_back(forced_steps(model, pair));
  }
  return out;
}

double finetune_objective(nmt::Model& model, const FinetuneConfig& cfg, std::span<const EncodedDocument> docs,
                          std::span<const ForcedDocument> forced, bool with_gradient, std::size_t* tokens) {
  cfg.validate();
  if (docs.size() != forced.size()) throw ContractError("forced representations do not match documents");
  const auto& mc = model.config();
  cache::Cache cache(cfg.cache_capacity, mc.context_dim, mc.hidden_dim, cfg.rule);
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    cache.reset();
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const auto& pair = docs[d][i];
      const auto& steps = forced[d][i];
      for (std::size_t t = 0; t < steps.size(); ++t) {
        const WordId y_prev = t == 0 ? nmt::kBos : pair.target[t - 1];
        loss += fused_step_loss(model, cfg.fusion, cache, y_prev, steps[t], with_gradient);
      }
      n += steps.size();
      cache.write(steps);
    }
  }
  if (tokens != nullptr) *tokens = n;
  return loss;
}

void freeze_for_finetune(numeric::ParameterStore& params, FusionMode fusion) {
  params.set_all_trainable(false);
  if (fusion == FusionMode::Deep) params.set_trainable_prefix(cache::kDeepPrefix, true);
  if (fusion == FusionMode::Shallow) params.set_trainable_prefix(cache::kShallowPrefix, true);
}

TrainResult pretrain(nmt::Model model, std::span<const EncodedDocument> train,
                     std::span<const EncodedDocument> tune, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto& mc = model.config();
  cache::attach_parameters(model.params(), mc.hidden_dim, mc.context_dim);
  model.params().set_all_trainable(false);
  model.params().set_trainable_prefix("nmt.", true);

  TrainResult result{model, {}, 0, 0};
  const std::size_t max_len = std::min(cfg.max_sentence_len, mc.max_sentence_len);
  std::vector<const EncodedPair*> pairs;
  for (const auto& doc : train) {
    for (const auto& pair : doc) {
      if (fits(pair, max_len)) {
        pairs.push_back(&pair);
      } else {
        ++result.skipped_pairs;
      }
    }
  }
  if (pairs.empty()) throw DataError("no training pairs within max_sentence_len");

  numeric::Rng rng(cfg.seed);
  Optimizer optimizer(cfg.optimizer);
  const bool dropout = mc.dropout_rate > 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    numeric::shuffle(order, rng);
    double loss = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      zero_trainable_grads(model.params());
      for (std::size_t k = start; k < end; ++k) {
        const EncodedPair& pair = *pairs[order[k]];
        const nmt::SentenceTape tape = model.forward(pair.source, pair.target, dropout ? &rng : nullptr);
        loss -= tape.log_likelihood;
        tokens += pair.target.size();
        model.backward(tape);
      }
      check_finite(loss, "pre-training");
      optimizer.step(model.params(), 1.0 / static_cast<double>(end - start));
    }

    EpochRecord rec;
    rec.pass = "pretrain";
    rec.epoch = epoch;
    rec.loss = loss / static_cast<double>(tokens);
    rec.tokens = tokens;
    rec.updates = optimizer.steps();
    rec.tune_metric = tune.empty() ? rec.loss : corpus_nll(model, tune);
    check_finite(rec.tune_metric, "pre-training evaluation");
    if (tune.empty() || rec.tune_metric < best) {
      best = rec.tune_metric;
      rec.selected = true;
      result.model = model;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (result.best_epoch == 0) result.model = model;
  zero_trainable_grads(result.model.params());
  return result;
}

TrainResult finetune(nmt::Model model, std::span<const EncodedDocument> train,
                     std::span<const EncodedDocument> tune, const FinetuneConfig& fcfg, const TrainConfig& cfg,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  fcfg.validate();
  const auto& mc = model.config();
  cache::attach_parameters(model.params(), mc.hidden_dim, mc.context_dim);
  freeze_for_finetune(model.params(), fcfg.fusion);

  TrainResult result{model, {}, 0, 0};
  const auto forced_train = forced_representations(model, train);
  const auto forced_tune = forced_representations(model, tune);

  Optimizer optimizer(cfg.optimizer);
  double best = std::numeric_limits<double>::infinity();
  cache::Cache cache(fcfg.cache_capacity, mc.context_dim, mc.hidden_dim, fcfg.rule);

  // Documents are visited in corpus order; the cache ties each sentence to
  // its predecessors, so there is nothing to shuffle within a document.
  for (std::size_t epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
    double loss = 0.0;
    std::size_t tokens = 0;
    std::size_t in_batch = 0;
    zero_trainable_grads(model.params());
    auto flush = [&] {
      if (in_batch == 0) return;
      check_finite(loss, "fine-tuning");
      optimizer.step(model.params(), 1.0 / static_cast<double>(in_batch));
      zero_trainable_grads(model.params());
      in_batch = 0;
    };
    for (std::size_t d = 0; d < train.size(); ++d) {
      cache.reset();
      for (std::size_t i = 0; i < train[d].size(); ++i) {
        const auto& pair = train[d][i];
        const auto& steps = forced_train[d][i];
        for (std::size_t t = 0; t < steps.size(); ++t) {
          const WordId y_prev = t == 0 ? nmt::kBos : pair.target[t - 1];
          loss += fused_step_loss(model, fcfg.fusion, cache, y_prev, steps[t], true);
        }
        tokens += steps.size();
        cache.write(steps);
        if (++in_batch == cfg.batch_size) flush();
      }
    }
    flush();

    EpochRecord rec;
    rec.pass = "finetune";
    rec.epoch = epoch;
    rec.loss = tokens == 0 ? 0.0 : loss / static_cast<double>(tokens);
    rec.tokens = tokens;
    rec.updates = optimizer.steps();
    if (tune.empty()) {
      rec.tune_metric = rec.loss;
    } else {
      std::size_t tune_tokens = 0;
      const double tl = finetune_objective(model, fcfg, tune, forced_tune, false, &tune_tokens);
      rec.tune_metric = tl / static_cast<double>(std::max<std::size_t>(tune_tokens, 1));
    }
    check_finite(rec.tune_metric, "fine-tuning evaluation");
    if (tune.empty() || rec.tune_metric < best) {
      best = rec.tune_metric;
      rec.selected = true;
      result.model = model;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (result.best_epoch == 0) result.model = model;
  zero_trainable_grads(result.model.params());
  return result;
}

}  // namespace cachemt::training

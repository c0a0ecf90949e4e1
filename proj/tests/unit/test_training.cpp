#include <gtest/gtest.h>

#include <cmath>

#include "cachemt/cache/fusion.hpp"
#include "cachemt/error.hpp"
#include "cachemt/numeric/gradient_check.hpp"
#include "cachemt/training/optimizer.hpp"
#include "cachemt/training/trainer.hpp"
#include "oracles.hpp"

using namespace cachemt;
using namespace cachemt::training;
using cache::FusionMode;
using nmt::WordId;

namespace {

constexpr std::size_t kSrcVocab = 10;
constexpr std::size_t kTgtVocab = 9;
constexpr std::size_t kHidden = 4;

EncodedPair random_pair(numeric::Rng& rng, std::size_t max_len) {
  EncodedPair p;
  const std::size_t n = 1 + numeric::uniform_index(rng, max_len);
  for (std::size_t i = 0; i < n; ++i) p.source.push_back(static_cast<WordId>(4 + numeric::uniform_index(rng, kSrcVocab - 4)));
  const std::size_t m = 1 + numeric::uniform_index(rng, max_len);
  for (std::size_t i = 0; i < m; ++i) p.target.push_back(static_cast<WordId>(4 + numeric::uniform_index(rng, kTgtVocab - 4)));
  p.target.push_back(nmt::kEos);
  return p;
}

std::vector<EncodedDocument> random_docs(std::uint64_t seed, std::size_t docs, std::size_t sentences) {
  numeric::Rng rng(seed);
  std::vector<EncodedDocument> out(docs);
  for (auto& d : out)
    for (std::size_t s = 0; s < sentences; ++s) d.push_back(random_pair(rng, 4));
  return out;
}

nmt::Model fusion_model(std::uint64_t seed) {
  nmt::Model m = oracle::toy_model(kSrcVocab, kTgtVocab, kHidden, 3, seed, 2.0);
  cache::attach_parameters(m.params(), kHidden, 2 * kHidden);
  numeric::Rng rng(seed + 100);
  for (const char* name : {"cache.U", "cache.V", "cache.W", "shallow.u", "shallow.v", "shallow.w"}) {
    numeric::fill_uniform(m.params().value(name), -0.5, 0.5, rng);
  }
  return m;
}

// Wide initialisation keeps every gate gradient well above the round-off of
// the central difference.
nmt::Model gradient_model(std::uint64_t seed) {
  nmt::Model m = oracle::toy_model(kSrcVocab, kTgtVocab, 8, 5, seed, 10.0);
  cache::attach_parameters(m.params(), 8, 16);
  numeric::Rng rng(seed + 100);
  for (const char* name : {"cache.U", "cache.V", "cache.W", "shallow.u", "shallow.v", "shallow.w"}) {
    numeric::fill_uniform(m.params().value(name), -0.5, 0.5, rng);
  }
  return m;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.optimizer.kind = OptimizerKind::Adam;
  cfg.optimizer.learning_rate = 0.02;
  cfg.optimizer.clip_norm = 5.0;
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(SentenceNll, EmptyCacheEqualsBaselineLikelihood) {
  nmt::Model m = fusion_model(1);
  const auto docs = random_docs(2, 1, 3);
  cache::Cache empty(5, 2 * kHidden, kHidden);
  for (const auto& pair : docs[0]) {
    const double ll = m.log_likelihood(pair.source, pair.target);
    for (FusionMode mode : {FusionMode::None, FusionMode::Deep, FusionMode::Shallow}) {
      EXPECT_EQ(sentence_nll(m, pair, &empty, mode).loss, -ll);
      EXPECT_EQ(sentence_nll(m, pair, nullptr, mode).loss, -ll);
    }
  }
}

TEST(SentenceNll, EosOnlyTarget) {
  nmt::Model m = fusion_model(1);
  EncodedPair pair{{4, 5}, {nmt::kEos}};
  const auto r = sentence_nll(m, pair, nullptr, FusionMode::None);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_GT(r.loss, 0.0);
}

TEST(SentenceNll, CacheDoesNotChangeAndTraceMatchesForcedSteps) {
  nmt::Model m = fusion_model(3);
  const auto docs = random_docs(4, 1, 2);
  cache::Cache c(5, 2 * kHidden, kHidden);
  c.write(forced_steps(m, docs[0][0]));
  const auto before = c.ages();
  const auto r = sentence_nll(m, docs[0][1], &c, FusionMode::Deep);
  EXPECT_EQ(c.ages(), before);
  const auto forced = forced_steps(m, docs[0][1]);
  ASSERT_EQ(r.trace.size(), forced.size());
  for (std::size_t t = 0; t < forced.size(); ++t) {
    EXPECT_EQ(r.trace[t].state, forced[t].state);
    EXPECT_EQ(r.trace[t].context, forced[t].context);
    EXPECT_EQ(r.trace[t].word, docs[0][1].target[t]);
  }
  EXPECT_NE(r.loss, sentence_nll(m, docs[0][1], nullptr, FusionMode::None).loss);
}

TEST(FinetuneObjective, DeepGradientMatchesFiniteDifferences) {
  nmt::Model m = gradient_model(7);
  freeze_for_finetune(m.params(), FusionMode::Deep);
  const auto docs = random_docs(8, 2, 3);
  const auto forced = forced_representations(m, docs);
  FinetuneConfig fcfg;
  fcfg.fusion = FusionMode::Deep;
  fcfg.cache_capacity = 3;
  const auto report = numeric::gradient_check(
      [&](numeric::ParameterStore& p) {
        p.zero_grad();
        return finetune_objective(m, fcfg, docs, forced, true);
      },
      m.params(), 1e-5, 1e-4);
  for (const auto& p : report.parameters)
    EXPECT_LE(p.max_rel_error, 1e-4) << p.name << "[" << p.worst_index << "] analytic " << p.worst_analytic
                                     << " numeric " << p.worst_numeric;
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_EQ(report.checked, cache::CacheParameters::count(8, 16));
}

TEST(FinetuneObjective, ShallowGradientMatchesFiniteDifferences) {
  nmt::Model m = gradient_model(9);
  freeze_for_finetune(m.params(), FusionMode::Shallow);
  const auto docs = random_docs(10, 2, 3);
  const auto forced = forced_representations(m, docs);
  FinetuneConfig fcfg;
  fcfg.fusion = FusionMode::Shallow;
  fcfg.cache_capacity = 2;
  const auto report = numeric::gradient_check(
      [&](numeric::ParameterStore& p) {
        p.zero_grad();
        return finetune_objective(m, fcfg, docs, forced, true);
      },
      m.params(), 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_EQ(report.checked, 4u * 8u);
}

TEST(FinetuneObjective, MatchesSentenceNllReplay) {
  nmt::Model m = fusion_model(11);
  const auto docs = random_docs(12, 2, 3);
  const auto forced = forced_representations(m, docs);
  FinetuneConfig fcfg;
  fcfg.cache_capacity = 4;
  double replay = 0.0;
  for (const auto& doc : docs) {
    cache::Cache c(fcfg.cache_capacity, 2 * kHidden, kHidden);
    for (const auto& pair : doc) {
      const auto r = sentence_nll(m, pair, &c, fcfg.fusion);
      replay += r.loss;
      c.write(r.trace);
    }
  }
  EXPECT_NEAR(finetune_objective(m, fcfg, docs, forced, false), replay, 1e-9 * std::abs(replay));
}

TEST(Finetune, FreezesTheBaseModelAndTheOtherGroup) {
  nmt::Model m = fusion_model(13);
  const auto docs = random_docs(14, 3, 3);
  const auto nmt_before = m.params().fingerprint_prefix("nmt.");
  const auto shallow_before = m.params().fingerprint_prefix(cache::kShallowPrefix);
  const auto deep_before = m.params().fingerprint_prefix(cache::kDeepPrefix);
  const auto forced_before = forced_representations(m, docs);
  FinetuneConfig fcfg;
  auto result = finetune(std::move(m), docs, docs, fcfg, small_train_config());
  const auto& params = result.model.params();
  EXPECT_EQ(params.fingerprint_prefix("nmt."), nmt_before);
  EXPECT_EQ(params.fingerprint_prefix(cache::kShallowPrefix), shallow_before);
  EXPECT_NE(params.fingerprint_prefix(cache::kDeepPrefix), deep_before);

  const auto forced_after = forced_representations(result.model, docs);
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (std::size_t s = 0; s < docs[d].size(); ++s)
      for (std::size_t t = 0; t < forced_after[d][s].size(); ++t) {
        ASSERT_EQ(forced_after[d][s][t].state, forced_before[d][s][t].state);
        ASSERT_EQ(forced_after[d][s][t].context, forced_before[d][s][t].context);
      }
}

TEST(Finetune, RejectsNoFusion) {
  FinetuneConfig fcfg;
  fcfg.fusion = FusionMode::None;
  EXPECT_THROW(fcfg.validate(), ContractError);
  fcfg.fusion = FusionMode::Deep;
  fcfg.cache_capacity = 0;
  EXPECT_THROW(fcfg.validate(), ContractError);
}

TEST(Finetune, ReducesTrainingObjective) {
  nmt::Model m = fusion_model(15);
  for (const char* name : {"cache.U", "cache.V", "cache.W"}) m.params().value(name).fill(0.0);
  const auto docs = random_docs(16, 4, 4);
  FinetuneConfig fcfg;
  TrainConfig cfg = small_train_config();
  cfg.finetune_epochs = 5;
  auto result = finetune(m, docs, {}, fcfg, cfg);
  ASSERT_EQ(result.epochs.size(), 5u);
  EXPECT_LT(result.epochs.back().loss, result.epochs.front().loss);
}

TEST(Pretrain, ZeroEpochsReturnsInitialWeights) {
  nmt::Model m = oracle::toy_model(kSrcVocab, kTgtVocab, kHidden, 3, 17);
  const auto before = m.params().fingerprint_prefix("nmt.");
  TrainConfig cfg = small_train_config();
  cfg.pretrain_epochs = 0;
  auto result = pretrain(std::move(m), random_docs(18, 2, 2), {}, cfg);
  EXPECT_EQ(result.model.params().fingerprint_prefix("nmt."), before);
  EXPECT_TRUE(result.epochs.empty());
  EXPECT_EQ(result.best_epoch, 0u);
  EXPECT_TRUE(result.model.params().contains("cache.U"));
}

TEST(Pretrain, DeterministicGivenSeed) {
  const auto docs = random_docs(19, 3, 3);
  auto a = pretrain(oracle::toy_model(kSrcVocab, kTgtVocab, kHidden, 3, 20), docs, docs, small_train_config());
  auto b = pretrain(oracle::toy_model(kSrcVocab, kTgtVocab, kHidden, 3, 20), docs, docs, small_train_config());
  EXPECT_EQ(a.model.params().fingerprint(), b.model.params().fingerprint());
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) EXPECT_EQ(a.epochs[i].loss, b.epochs[i].loss);
}

TEST(Pretrain, MemorizesASinglePair) {
  std::vector<EncodedDocument> docs{{EncodedPair{{4, 5, 6}, {7, 5, 4, nmt::kEos}}}};
  TrainConfig cfg = small_train_config();
  cfg.pretrain_epochs = 150;
  cfg.optimizer.learning_rate = 0.05;
  auto result = pretrain(oracle::toy_model(kSrcVocab, kTgtVocab, 8, 4, 21), docs, {}, cfg);
  const auto& pair = docs[0][0];
  const double per_token = std::exp(result.model.log_likelihood(pair.source, pair.target) / 4.0);
  EXPECT_GT(per_token, 0.9);
}

TEST(Pretrain, SkipsOverlongPairs) {
  TrainConfig cfg = small_train_config();
  cfg.pretrain_epochs = 1;
  cfg.max_sentence_len = 2;
  std::vector<EncodedDocument> docs{{EncodedPair{{4, 5, 6}, {7, nmt::kEos}}, EncodedPair{{4}, {7, nmt::kEos}}}};
  auto result = pretrain(oracle::toy_model(kSrcVocab, kTgtVocab, kHidden, 3, 22), docs, {}, cfg);
  EXPECT_EQ(result.skipped_pairs, 1u);
  EXPECT_EQ(result.epochs.at(0).tokens, 2u);
}

TEST(Optimizer, SgdStepByHand) {
  numeric::ParameterStore store;
  store.add("a", {2});
  store.add("frozen", {1}, false);
  store.value("a")[0] = 1.0;
  store.grad("a")[0] = 0.3;
  store.grad("a")[1] = 0.4;
  store.grad("frozen")[0] = 10.0;
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.clip_norm = 10.0;
  Optimizer opt(cfg);
  EXPECT_DOUBLE_EQ(opt.step(store), 0.5);
  EXPECT_DOUBLE_EQ(store.value("a")[0], 0.97);
  EXPECT_DOUBLE_EQ(store.value("a")[1], -0.04);
  EXPECT_EQ(store.value("frozen")[0], 0.0);
}

TEST(Optimizer, ClipsTheGlobalNorm) {
  numeric::ParameterStore store;
  store.add("a", {2});
  store.grad("a")[0] = 3.0;
  store.grad("a")[1] = 4.0;
  OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.clip_norm = 1.0;
  Optimizer opt(cfg);
  EXPECT_DOUBLE_EQ(opt.step(store), 5.0);
  EXPECT_DOUBLE_EQ(store.value("a")[0], -0.6);
  EXPECT_DOUBLE_EQ(store.value("a")[1], -0.8);
}

TEST(Optimizer, NonFiniteGradientDiverges) {
  numeric::ParameterStore store;
  store.add("a", {1});
  store.grad("a")[0] = std::nan("");
  Optimizer opt(OptimizerConfig{});
  EXPECT_THROW(opt.step(store), DivergenceError);
}

TEST(Optimizer, AdamFirstStepIsLearningRateSized) {
  numeric::ParameterStore store;
  store.add("a", {2});
  store.grad("a")[0] = 0.2;
  store.grad("a")[1] = -0.01;
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Adam;
  cfg.learning_rate = 0.01;
  cfg.epsilon = 1e-12;
  cfg.clip_norm = 100.0;
  Optimizer opt(cfg);
  opt.step(store);
  EXPECT_NEAR(store.value("a")[0], -0.01, 1e-9);
  EXPECT_NEAR(store.value("a")[1], 0.01, 1e-9);
}

TEST(Optimizer, ParseNames) {
  EXPECT_EQ(parse_optimizer("adadelta"), OptimizerKind::Adadelta);
  EXPECT_EQ(to_string(OptimizerKind::Adam), "adam");
  EXPECT_THROW(parse_optimizer("rmsprop"), ContractError);
  OptimizerConfig bad;
  bad.clip_norm = 0.0;
  EXPECT_THROW(bad.validate(), ContractError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cachemt/error.hpp"
#include "cachemt/nmt/checkpoint.hpp"
#include "cachemt/nmt/model.hpp"
#include "cachemt/nmt/vocab.hpp"
#include "cachemt/numeric/gradient_check.hpp"
#include "oracles.hpp"

using namespace cachemt;
using namespace cachemt::nmt;
using numeric::Vector;

namespace {

void zero_all(Model& m) {
  for (auto& [name, entry] : m.params()) entry.value.fill(0.0);
}

Vector iota_vector(Eigen::Index n, double start) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = start + 0.25 * static_cast<double>(i);
  return v;
}

}  // namespace

TEST(Vocab, ReservedIdsAndUnknownFallback) {
  Vocab v;
  EXPECT_EQ(v.size(), kReservedCount);
  EXPECT_EQ(v.token(kEos), "</s>");
  const WordId a = v.add("a");
  EXPECT_EQ(a, 4);
  EXPECT_EQ(v.add("a"), a);
  EXPECT_EQ(v.id("zzz"), kUnk);
  EXPECT_THROW(v.token(99), ContractError);
}

TEST(Vocab, DecodeStopsAtEos) {
  Vocab v;
  const WordId a = v.add("a");
  const WordId b = v.add("b");
  EXPECT_EQ(v.decode(std::vector<WordId>{kBos, a, b, kEos, a}), (std::vector<std::string>{"a", "b"}));
}

TEST(Encoder, SingleTokenGivesOneRow) {
  const Model m = oracle::toy_model(10, 10, 4, 3, 1);
  const auto enc = m.encode(std::vector<WordId>{5});
  EXPECT_EQ(enc.rows.rows(), 1);
  EXPECT_EQ(enc.rows.cols(), 8);
}

TEST(Encoder, Deterministic) {
  const Model m = oracle::toy_model(10, 10, 4, 3, 1);
  const std::vector<WordId> src{4, 5, 6};
  EXPECT_EQ(m.encode(src).rows, m.encode(src).rows);
}

TEST(Encoder, ZeroWeightsGiveZeroStates) {
  Model m = oracle::toy_model(10, 10, 4, 3, 1);
  zero_all(m);
  const auto enc = m.encode(std::vector<WordId>{4, 7, 9, 5});
  EXPECT_EQ(enc.rows.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encoder, RejectsInvalidSources) {
  const Model m = oracle::toy_model(10, 10, 4, 3, 1);
  EXPECT_THROW(m.encode(std::vector<WordId>{}), ContractError);
  EXPECT_THROW(m.encode(std::vector<WordId>{10}), ContractError);
  EXPECT_THROW(m.encode(std::vector<WordId>(81, 4)), ContractError);
}

TEST(Attention, SinglePositionTakesAllMass) {
  const Model m = oracle::toy_model(10, 10, 4, 3, 2);
  const auto enc = m.encode(std::vector<WordId>{6});
  const auto att = m.attend(Vector::Constant(4, 0.3), kBos, enc);
  EXPECT_EQ(att.alpha[0], 1.0);
  EXPECT_TRUE(att.context.isApprox(enc.rows.row(0).transpose(), 1e-15));
}

TEST(Attention, EqualEnergiesAverageRows) {
  EncoderStates enc;
  enc.rows = numeric::RowMatrix(3, 2);
  enc.rows << 1, 2, 3, 4, 5, 9;
  const auto att = Model::attention_from_energies(Vector::Constant(3, 0.7), enc);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(att.alpha[j], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(att.context[0], 3.0, 1e-14);
  EXPECT_NEAR(att.context[1], 5.0, 1e-14);
}

TEST(Attention, HandSetEnergies) {
  EncoderStates enc;
  enc.rows = numeric::RowMatrix(2, 2);
  enc.rows << 4, 0, 0, 8;
  Vector e(2);
  e << std::log(3.0), 0.0;
  const auto att = Model::attention_from_energies(e, enc);
  EXPECT_NEAR(att.alpha[0], 0.75, 1e-15);
  EXPECT_NEAR(att.alpha[1], 0.25, 1e-15);
  EXPECT_NEAR(att.context[0], 3.0, 1e-14);
  EXPECT_NEAR(att.context[1], 2.0, 1e-14);
}

TEST(Decoder, ZeroWeightsHalveTheState) {
  Model m = oracle::toy_model(10, 10, 4, 3, 3);
  zero_all(m);
  const Vector v = iota_vector(4, -0.5);
  const Vector s = m.decoder_step(kBos, v, Vector::Constant(8, 0.2));
  EXPECT_EQ(s.size(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(s[i], 0.5 * v[i]);
}

TEST(Decoder, DeterministicAndShaped) {
  const Model m = oracle::toy_model(10, 12, 5, 3, 3);
  const Vector c = iota_vector(10, 0.1);
  const Vector s = iota_vector(5, -0.2);
  const Vector a = m.decoder_step(7, s, c);
  EXPECT_EQ(a.size(), 5);
  EXPECT_EQ(a, m.decoder_step(7, s, c));
  EXPECT_THROW(m.decoder_step(7, Vector::Zero(4), c), ContractError);
}

TEST(Output, DistributionSumsToOne) {
  const Model m = oracle::toy_model(10, 12, 5, 3, 4, 5.0);
  const Vector p = m.output_distribution(6, iota_vector(5, -1.0), iota_vector(10, 0.3));
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(Output, SingleWordVocabulary) {
  const Model m = oracle::toy_model(10, 1, 3, 2, 4);
  const Vector p = m.output_distribution(0, Vector::Zero(3), Vector::Zero(6));
  ASSERT_EQ(p.size(), 1);
  EXPECT_EQ(p[0], 1.0);
}

TEST(Output, ZeroWeightsGiveUniform) {
  Model m = oracle::toy_model(10, 8, 3, 2, 4);
  zero_all(m);
  const Vector p = m.output_distribution(5, iota_vector(3, 1.0), iota_vector(6, 1.0));
  for (int i = 0; i < 8; ++i) EXPECT_EQ(p[i], 0.125);
}

TEST(Forward, LikelihoodEqualsStepwiseReplay) {
  const Model m = oracle::toy_model(9, 9, 6, 4, 5, 3.0);
  const std::vector<WordId> src{4, 8, 5, 6};
  const std::vector<WordId> tgt{7, 4, 8, kEos};
  const auto tape = m.forward(src, tgt);

  const auto enc = m.encode(src);
  Vector s = m.initial_state(enc);
  double ll = 0.0;
  WordId prev = kBos;
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    const auto att = m.attend(s, prev, enc);
    s = m.decoder_step(prev, s, att.context);
    EXPECT_EQ(s, tape.steps[t].state);
    EXPECT_EQ(att.context, tape.steps[t].context);
    ll += std::log(m.output_distribution(prev, s, att.context)[tgt[t]]);
    prev = tgt[t];
  }
  EXPECT_EQ(ll, tape.log_likelihood);
}

TEST(Forward, TargetMustEndWithEos) {
  const Model m = oracle::toy_model(9, 9, 4, 3, 5);
  EXPECT_THROW(m.forward(std::vector<WordId>{4}, std::vector<WordId>{5}), ContractError);
}

namespace {

using Batch = std::vector<std::pair<std::vector<WordId>, std::vector<WordId>>>;

const Batch kGradBatch{{{4, 9, 5}, {6, 10, 5, kEos}}, {{11, 7}, {8, kEos}}, {{6, 5, 4}, {7, 9, kEos}}};

numeric::LossFunction batch_loss(Model& m, const Batch& batch, std::uint64_t mask_seed = 0) {
  return [&m, &batch, mask_seed](numeric::ParameterStore&) {
    m.params().zero_grad();
    numeric::Rng mask_rng(mask_seed);
    double total = 0.0;
    for (const auto& [src, tgt] : batch) {
      const auto tape = m.forward(src, tgt, mask_seed == 0 ? nullptr : &mask_rng);
      total -= tape.log_likelihood;
      m.backward(tape);
    }
    return total;
  };
}

}  // namespace

// The relative-error floor of 1e-8 sits below the round-off of a central
// difference at eps 1e-5 (about 1e-10 absolute), so the strict check runs on
// a wide initialisation where no gradient entry is vanishingly small.
TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {6, 7}) {
    Model m = oracle::toy_model(12, 11, 8, 5, seed, 14.0);
    const auto report = numeric::gradient_check(batch_loss(m, kGradBatch), m.params(), 1e-5, 1e-4);
    for (const auto& p : report.parameters) {
      EXPECT_LE(p.max_rel_error, 1e-4) << p.name << "[" << p.worst_index << "] analytic " << p.worst_analytic
                                       << " numeric " << p.worst_numeric;
    }
    EXPECT_TRUE(report.passed) << report.max_rel_error;
    EXPECT_EQ(report.checked, m.params().scalar_count());
  }
}

TEST(Backward, MatchesFiniteDifferencesAtDefaultInit) {
  Model m = oracle::toy_model(12, 11, 8, 5, 3);
  auto loss = batch_loss(m, kGradBatch);
  loss(m.params());
  numeric::ParameterStore analytic = m.params();
  for (auto& [name, entry] : m.params()) {
    auto values = entry.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + 1e-5;
      const double plus = loss(m.params());
      values[i] = original - 1e-5;
      const double minus = loss(m.params());
      values[i] = original;
      const double num = (plus - minus) / 2e-5;
      const double a = analytic.grad(name)[i];
      ASSERT_LE(std::abs(a - num), 1e-4 * std::max(std::abs(a), std::abs(num)) + 1e-9) << name << "[" << i << "]";
    }
  }
}

TEST(Backward, DropoutMaskIsDifferentiatedThrough) {
  auto cfg = ModelConfig::with_dims(5, 8);
  cfg.dropout_rate = 0.4;
  Model m(cfg, 12, 11);
  numeric::Rng init(9);
  m.initialize(init);
  for (auto& [name, entry] : m.params()) entry.value.flat() *= 14.0;
  const auto report = numeric::gradient_check(batch_loss(m, kGradBatch, 17), m.params(), 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Model m = oracle::toy_model(9, 7, 4, 3, 8);
  Vocab src, tgt;
  for (int i = 0; i < 5; ++i) src.add("s" + std::to_string(i));
  for (int i = 0; i < 3; ++i) tgt.add("t" + std::to_string(i));
  const auto path = (std::filesystem::temp_directory_path() / "cachemt_test.ckpt").string();
  save_checkpoint(path, make_checkpoint(m, src, tgt));
  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.source_vocab, src);
  EXPECT_EQ(loaded.target_vocab, tgt);
  const Model back = model_from_checkpoint(loaded);
  EXPECT_EQ(back.params().fingerprint(), m.params().fingerprint());
  std::filesystem::remove(path);
}

TEST(Checkpoint, VocabSizeMismatchIsRejected) {
  const Model m = oracle::toy_model(9, 7, 4, 3, 8);
  Vocab small;
  EXPECT_THROW(make_checkpoint(m, small, small), ContractError);
}

TEST(Checkpoint, GarbageIsAParseError) {
  const auto path = (std::filesystem::temp_directory_path() / "cachemt_garbage.ckpt").string();
  {
    std::ofstream out(path);
    out << "CACHEMT-CHECKPOINT 1\nconfig two\n";
  }
  try {
    load_checkpoint(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::filesystem::remove(path);
}

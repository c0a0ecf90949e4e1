#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cachemt/cache/fusion.hpp"
#include "cachemt/corpus/lexicon.hpp"
#include "cachemt/decode/beam_search.hpp"
#include "cachemt/decode/metrics.hpp"
#include "cachemt/decode/translator.hpp"
#include "cachemt/error.hpp"
#include "cachemt/training/trainer.hpp"
#include "oracles.hpp"

using namespace cachemt;
using namespace cachemt::decode;
using cache::FusionMode;
using corpus::Sentence;

namespace {

constexpr std::size_t kHidden = 3;

nmt::Model decode_model(std::size_t tgt_vocab, std::uint64_t seed) {
  nmt::Model m = oracle::toy_model(8, tgt_vocab, kHidden, 2, seed, 12.0);
  cache::attach_parameters(m.params(), kHidden, 2 * kHidden);
  numeric::Rng rng(seed + 1);
  for (const char* name : {"cache.U", "cache.V", "cache.W", "shallow.u", "shallow.v", "shallow.w"}) {
    numeric::fill_uniform(m.params().value(name), -1.0, 1.0, rng);
  }
  return m;
}

cache::Cache filled_cache(const nmt::Model& m, std::uint64_t seed) {
  cache::Cache c(4, 2 * kHidden, kHidden);
  numeric::Rng rng(seed);
  for (int k = 0; k < 3; ++k) {
    numeric::Vector key(2 * kHidden), value(kHidden);
    for (auto& x : key) x = numeric::uniform(rng, -2, 2);
    for (auto& x : value) x = numeric::uniform(rng, -1, 1);
    c.write(key, value, static_cast<nmt::WordId>(4 + k % (m.target_vocab_size() - 4)));
  }
  return c;
}

Sentence words(const std::string& s) { return corpus::tokenize(s); }

}  // namespace

TEST(BeamSearch, WidthOneIsGreedy) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const nmt::Model m = decode_model(7, seed);
    const cache::Cache c = filled_cache(m, seed);
    const std::vector<nmt::WordId> src{4, 5, 6};
    for (FusionMode mode : {FusionMode::None, FusionMode::Deep, FusionMode::Shallow}) {
      BeamOptions opt{1, 5, mode, false};
      const auto hyp = beam_search(m, src, &c, opt);
      const auto ref = oracle::greedy(m, src, &c, mode, 5);
      EXPECT_EQ(hyp.tokens, ref.tokens) << seed;
      EXPECT_EQ(hyp.log_prob, ref.log_prob) << seed;
    }
  }
}

TEST(BeamSearch, ExhaustiveWidthMatchesEnumeration) {
  // Target vocab 6: two ordinary words plus EOS can be emitted.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const nmt::Model m = decode_model(6, seed);
    const cache::Cache c = filled_cache(m, seed);
    const std::vector<nmt::WordId> src{5, 4};
    for (FusionMode mode : {FusionMode::None, FusionMode::Deep, FusionMode::Shallow}) {
      BeamOptions opt{81, 5, mode, false};
      const auto hyp = beam_search(m, src, &c, opt);
      const auto ref = oracle::enumerate_best(m, src, &c, mode, 5);
      EXPECT_EQ(hyp.tokens, ref.tokens) << seed;
      EXPECT_EQ(hyp.log_prob, ref.log_prob) << seed;
    }
  }
}

TEST(BeamSearch, WiderBeamNeverScoresWorse) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const nmt::Model m = decode_model(9, seed);
    const std::vector<nmt::WordId> src{4, 7, 6, 5};
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b <= 8; ++b) {
      const auto hyp = beam_search(m, src, nullptr, BeamOptions{b, 6, FusionMode::None, false});
      EXPECT_GE(hyp.log_prob, prev) << "seed " << seed << " width " << b;
      prev = hyp.log_prob;
    }
  }
}

TEST(BeamSearch, ReplayReproducesScoreAndTrace) {
  const nmt::Model m = decode_model(9, 3);
  const cache::Cache c = filled_cache(m, 3);
  const std::vector<nmt::WordId> src{4, 5, 6, 7};
  for (FusionMode mode : {FusionMode::None, FusionMode::Deep, FusionMode::Shallow}) {
    const auto hyp = beam_search(m, src, &c, BeamOptions{4, 8, mode, false});
    ASSERT_EQ(hyp.trace.size(), hyp.tokens.size());
    EXPECT_EQ(hyp.tokens.back(), nmt::kEos);
    EXPECT_NEAR(score_sequence(m, src, hyp.tokens, &c, mode), hyp.log_prob, 1e-9);
    for (std::size_t t = 0; t < hyp.tokens.size(); ++t) EXPECT_EQ(hyp.trace[t].word, hyp.tokens[t]);
  }
}

TEST(BeamSearch, NeverEmitsPadOrBosAndRespectsMaxLen) {
  nmt::Model m = decode_model(7, 4);
  m.params().value("nmt.out.b")[nmt::kPad] = 40.0;
  m.params().value("nmt.out.b")[nmt::kBos] = 40.0;
  const auto hyp = beam_search(m, std::vector<nmt::WordId>{4}, nullptr, BeamOptions{3, 4, FusionMode::None, false});
  EXPECT_LE(hyp.tokens.size(), 4u);
  for (auto w : hyp.tokens) {
    EXPECT_NE(w, nmt::kPad);
    EXPECT_NE(w, nmt::kBos);
  }
}

TEST(BeamSearch, DegenerateModelRepeatsItsWord) {
  nmt::Model m = decode_model(7, 5);
  m.params().value("nmt.out.b")[5] = 60.0;
  const auto hyp = beam_search(m, std::vector<nmt::WordId>{4, 6}, nullptr, BeamOptions{3, 4, FusionMode::None, false});
  EXPECT_EQ(hyp.tokens, (std::vector<nmt::WordId>{5, 5, 5, nmt::kEos}));
}

TEST(BeamSearch, FusionNoneIgnoresCache) {
  const nmt::Model m = decode_model(9, 6);
  const cache::Cache c = filled_cache(m, 6);
  const cache::Cache empty(4, 2 * kHidden, kHidden);
  const std::vector<nmt::WordId> src{4, 6, 5};
  const auto base = beam_search(m, src, nullptr, BeamOptions{5, 8, FusionMode::None, false});
  for (const cache::Cache* cp : {&c, &empty}) {
    const auto hyp = beam_search(m, src, cp, BeamOptions{5, 8, FusionMode::None, false});
    EXPECT_EQ(hyp.tokens, base.tokens);
    EXPECT_EQ(hyp.log_prob, base.log_prob);
  }
  for (FusionMode mode : {FusionMode::Deep, FusionMode::Shallow}) {
    const auto hyp = beam_search(m, src, &empty, BeamOptions{5, 8, mode, false});
    EXPECT_EQ(hyp.tokens, base.tokens);
    EXPECT_EQ(hyp.log_prob, base.log_prob);
  }
}

TEST(BeamSearch, RejectsBadOptions) {
  const nmt::Model m = decode_model(7, 7);
  EXPECT_THROW(beam_search(m, std::vector<nmt::WordId>{4}, nullptr, BeamOptions{0, 4, FusionMode::None, false}),
               ContractError);
  EXPECT_THROW(beam_search(m, std::vector<nmt::WordId>{4}, nullptr, BeamOptions{2, 0, FusionMode::None, false}),
               ContractError);
}

TEST(Translator, FirstSentenceAndNoFusionMatchIndependentDecoding) {
  const nmt::Model m = decode_model(9, 8);
  const std::vector<std::vector<nmt::WordId>> doc{{4, 5}, {5, 6, 7}, {4, 7}};
  const BeamOptions base_opt{4, 8, FusionMode::None, false};

  TranslateOptions none;
  none.beam = base_opt;
  DocumentTranslator plain(m, none);
  const auto out = plain.translate(doc);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto ref = beam_search(m, doc[i], nullptr, base_opt);
    EXPECT_EQ(out.sentences[i].tokens, ref.tokens);
    EXPECT_EQ(out.sentences[i].log_prob, ref.log_prob);
  }
  EXPECT_TRUE(plain.cache().empty());

  for (std::size_t capacity : {std::size_t{0}, std::size_t{5}}) {
    TranslateOptions deep = none;
    deep.beam.fusion = FusionMode::Deep;
    deep.cache_capacity = capacity;
    DocumentTranslator t(m, deep);
    const auto fused = t.translate(doc);
    EXPECT_EQ(fused.sentences[0].tokens, out.sentences[0].tokens);
    EXPECT_EQ(fused.sentences[0].log_prob, out.sentences[0].log_prob);
    if (capacity == 0) {
      for (std::size_t i = 0; i < doc.size(); ++i) EXPECT_EQ(fused.sentences[i].log_prob, out.sentences[i].log_prob);
    }
  }
}

TEST(Translator, WritesOneBestAndResetsPerDocument) {
  const nmt::Model m = decode_model(9, 9);
  TranslateOptions opt;
  opt.beam = BeamOptions{3, 6, FusionMode::Deep, false};
  opt.cache_capacity = 25;
  DocumentTranslator t(m, opt);
  const std::vector<std::vector<nmt::WordId>> doc{{4, 5}, {6, 7}};
  const auto out = t.translate(doc);

  cache::Cache expected(25, 2 * kHidden, kHidden);
  for (const auto& hyp : out.sentences) expected.write(hyp.trace);
  ASSERT_EQ(t.cache().size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(t.cache().slots()[i].indicator, expected.slots()[i].indicator);
    EXPECT_EQ(t.cache().slots()[i].key, expected.slots()[i].key);
  }

  t.begin_document();
  EXPECT_TRUE(t.cache().empty());

  opt.persist_across_documents = true;
  DocumentTranslator keep(m, opt);
  keep.translate(doc);
  const auto before = keep.cache().size();
  keep.begin_document();
  EXPECT_EQ(keep.cache().size(), before);
}

TEST(Translator, HistogramMassSumsToOnePerStep) {
  const nmt::Model m = decode_model(9, 10);
  TranslateOptions opt;
  opt.beam = BeamOptions{3, 6, FusionMode::Deep, false};
  DocumentTranslator t(m, opt);
  t.translate(std::vector<std::vector<nmt::WordId>>{{4, 5}, {6, 7}, {5, 5, 4}});
  const auto& hist = t.histogram();
  ASSERT_GT(hist.steps, 0u);
  double total = 0.0;
  for (double x : hist.normalized()) total += x;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Histogram, NewestSlotAndUniformCases) {
  PositionHistogram newest;
  const std::vector<std::size_t> ages{2, 0, 1};
  numeric::Vector p(3);
  p << 0.0, 1.0, 0.0;
  newest.add(ages, p);
  newest.add(ages, p);
  EXPECT_EQ(newest.normalized(), (std::vector<double>{1.0, 0.0, 0.0}));

  PositionHistogram flat;
  p << 0.25, 0.25, 0.25;
  numeric::Vector q = numeric::Vector::Constant(4, 0.25);
  flat.add(std::vector<std::size_t>{3, 1, 0, 2}, q);
  for (double x : flat.normalized()) EXPECT_EQ(x, 0.25);

  PositionHistogram empty;
  EXPECT_THROW(empty.normalized(), ContractError);
  EXPECT_THROW(histogram_report(empty), ContractError);
}

TEST(Histogram, ReportIsLineDelimitedJson) {
  PositionHistogram h;
  numeric::Vector p(2);
  p << 0.75, 0.25;
  h.add(std::vector<std::size_t>{0, 1}, p);
  std::istringstream in(histogram_report(h));
  std::string line;
  std::vector<double> masses;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    EXPECT_EQ(rec.at("age").get<std::size_t>(), masses.size());
    masses.push_back(rec.at("mass").get<double>());
  }
  EXPECT_EQ(masses, (std::vector<double>{0.75, 0.25}));
}

TEST(Bleu, IdentityAndZeroOverlap) {
  const std::vector<Sentence> refs{words("the cat sat on the mat"), words("a b c d")};
  EXPECT_EQ(bleu(refs, refs).score, 1.0);
  EXPECT_EQ(bleu(refs, refs, {true, false}).score, 1.0);
  const std::vector<Sentence> none{words("x y z w v u"), words("q r s t")};
  EXPECT_EQ(bleu(none, refs).score, 0.0);
  EXPECT_EQ(bleu(none, refs, {true, false}).score, 0.0);
}

TEST(Bleu, HandCountedExample) {
  const auto r = bleu({words("a b c d e")}, {words("a b c d f")}, {true, false});
  EXPECT_NEAR(r.score, 0.6687, 1e-4);
  EXPECT_NEAR(r.score, std::pow(0.2, 0.25), 1e-12);
  EXPECT_DOUBLE_EQ(r.precisions[0], 0.8);
  EXPECT_DOUBLE_EQ(r.precisions[3], 0.5);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

TEST(Bleu, SmoothingAndBrevity) {
  // p = 5/5, (3+1)/(4+1), (2+1)/(3+1), (1+1)/(2+1); BP = exp(1 - 6/5).
  const auto r = bleu({words("the cat sat on mat")}, {words("the cat sat on the mat")});
  EXPECT_NEAR(r.score, 0.6511126026643228, 1e-12);
  EXPECT_NEAR(r.brevity_penalty, std::exp(-0.2), 1e-15);
}

TEST(Bleu, CaseFoldingAndErrors) {
  EXPECT_EQ(bleu({words("The Cat")}, {words("the cat")}).score, 1.0);
  EXPECT_LT(bleu({words("The Cat")}, {words("the cat")}, {false, true}).score, 1.0);
  EXPECT_THROW(bleu({}, {}), ContractError);
  EXPECT_THROW(bleu({words("a")}, {}), ContractError);
}

namespace {

corpus::Lexicon toy_lexicon() {
  corpus::Lexicon lex;
  lex.add({"s1", std::nullopt, "t1"});
  lex.add({"s2", std::nullopt, "t2"});
  lex.add({"s3", std::nullopt, "t3"});
  lex.add({"m0", std::nullopt, "q0"});
  lex.add({"m1", std::nullopt, "q1"});
  lex.add({"a1", "m0", "b1_0"});
  lex.add({"a1", "m1", "b1_1"});
  return lex;
}

}  // namespace

TEST(Consistency, TwoOfThreeRepeatedTypes) {
  const auto lex = toy_lexicon();
  const std::vector<std::vector<Sentence>> src{{words("s1 s2"), words("s1 a1"), words("s2 a1 s3")}};
  const std::vector<std::vector<Sentence>> out{{words("t1 t2"), words("t1 b1_0"), words("t2 b1_1 t3")}};
  const auto r = consistency_rate(src, out, lex);
  EXPECT_EQ(r.repeated, 3u);
  EXPECT_EQ(r.consistent, 2u);
  EXPECT_DOUBLE_EQ(r.rate, 2.0 / 3.0);
}

TEST(Consistency, AllAndNone) {
  const auto lex = toy_lexicon();
  const std::vector<std::vector<Sentence>> src{{words("a1 s1"), words("a1 s1")}};
  EXPECT_EQ(consistency_rate(src, {{words("b1_0 t1"), words("b1_0 t1")}}, lex).rate, 1.0);
  EXPECT_EQ(consistency_rate(src, {{words("b1_0 t1"), words("b1_1 x")}}, lex).rate, 0.0);
}

TEST(Consistency, MarkersSkippedUnknownsCounted) {
  const auto lex = toy_lexicon();
  const std::vector<std::vector<Sentence>> src{{words("m0 zz"), words("m0 zz")}};
  const auto r = consistency_rate(src, {{words("q0"), words("x")}}, lex);
  EXPECT_EQ(r.repeated, 0u);
  EXPECT_EQ(r.rate, 1.0);
  EXPECT_EQ(r.unknown_tokens, 2u);
  EXPECT_THROW(consistency_rate(src, {}, lex), ContractError);
}

TEST(Ambiguity, FirstAndLaterOccurrences) {
  const auto lex = toy_lexicon();
  corpus::DocumentCorpus ref;
  ref.documents.push_back({
      {words("m1 a1 s1"), words("q1 b1_1 t1")},
      {words("s2 a1"), words("t2 b1_1")},
      {words("a1 s3"), words("b1_1 t3")},
  });
  // First correct; second outputs the wrong sense; third outputs both.
  const std::vector<std::vector<Sentence>> out{{words("q1 b1_1 t1"), words("t2 b1_0"), words("b1_1 b1_0")}};
  const auto r = ambiguity_accuracy(ref, out, lex);
  EXPECT_EQ(r.first_total, 1u);
  EXPECT_EQ(r.first_correct, 1u);
  EXPECT_EQ(r.later_total, 2u);
  EXPECT_EQ(r.later_correct, 0u);
  EXPECT_EQ(r.later_accuracy(), 0.0);
  EXPECT_EQ(r.first_accuracy(), 1.0);

  const auto e = evaluate(ref, ref.target_documents(), lex);
  EXPECT_EQ(e.bleu.score, 1.0);
  EXPECT_EQ(e.ambiguity.later_accuracy(), 1.0);
  EXPECT_EQ(e.consistency.rate, 1.0);
}

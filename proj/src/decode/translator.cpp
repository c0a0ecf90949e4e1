#include "cachemt/decode/translator.hpp"

#include <json.hpp>

#include "cachemt/error.hpp"

namespace cachemt::decode {

void PositionHistogram::add(std::span<const std::size_t> ages, const numeric::Vector& match_probs) {
  if (ages.size() != static_cast<std::size_t>(match_probs.size())) {
    throw ContractError("one age per matching probability is required");
  }
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] >= mass.size()) mass.resize(ages[i] + 1, 0.0);
    mass[ages[i]] += match_probs[static_cast<Eigen::Index>(i)];
  }
  ++steps;
}

std::vector<double> PositionHistogram::normalized() const {
  if (steps == 0) throw ContractError("position histogram is empty: the cache was never read");
  std::vector<double> out(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) out[i] = mass[i] / static_cast<double>(steps);
  return out;
}

std::string histogram_report(const PositionHistogram& hist) {
  std::string out;
  const auto masses = hist.normalized();
  for (std::size_t i = 0; i < masses.size(); ++i) {
    nlohmann::json rec{{"age", i}, {"mass", masses[i]}, {"steps", hist.steps}};
    out += rec.dump() + "\n";
  }
  return out;
}

DocumentTranslator::DocumentTranslator(const nmt::Model& model, TranslateOptions options)
    : model_(model),
      options_(options),
      cache_(options.cache_capacity, model.config().context_dim, model.config().hidden_dim, options.rule) {
  options_.beam.validate();
}

void DocumentTranslator::begin_document() {
  if (!options_.persist_across_documents) cache_.reset();
}

Hypothesis DocumentTranslator::translate_sentence(std::span<const WordId> source) {
  const bool use_cache = options_.beam.fusion != cache::FusionMode::None && cache_.enabled();
  Hypothesis hyp = beam_search(model_, source, use_cache ? &cache_ : nullptr, options_.beam);
  if (use_cache) {
    if (!cache_.empty()) {
      const std::vector<std::size_t> ages = cache_.ages();
      for (const auto& step : hyp.trace) {
        if (step.match.size() != 0) histogram_.add(ages, step.match);
      }
    }
    cache_.write(hyp.trace);
  }
  return hyp;
}

DocumentTranslation DocumentTranslator::translate(std::span<const std::vector<WordId>> sources) {
  begin_document();
  DocumentTranslation out;
  for (const auto& source : sources) out.sentences.push_back(translate_sentence(source));
  return out;
}

CorpusTranslation translate_corpus(const nmt::Model& model, const nmt::Vocab& source_vocab,
                                   const nmt::Vocab& target_vocab,
                                   const std::vector<std::vector<corpus::Sentence>>& sources,
                                   const TranslateOptions& options) {
  DocumentTranslator translator(model, options);
  CorpusTranslation out;
  out.documents.reserve(sources.size());
  for (const auto& doc : sources) {
    const auto encoded = corpus::encode_sources(doc, source_vocab);
    const DocumentTranslation result = translator.translate(encoded);
    auto& words = out.documents.emplace_back();
    for (const auto& hyp : result.sentences) words.push_back(target_vocab.decode(hyp.tokens));
  }
  out.histogram = translator.histogram();
  return out;
}

}  // namespace cachemt::decode

#include "cachemt/corpus/synthetic.hpp"

#include <algorithm>
#include <map>

#include "cachemt/error.hpp"
#include "cachemt/numeric/random.hpp"

namespace cachemt::corpus {

namespace {

std::string regular_source(std::size_t k) { return "s" + std::to_string(k); }
std::string regular_target(std::size_t k) { return "t" + std::to_string(k); }
std::string ambiguous_source(std::size_t k) { return "a" + std::to_string(k); }
std::string ambiguous_target(std::size_t k, std::size_t sense) {
  return "b" + std::to_string(k) + "_" + std::to_string(sense);
}
std::string marker_source(std::size_t sense) { return "m" + std::to_string(sense); }
std::string marker_target(std::size_t sense) { return "q" + std::to_string(sense); }

// Inclusive range draw.
std::size_t draw(numeric::Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + numeric::uniform_index(rng, hi - lo + 1);
}

std::vector<std::size_t> sample_distinct(numeric::Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  numeric::shuffle(all, rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

std::string to_string(MarkerPlacement p) { return p == MarkerPlacement::Before ? "before" : "after"; }

MarkerPlacement parse_marker_placement(const std::string& text) {
  if (text == "before") return MarkerPlacement::Before;
  if (text == "after") return MarkerPlacement::After;
  throw ContractError("marker placement must be before or after, got '" + text + "'");
}

std::size_t SynthConfig::regular_types() const {
  const std::size_t reserved = ambiguous_types + senses;
  return source_vocab > reserved ? source_vocab - reserved : 0;
}

void SynthConfig::validate() const {
  if (regular_types() < 1) {
    throw ContractError("synthetic vocabulary too small: " + std::to_string(source_vocab) +
                        " types cannot hold " + std::to_string(ambiguous_types) + " ambiguous words, " +
                        std::to_string(senses) + " markers and at least one regular word");
  }
  if (senses < 2) throw ContractError("ambiguous words need at least two senses");
  if (documents == 0) throw ContractError("documents must be positive");
  if (sentences_per_document == 0) throw ContractError("sentences_per_document must be positive");
  if (min_length == 0 || min_length > max_length) throw ContractError("need 1 <= min_length <= max_length");
  if (ambiguous_per_document > ambiguous_types) {
    throw ContractError("ambiguous_per_document exceeds ambiguous_types");
  }
  if (min_later > max_later) throw ContractError("min_later exceeds max_later");
  if (ambiguous_per_document > 0 && sentences_per_document < 1 + min_later) {
    throw ContractError("documents too short for the requested later occurrences");
  }
}

Lexicon synthetic_lexicon(const SynthConfig& cfg) {
  cfg.validate();
  Lexicon lex;
  for (std::size_t k = 0; k < cfg.regular_types(); ++k) {
    lex.add({regular_source(k), std::nullopt, regular_target(k)});
  }
  for (std::size_t s = 0; s < cfg.senses; ++s) lex.add({marker_source(s), std::nullopt, marker_target(s)});
  for (std::size_t k = 0; k < cfg.ambiguous_types; ++k) {
    for (std::size_t s = 0; s < cfg.senses; ++s) {
      lex.add({ambiguous_source(k), marker_source(s), ambiguous_target(k, s)});
    }
  }
  return lex;
}

Document apply_lexicon(const std::vector<Sentence>& source_doc, const Lexicon& lexicon,
                       const std::vector<std::pair<std::string, std::size_t>>& senses) {
  std::map<std::string, std::size_t> sense_of(senses.begin(), senses.end());
  Document doc;
  for (const auto& src : source_doc) {
    SentencePair pair{src, {}};
    for (const auto& tok : src) {
      std::optional<std::string> tgt;
      if (lexicon.is_ambiguous(tok)) {
        auto it = sense_of.find(tok);
        if (it == sense_of.end()) throw ContractError("no sense drawn for " + tok);
        tgt = lexicon.translate(tok, marker_source(it->second));
      } else {
        tgt = lexicon.translate(tok, std::nullopt);
      }
      if (!tgt) throw ContractError("token outside lexicon: " + tok);
      pair.target.push_back(*tgt);
    }
    doc.push_back(std::move(pair));
  }
  return doc;
}

SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  SyntheticCorpus out;
  out.lexicon = synthetic_lexicon(cfg);
  numeric::Rng rng(cfg.seed);
  const std::size_t n_sent = cfg.sentences_per_document;

  struct Item {
    std::size_t type;
    bool first;
  };

  for (std::size_t d = 0; d < cfg.documents; ++d) {
    std::vector<std::vector<Item>> plan(n_sent);
    auto& senses = out.senses.emplace_back();
    std::map<std::size_t, std::size_t> sense_of;
    for (std::size_t type : sample_distinct(rng, cfg.ambiguous_types, cfg.ambiguous_per_document)) {
      const std::size_t sense = numeric::uniform_index(rng, cfg.senses);
      sense_of[type] = sense;
      senses.emplace_back(ambiguous_source(type), sense);
      const std::size_t first = draw(rng, 0, n_sent - 1 - cfg.min_later);
      const std::size_t room = n_sent - 1 - first;
      const std::size_t later = draw(rng, cfg.min_later, std::min(cfg.max_later, room));
      plan[first].push_back({type, true});
      for (std::size_t idx : sample_distinct(rng, room, later)) plan[first + 1 + idx].push_back({type, false});
    }

    std::vector<Sentence> source_doc;
    for (std::size_t s = 0; s < n_sent; ++s) {
      // Units keep a marker glued to its ambiguous word while the sentence
      // is shuffled.
      std::vector<std::vector<std::string>> units;
      std::size_t used = 0;
      for (const Item& item : plan[s]) {
        const std::string word = ambiguous_source(item.type);
        if (item.first) {
          const std::string marker = marker_source(sense_of[item.type]);
          if (cfg.marker_placement == MarkerPlacement::Before) {
            units.push_back({marker, word});
          } else {
            units.push_back({word, marker});
          }
          used += 2;
        } else {
          units.push_back({word});
          used += 1;
        }
      }
      const std::size_t length = std::max(draw(rng, cfg.min_length, cfg.max_length), used);
      for (std::size_t i = used; i < length; ++i) {
        units.push_back({regular_source(numeric::uniform_index(rng, cfg.regular_types()))});
      }
      numeric::shuffle(units, rng);
      Sentence sentence;
      for (const auto& u : units) sentence.insert(sentence.end(), u.begin(), u.end());
      source_doc.push_back(std::move(sentence));
    }

    Document doc = apply_lexicon(source_doc, out.lexicon, senses);
    for (std::size_t s = 0; s < doc.size(); ++s) {
      std::map<std::string, Item> planned;
      for (const Item& item : plan[s]) planned.emplace(ambiguous_source(item.type), item);
      const Sentence& src = doc[s].source;
      for (std::size_t j = 0; j < src.size(); ++j) {
        auto it = planned.find(src[j]);
        if (it == planned.end()) continue;
        const Item& item = it->second;
        out.occurrences.push_back({d, s, j, src[j], sense_of[item.type], item.first});
      }
    }
    out.corpus.documents.push_back(std::move(doc));
  }
  return out;
}

}  // namespace cachemt::corpus

#include "cachemt/decode/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "cachemt/error.hpp"

namespace cachemt::decode {
namespace {

constexpr std::size_t kOrder = 4;

Sentence lowered(const Sentence& s) {
  Sentence out = s;
  for (auto& tok : out) {
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) { return std::tolower(c); });
  }
  return out;
}

std::map<Sentence, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Sentence, std::size_t> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
  return counts;
}

void check_aligned(const std::vector<std::vector<Sentence>>& a, const std::vector<std::vector<Sentence>>& b) {
  if (a.size() != b.size()) throw ContractError("document counts differ");
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d].size() != b[d].size()) throw ContractError("sentence counts differ in document " + std::to_string(d));
  }
}

bool contains(const Sentence& s, const std::string& tok) { return std::find(s.begin(), s.end(), tok) != s.end(); }

}  // namespace

BleuResult bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                const BleuOptions& options) {
  if (hypotheses.empty()) throw ContractError("BLEU needs at least one sentence");
  if (hypotheses.size() != references.size()) throw ContractError("BLEU needs one reference per hypothesis");

  std::array<std::size_t, kOrder> matches{};
  std::array<std::size_t, kOrder> totals{};
  BleuResult out;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence hyp = options.lowercase ? lowered(hypotheses[i]) : hypotheses[i];
    const Sentence ref = options.lowercase ? lowered(references[i]) : references[i];
    out.hypothesis_length += hyp.size();
    out.reference_length += ref.size();
    for (std::size_t n = 1; n <= kOrder; ++n) {
      const auto hc = ngram_counts(hyp, n);
      const auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : hc) {
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = out.hypothesis_length == 0;
  for (std::size_t n = 0; n < kOrder; ++n) {
    const bool smooth = options.smoothing && n > 0;
    const double num = static_cast<double>(matches[n]) + (smooth ? 1.0 : 0.0);
    const double den = static_cast<double>(totals[n]) + (smooth ? 1.0 : 0.0);
    out.precisions[n] = den > 0.0 ? num / den : 0.0;
    if (out.precisions[n] <= 0.0) {
      zero = true;
    } else {
      log_sum += std::log(out.precisions[n]);
    }
  }
  const double c = static_cast<double>(out.hypothesis_length);
  const double r = static_cast<double>(out.reference_length);
  out.brevity_penalty = c == 0.0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / static_cast<double>(kOrder));
  return out;
}

ConsistencyResult consistency_rate(const std::vector<std::vector<Sentence>>& source_docs,
                                   const std::vector<std::vector<Sentence>>& output_docs,
                                   const corpus::Lexicon& lexicon) {
  check_aligned(source_docs, output_docs);
  ConsistencyResult out;
  for (std::size_t d = 0; d < source_docs.size(); ++d) {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::vector<std::size_t>> sentences_of;
    for (std::size_t i = 0; i < source_docs[d].size(); ++i) {
      for (const auto& tok : source_docs[d][i]) {
        if (lexicon.is_marker(tok)) continue;
        if (!lexicon.contains(tok)) {
          ++out.unknown_tokens;
          continue;
        }
        ++counts[tok];
        auto& sents = sentences_of[tok];
        if (sents.empty() || sents.back() != i) sents.push_back(i);
      }
    }
    for (const auto& [tok, count] : counts) {
      if (count < 2) continue;
      ++out.repeated;
      const auto candidates = lexicon.candidates(tok);
      std::set<std::set<std::string>> renderings;
      bool any_empty = false;
      for (std::size_t i : sentences_of[tok]) {
        std::set<std::string> found;
        for (const auto& cand : candidates) {
          if (contains(output_docs[d][i], cand)) found.insert(cand);
        }
        any_empty = any_empty || found.empty();
        renderings.insert(std::move(found));
      }
      if (!any_empty && renderings.size() == 1) ++out.consistent;
    }
  }
  if (out.repeated > 0) out.rate = static_cast<double>(out.consistent) / static_cast<double>(out.repeated);
  return out;
}

double AmbiguityResult::first_accuracy() const {
  return first_total == 0 ? 0.0 : static_cast<double>(first_correct) / static_cast<double>(first_total);
}

double AmbiguityResult::later_accuracy() const {
  return later_total == 0 ? 0.0 : static_cast<double>(later_correct) / static_cast<double>(later_total);
}

AmbiguityResult ambiguity_accuracy(const corpus::DocumentCorpus& reference,
                                   const std::vector<std::vector<Sentence>>& output_docs,
                                   const corpus::Lexicon& lexicon) {
  check_aligned(reference.source_documents(), output_docs);
  AmbiguityResult out;
  for (std::size_t d = 0; d < reference.documents.size(); ++d) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < reference.documents[d].size(); ++i) {
      const auto& pair = reference.documents[d][i];
      if (pair.source.size() != pair.target.size()) {
        throw ContractError("ambiguity accuracy needs word-for-word references");
      }
      for (std::size_t j = 0; j < pair.source.size(); ++j) {
        const std::string& tok = pair.source[j];
        if (!lexicon.is_ambiguous(tok)) continue;
        const std::string& sense = pair.target[j];
        bool correct = contains(output_docs[d][i], sense);
        for (const auto& other : lexicon.candidates(tok)) {
          if (other != sense && contains(output_docs[d][i], other)) correct = false;
        }
        const bool first = seen.insert(tok).second;
        (first ? out.first_total : out.later_total) += 1;
        if (correct) (first ? out.first_correct : out.later_correct) += 1;
      }
    }
  }
  return out;
}

Evaluation evaluate(const corpus::DocumentCorpus& reference, const std::vector<std::vector<Sentence>>& output_docs,
                    const corpus::Lexicon& lexicon, const BleuOptions& options) {
  check_aligned(reference.source_documents(), output_docs);
  std::vector<Sentence> hyps;
  std::vector<Sentence> refs;
  for (std::size_t d = 0; d < output_docs.size(); ++d) {
    for (std::size_t i = 0; i < output_docs[d].size(); ++i) {
      hyps.push_back(output_docs[d][i]);
      refs.push_back(reference.documents[d][i].target);
    }
  }
  Evaluation out;
  out.bleu = bleu(hyps, refs, options);
  out.ambiguity = ambiguity_accuracy(reference, output_docs, lexicon);
  out.consistency = consistency_rate(reference.source_documents(), output_docs, lexicon);
  return out;
}

}  // namespace cachemt::decode

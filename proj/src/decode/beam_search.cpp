#include "cachemt/decode/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cachemt/error.hpp"

namespace cachemt::decode {

using numeric::Vector;

void BeamOptions::validate() const {
  if (beam_width == 0) throw ContractError("beam_width must be positive");
  if (max_len == 0) throw ContractError("max_len must be positive");
}

namespace {

constexpr std::size_t kRoot = std::numeric_limits<std::size_t>::max();

struct Node {
  std::size_t parent;
  nmt::DecoderStep step;
};

struct Live {
  double log_prob;
  Vector state;
  WordId last;
  std::size_t node;
  std::size_t length;
};

struct Candidate {
  double log_prob;
  std::size_t expansion;
  WordId word;
};

bool emittable(WordId w) { return w != nmt::kPad && w != nmt::kBos; }

}  // namespace

Hypothesis beam_search(const nmt::Model& model, std::span<const WordId> source, const cache::Cache* cache,
                       const BeamOptions& options) {
  options.validate();
  const nmt::EncoderStates enc = model.encode(source);
  const bool normalize = options.length_normalize;

  std::vector<Node> pool;
  std::vector<Live> live{{0.0, model.initial_state(enc), nmt::kBos, kRoot, 0}};
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_node = kRoot;
  double best_log_prob = 0.0;

  struct Expansion {
    std::size_t live;
    cache::FusedOutput out;
    Vector log_probs;
  };

  for (std::size_t t = 0; t < options.max_len && !live.empty(); ++t) {
    const bool last_step = t + 1 == options.max_len;
    std::vector<Expansion> expansions;
    std::vector<Candidate> candidates;
    expansions.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const Live& hyp = live[h];
      const nmt::Attention att = model.attend(hyp.state, hyp.last, enc);
      const Vector state = model.decoder_step(hyp.last, hyp.state, att.context);
      Expansion ex{h, cache::fused_output(model, options.fusion, cache, hyp.last, state, att.context), {}};
      ex.log_probs.resize(ex.out.probs.size());
      for (Eigen::Index w = 0; w < ex.log_probs.size(); ++w) ex.log_probs[w] = std::log(ex.out.probs[w]);
      if (last_step) {
        candidates.push_back({hyp.log_prob + ex.log_probs[nmt::kEos], expansions.size(), nmt::kEos});
      } else {
        // Only the best beam_width words of each hypothesis can survive.
        std::vector<WordId> words;
        for (Eigen::Index w = 0; w < ex.log_probs.size(); ++w) {
          if (emittable(static_cast<WordId>(w))) words.push_back(static_cast<WordId>(w));
        }
        const std::size_t keep = std::min(options.beam_width, words.size());
        std::partial_sort(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(keep), words.end(),
                          [&](WordId a, WordId b) {
                            if (ex.log_probs[a] != ex.log_probs[b]) return ex.log_probs[a] > ex.log_probs[b];
                            return a < b;
                          });
        for (std::size_t k = 0; k < keep; ++k) {
          candidates.push_back({hyp.log_prob + ex.log_probs[words[k]], expansions.size(), words[k]});
        }
      }
      expansions.push_back(std::move(ex));
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.expansion != b.expansion) return a.expansion < b.expansion;
      return a.word < b.word;
    });
    if (candidates.size() > options.beam_width) candidates.resize(options.beam_width);

    std::vector<Live> next;
    for (const Candidate& c : candidates) {
      const Expansion& ex = expansions[c.expansion];
      const Live& parent = live[ex.live];
      nmt::DecoderStep step = ex.out.step;
      step.t = t;
      step.word = c.word;
      pool.push_back({parent.node, std::move(step)});
      const std::size_t node = pool.size() - 1;
      if (c.word == nmt::kEos) {
        const double score = normalize ? c.log_prob / static_cast<double>(parent.length + 1) : c.log_prob;
        if (score > best_score) {
          best_score = score;
          best_node = node;
          best_log_prob = c.log_prob;
        }
      } else {
        next.push_back({c.log_prob, pool.back().step.state, c.word, node, parent.length + 1});
      }
    }
    live = std::move(next);
    // Scores only decrease as hypotheses grow, so no live hypothesis can
    // overtake a finished one that already scores at least as well.
    if (!normalize && !live.empty() && best_node != kRoot) {
      const double best_live = std::max_element(live.begin(), live.end(), [](const Live& a, const Live& b) {
                                 return a.log_prob < b.log_prob;
                               })->log_prob;
      if (best_score >= best_live) break;
    }
  }

  if (best_node == kRoot) throw ContractError("beam search finished without a complete hypothesis");
  Hypothesis out;
  out.log_prob = best_log_prob;
  for (std::size_t n = best_node; n != kRoot; n = pool[n].parent) out.trace.push_back(pool[n].step);
  std::reverse(out.trace.begin(), out.trace.end());
  for (const auto& step : out.trace) out.tokens.push_back(step.word);
  return out;
}

double score_sequence(const nmt::Model& model, std::span<const WordId> source, std::span<const WordId> tokens,
                      const cache::Cache* cache, cache::FusionMode fusion) {
  model.check_target(tokens);
  const nmt::EncoderStates enc = model.encode(source);
  Vector s = model.initial_state(enc);
  WordId prev = nmt::kBos;
  double total = 0.0;
  for (WordId w : tokens) {
    const nmt::Attention att = model.attend(s, prev, enc);
    s = model.decoder_step(prev, s, att.context);
    const cache::FusedOutput out = cache::fused_output(model, fusion, cache, prev, s, att.context);
    total += std::log(out.probs[w]);
    prev = w;
  }
  return total;
}

}  // namespace cachemt::decode

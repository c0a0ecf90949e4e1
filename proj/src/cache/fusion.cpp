#include "cachemt/cache/fusion.hpp"

#include "cachemt/error.hpp"
#include "cachemt/numeric/ops.hpp"

namespace cachemt::cache {

CacheParameters CacheParameters::from(const numeric::ParameterStore& store) {
  return CacheParameters{store.value("cache.U").matrix(), store.value("cache.V").matrix(),
                         store.value("cache.W").matrix()};
}

ShallowParameters ShallowParameters::from(const numeric::ParameterStore& store) {
  return ShallowParameters{store.value("shallow.u").flat(), store.value("shallow.v").flat(),
                           store.value("shallow.w").flat()};
}

void attach_parameters(numeric::ParameterStore& store, std::size_t d, std::size_t l) {
  auto ensure = [&store](const std::string& name, std::vector<std::size_t> shape) {
    if (!store.contains(name)) {
      store.add(name, std::move(shape), false);
    } else if (store.value(name).shape() != shape) {
      throw DataError("parameter has the wrong shape: " + name);
    }
  };
  ensure("cache.U", {d, d});
  ensure("cache.V", {d, l});
  ensure("cache.W", {d, d});
  ensure("shallow.u", {d});
  ensure("shallow.v", {l});
  ensure("shallow.w", {d});
}

Vector gate(const Vector& state, const Vector& context, const Vector& memory, const CacheParameters& p) {
  if (state.size() != p.u.cols() || context.size() != p.v.cols() || memory.size() != p.w.cols()) {
    throw ContractError("gate: shape mismatch");
  }
  Vector pre = p.u * state;
  pre.noalias() += p.v * context;
  pre.noalias() += p.w * memory;
  return numeric::sigmoid(pre);
}

double shallow_gate(const Vector& state, const Vector& context, const Vector& memory, const ShallowParameters& p) {
  if (state.size() != p.u.size() || context.size() != p.v.size() || memory.size() != p.w.size()) {
    throw ContractError("shallow_gate: shape mismatch");
  }
  return numeric::sigmoid(p.u.dot(state) + p.v.dot(context) + p.w.dot(memory));
}

Vector combine(const Vector& state, const std::optional<Vector>& memory, const std::optional<Vector>& lambda) {
  if (memory.has_value() != lambda.has_value()) {
    throw ContractError("combine: memory and gate must be both present or both absent");
  }
  if (!memory) return state;
  if (memory->size() != state.size() || lambda->size() != state.size()) throw ContractError("combine: width mismatch");
  return (1.0 - lambda->array()) * state.array() + lambda->array() * memory->array();
}

Vector cache_word_distribution(const Vector& match_probs, const Cache& cache, std::size_t vocab_size) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(vocab_size));
  const auto& slots = cache.slots();
  if (static_cast<std::size_t>(match_probs.size()) != slots.size()) {
    throw ContractError("cache_word_distribution: one probability per slot is required");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto w = slots[i].indicator;
    if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) throw ContractError("cache indicator outside vocabulary");
    out[w] += match_probs[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Vector shallow_fusion_prob(const Vector& p_vocab, const Vector& match_probs, const Cache& cache, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("shallow fusion weight must be in [0, 1]");
  if (cache.empty()) return p_vocab;
  const Vector p_cache = cache_word_distribution(match_probs, cache, static_cast<std::size_t>(p_vocab.size()));
  return (1.0 - lambda) * p_vocab + lambda * p_cache;
}

Vector shallow_fusion_prob(const Vector& p_vocab, const Cache& cache, const Vector& context, double lambda) {
  if (cache.empty()) return p_vocab;
  return shallow_fusion_prob(p_vocab, match(context, cache), cache, lambda);
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::None:
      return "none";
    case FusionMode::Deep:
      return "deep";
    case FusionMode::Shallow:
      return "shallow";
  }
  return "none";
}

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "none") return FusionMode::None;
  if (text == "deep") return FusionMode::Deep;
  if (text == "shallow") return FusionMode::Shallow;
  throw ContractError("unknown fusion mode: " + text);
}

FusedOutput fused_output(const nmt::Model& model, FusionMode mode, const Cache* cache, WordId y_prev,
                         const Vector& state, const Vector& context) {
  FusedOutput out;
  out.step.context = context;
  out.step.state = state;
  const bool read_cache = mode != FusionMode::None && cache != nullptr && !cache->empty();
  if (!read_cache) {
    out.probs = model.output_distribution(y_prev, state, context);
    out.step.combined = state;
    out.step.gate = Vector::Zero(state.size());
    return out;
  }

  out.step.match = match(context, *cache);
  out.memory = read(out.step.match, *cache);
  const Vector& memory = out.memory;
  if (mode == FusionMode::Deep) {
    Vector lambda = gate(state, context, memory, CacheParameters::from(model.params()));
    out.step.combined = combine(state, memory, lambda);
    out.step.gate = std::move(lambda);
    out.probs = model.output_distribution(y_prev, out.step.combined, context);
  } else {
    out.shallow_lambda = shallow_gate(state, context, memory, ShallowParameters::from(model.params()));
    out.vocab_probs = model.output_distribution(y_prev, state, context);
    out.cache_probs = cache_word_distribution(out.step.match, *cache, model.target_vocab_size());
    out.probs = (1.0 - out.shallow_lambda) * out.vocab_probs + out.shallow_lambda * out.cache_probs;
    out.step.combined = state;
    out.step.gate = Vector::Constant(state.size(), out.shallow_lambda);
  }
  return out;
}

}  // namespace cachemt::cache

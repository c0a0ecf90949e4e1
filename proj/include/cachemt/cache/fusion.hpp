#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "cachemt/cache/cache.hpp"
#include "cachemt/nmt/model.hpp"
#include "cachemt/numeric/parameter_store.hpp"

namespace cachemt::cache {

// Gate matrices of the representation fusion, lambda = sig(U s + V c + W m).
struct CacheParameters {
  numeric::ConstMatrixView u;  // d x d
  numeric::ConstMatrixView v;  // d x l
  numeric::ConstMatrixView w;  // d x d

  static CacheParameters from(const numeric::ParameterStore& store);
  static constexpr std::size_t count(std::size_t d, std::size_t l) { return 2 * d * d + d * l; }
};

// Vector parameters of the scalar shallow-fusion weight.
struct ShallowParameters {
  numeric::ConstVectorView u;  // d
  numeric::ConstVectorView v;  // l
  numeric::ConstVectorView w;  // d

  static ShallowParameters from(const numeric::ParameterStore& store);
};

inline constexpr const char* kDeepPrefix = "cache.";
inline constexpr const char* kShallowPrefix = "shallow.";

// Adds zero-initialised, frozen "cache.{U,V,W}" and "shallow.{u,v,w}" to the
// store unless they already exist.
void attach_parameters(numeric::ParameterStore& store, std::size_t d, std::size_t l);

Vector gate(const Vector& state, const Vector& context, const Vector& memory, const CacheParameters& params);
double shallow_gate(const Vector& state, const Vector& context, const Vector& memory,
                    const ShallowParameters& params);

// (1 - lambda) * state + lambda * memory; returns `state` unchanged when both
// optionals are empty. Throws ContractError when exactly one is present.
Vector combine(const Vector& state, const std::optional<Vector>& memory, const std::optional<Vector>& lambda);

// Per-word sum of matching probability over slots carrying that word.
Vector cache_word_distribution(const Vector& match_probs, const Cache& cache, std::size_t vocab_size);

// (1 - lambda) p_vocab + lambda P_cache. Returns p_vocab unchanged on an empty cache.
Vector shallow_fusion_prob(const Vector& p_vocab, const Cache& cache, const Vector& context, double lambda);
Vector shallow_fusion_prob(const Vector& p_vocab, const Vector& match_probs, const Cache& cache, double lambda);

enum class FusionMode { None, Deep, Shallow };

std::string to_string(FusionMode mode);
// Accepts "none", "deep", "shallow"; throws ContractError otherwise.
FusionMode parse_fusion_mode(const std::string& text);

struct FusedOutput {
  Vector probs;
  nmt::DecoderStep step;  // context, state, combined, gate and match filled in
  Vector memory;          // cache read; empty when the cache was not consulted
  // Shallow fusion only: the two mixed distributions and their weight.
  Vector vocab_probs;
  Vector cache_probs;
  double shallow_lambda = 0.0;
};

// Output distribution for one step whose decoder state and context are
// already computed. With FusionMode::None, a null or empty cache, the result
// is exactly Model::output_distribution(y_prev, state, context).
FusedOutput fused_output(const nmt::Model& model, FusionMode mode, const Cache* cache, WordId y_prev,
                         const Vector& state, const Vector& context);

}  // namespace cachemt::cache

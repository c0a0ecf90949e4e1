#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cachemt/nmt/config.hpp"
#include "cachemt/nmt/vocab.hpp"
#include "cachemt/numeric/parameter_store.hpp"
#include "cachemt/numeric/random.hpp"
#include "cachemt/numeric/tensor.hpp"

namespace cachemt::nmt {

using numeric::RowMatrix;
using numeric::Vector;

// Bidirectional encoder output: row j is [forward_j ; backward_j].
struct EncoderStates {
  RowMatrix rows;
  // rows projected by the alignment network; filled by Model::encode and
  // recomputed on demand when empty.
  RowMatrix projected;
  std::size_t length() const noexcept { return static_cast<std::size_t>(rows.rows()); }
};

struct Attention {
  Vector alpha;
  Vector context;
};

struct GruTrace {
  Vector x;
  Vector h_prev;
  Vector z;
  Vector r;
  Vector cand;
};

// Everything the backward pass needs from one teacher-forced sentence.
struct SentenceTape {
  std::vector<WordId> source;
  std::vector<WordId> target;  // ends with kEos
  std::vector<GruTrace> forward_trace;
  std::vector<GruTrace> backward_trace;  // indexed by source position
  RowMatrix states;                      // J x l
  RowMatrix projected;                   // J x attention_dim
  Vector s0;

  struct Step {
    Vector s_prev;
    RowMatrix activation;  // J x attention_dim, tanh of alignment pre-activations
    Vector alpha;
    Vector context;
    GruTrace gru;
    Vector state;
    Vector out_input;  // [state ; context ; embedding], after dropout
    Vector mask;       // dropout scale per entry, empty when dropout is off
    Vector probs;
  };
  std::vector<Step> steps;
  double log_likelihood = 0.0;
};

// Attention encoder-decoder: bidirectional GRU encoder, additive attention
// queried by the previous decoder state and the previous word, GRU decoder,
// single affine + softmax output over [state ; context ; previous word].
//
// All parameters live in one ParameterStore under the "nmt." prefix. Other
// modules may attach their own parameter groups to the same store.
class Model {
 public:
  Model(ModelConfig config, std::size_t source_vocab, std::size_t target_vocab);
  // Adopts an existing store (e.g. from a checkpoint); validates shapes.
  Model(ModelConfig config, std::size_t source_vocab, std::size_t target_vocab,
        numeric::ParameterStore params);

  Model(const Model& other);
  Model(Model&& other) noexcept;
  Model& operator=(const Model& other);
  Model& operator=(Model&& other) noexcept;
  ~Model() = default;

  // Uniform in [-0.08, 0.08] for every "nmt." parameter.
  void initialize(numeric::Rng& rng);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t source_vocab_size() const noexcept { return source_vocab_; }
  std::size_t target_vocab_size() const noexcept { return target_vocab_; }
  numeric::ParameterStore& params() noexcept { return params_; }
  const numeric::ParameterStore& params() const noexcept { return params_; }

  EncoderStates encode(std::span<const WordId> source) const;
  Vector initial_state(const EncoderStates& enc) const;
  Attention attend(const Vector& s_prev, WordId y_prev, const EncoderStates& enc) const;
  Vector decoder_step(WordId y_prev, const Vector& s_prev, const Vector& context) const;
  Vector output_logits(WordId y_prev, const Vector& state, const Vector& context) const;
  Vector output_distribution(WordId y_prev, const Vector& state, const Vector& context) const;
  // d(logits)/d(state) transposed times `dlogits`.
  Vector output_state_gradient(const Vector& dlogits) const;

  // Softmax over the given energies and the matching convex combination of rows.
  static Attention attention_from_energies(const Vector& energies, const EncoderStates& enc);

  // Teacher-forced pass; `target` must end with kEos. Dropout applies only
  // when the configured rate is positive and `dropout_rng` is non-null.
  SentenceTape forward(std::span<const WordId> source, std::span<const WordId> target,
                       numeric::Rng* dropout_rng = nullptr) const;
  // Adds d(-log_likelihood)/d(theta) into the store's grad buffers.
  void backward(const SentenceTape& tape);

  double log_likelihood(std::span<const WordId> source, std::span<const WordId> target) const;

  void check_source(std::span<const WordId> source) const;
  void check_target(std::span<const WordId> target) const;

 private:
  struct Bound {
    numeric::ParameterStore::Entry* src_emb = nullptr;
    numeric::ParameterStore::Entry* tgt_emb = nullptr;
    numeric::ParameterStore::Entry* fwd_w = nullptr;
    numeric::ParameterStore::Entry* fwd_u = nullptr;
    numeric::ParameterStore::Entry* fwd_b = nullptr;
    numeric::ParameterStore::Entry* bwd_w = nullptr;
    numeric::ParameterStore::Entry* bwd_u = nullptr;
    numeric::ParameterStore::Entry* bwd_b = nullptr;
    numeric::ParameterStore::Entry* init_w = nullptr;
    numeric::ParameterStore::Entry* init_b = nullptr;
    numeric::ParameterStore::Entry* att_ws = nullptr;
    numeric::ParameterStore::Entry* att_we = nullptr;
    numeric::ParameterStore::Entry* att_uh = nullptr;
    numeric::ParameterStore::Entry* att_b = nullptr;
    numeric::ParameterStore::Entry* att_v = nullptr;
    numeric::ParameterStore::Entry* dec_w = nullptr;
    numeric::ParameterStore::Entry* dec_u = nullptr;
    numeric::ParameterStore::Entry* dec_b = nullptr;
    numeric::ParameterStore::Entry* out_w = nullptr;
    numeric::ParameterStore::Entry* out_b = nullptr;
  };

  void declare_parameters();
  void validate_parameters() const;
  void bind();
  Vector embedding(WordId y) const;
  Attention attend_with(const Vector& s_prev, const Vector& emb, const EncoderStates& enc,
                        const RowMatrix& projected, RowMatrix* activation) const;
  RowMatrix project_states(const RowMatrix& states) const;

  ModelConfig config_;
  std::size_t source_vocab_ = 0;
  std::size_t target_vocab_ = 0;
  numeric::ParameterStore params_;
  Bound p_;
};

}  // namespace cachemt::nmt

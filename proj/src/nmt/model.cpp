#include "cachemt/nmt/model.hpp"

#include <cmath>
#include <utility>

#include "cachemt/error.hpp"
#include "cachemt/numeric/ops.hpp"
#include "gru.hpp"

namespace cachemt::nmt {
namespace {

using Entry = numeric::ParameterStore::Entry;

numeric::ConstMatrixView mat(const Entry* e) { return std::as_const(e->value).matrix(); }
numeric::ConstVectorView vec(const Entry* e) { return std::as_const(e->value).flat(); }
numeric::MatrixView grad_mat(Entry* e) { return e->grad.matrix(); }
numeric::VectorView grad_vec(Entry* e) { return e->grad.flat(); }

constexpr double kInitScale = 0.08;

}  // namespace

Model::Model(ModelConfig config, std::size_t source_vocab, std::size_t target_vocab)
    : config_(config), source_vocab_(source_vocab), target_vocab_(target_vocab) {
  config_.validate();
  if (source_vocab_ == 0 || target_vocab_ == 0) throw ContractError("vocabularies must be non-empty");
  declare_parameters();
  bind();
}

Model::Model(ModelConfig config, std::size_t source_vocab, std::size_t target_vocab,
             numeric::ParameterStore params)
    : config_(config), source_vocab_(source_vocab), target_vocab_(target_vocab), params_(std::move(params)) {
  config_.validate();
  validate_parameters();
  bind();
}

Model::Model(const Model& other)
    : config_(other.config_),
      source_vocab_(other.source_vocab_),
      target_vocab_(other.target_vocab_),
      params_(other.params_) {
  bind();
}

Model::Model(Model&& other) noexcept
    : config_(other.config_),
      source_vocab_(other.source_vocab_),
      target_vocab_(other.target_vocab_),
      params_(std::move(other.params_)) {
  bind();
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    config_ = other.config_;
    source_vocab_ = other.source_vocab_;
    target_vocab_ = other.target_vocab_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

Model& Model::operator=(Model&& other) noexcept {
  if (this != &other) {
    config_ = other.config_;
    source_vocab_ = other.source_vocab_;
    target_vocab_ = other.target_vocab_;
    params_ = std::move(other.params_);
    bind();
  }
  return *this;
}

void Model::declare_parameters() {
  const std::size_t e = config_.embedding_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t l = config_.context_dim;
  const std::size_t a = config_.attention_dim();
  params_.add("nmt.src_emb", {source_vocab_, e});
  params_.add("nmt.tgt_emb", {target_vocab_, e});
  for (const char* dir : {"nmt.enc_fwd", "nmt.enc_bwd"}) {
    params_.add(std::string(dir) + ".W", {3 * h, e});
    params_.add(std::string(dir) + ".U", {3 * h, h});
    params_.add(std::string(dir) + ".b", {3 * h});
  }
  params_.add("nmt.init.W", {h, h});
  params_.add("nmt.init.b", {h});
  params_.add("nmt.att.Ws", {a, h});
  params_.add("nmt.att.We", {a, e});
  params_.add("nmt.att.Uh", {a, l});
  params_.add("nmt.att.b", {a});
  params_.add("nmt.att.v", {a});
  params_.add("nmt.dec.W", {3 * h, e + l});
  params_.add("nmt.dec.U", {3 * h, h});
  params_.add("nmt.dec.b", {3 * h});
  params_.add("nmt.out.W", {target_vocab_, h + l + e});
  params_.add("nmt.out.b", {target_vocab_});
}

void Model::validate_parameters() const {
  Model reference(config_, source_vocab_, target_vocab_);
  for (const auto& [name, entry] : reference.params_) {
    if (!params_.contains(name)) throw DataError("missing parameter: " + name);
    if (params_.at(name).value.shape() != entry.value.shape()) {
      throw DataError("parameter has the wrong shape: " + name);
    }
  }
}

void Model::bind() {
  auto at = [this](const char* name) { return &params_.at(name); };
  p_.src_emb = at("nmt.src_emb");
  p_.tgt_emb = at("nmt.tgt_emb");
  p_.fwd_w = at("nmt.enc_fwd.W");
  p_.fwd_u = at("nmt.enc_fwd.U");
  p_.fwd_b = at("nmt.enc_fwd.b");
  p_.bwd_w = at("nmt.enc_bwd.W");
  p_.bwd_u = at("nmt.enc_bwd.U");
  p_.bwd_b = at("nmt.enc_bwd.b");
  p_.init_w = at("nmt.init.W");
  p_.init_b = at("nmt.init.b");
  p_.att_ws = at("nmt.att.Ws");
  p_.att_we = at("nmt.att.We");
  p_.att_uh = at("nmt.att.Uh");
  p_.att_b = at("nmt.att.b");
  p_.att_v = at("nmt.att.v");
  p_.dec_w = at("nmt.dec.W");
  p_.dec_u = at("nmt.dec.U");
  p_.dec_b = at("nmt.dec.b");
  p_.out_w = at("nmt.out.W");
  p_.out_b = at("nmt.out.b");
}

void Model::initialize(numeric::Rng& rng) {
  for (auto& [name, entry] : params_) {
    if (name.rfind("nmt.", 0) == 0) numeric::fill_uniform(entry.value, -kInitScale, kInitScale, rng);
  }
}

void Model::check_source(std::span<const WordId> source) const {
  if (source.empty()) throw ContractError("empty source sentence");
  if (source.size() > config_.max_sentence_len) throw ContractError("source sentence exceeds max_sentence_len");
  for (WordId id : source) {
    if (id < 0 || static_cast<std::size_t>(id) >= source_vocab_) {
      throw ContractError("source word id out of range: " + std::to_string(id));
    }
  }
}

void Model::check_target(std::span<const WordId> target) const {
  if (target.empty() || target.back() != kEos) throw ContractError("target sequence must end with EOS");
  for (WordId id : target) {
    if (id < 0 || static_cast<std::size_t>(id) >= target_vocab_) {
      throw ContractError("target word id out of range: " + std::to_string(id));
    }
  }
}

Vector Model::embedding(WordId y) const {
  if (y < 0 || static_cast<std::size_t>(y) >= target_vocab_) {
    throw ContractError("target word id out of range: " + std::to_string(y));
  }
  return mat(p_.tgt_emb).row(y).transpose();
}

namespace {

// Runs both encoder directions; fills traces when given.
RowMatrix run_encoder(std::span<const WordId> source, const numeric::ConstMatrixView& emb,
                      const numeric::ConstMatrixView& fw, const numeric::ConstMatrixView& fu,
                      const numeric::ConstVectorView& fb, const numeric::ConstMatrixView& bw,
                      const numeric::ConstMatrixView& bu, const numeric::ConstVectorView& bb,
                      std::size_t hidden, std::vector<GruTrace>* fwd_trace,
                      std::vector<GruTrace>* bwd_trace) {
  const auto n = static_cast<Eigen::Index>(source.size());
  const auto h = static_cast<Eigen::Index>(hidden);
  RowMatrix x(n, emb.cols());
  for (Eigen::Index j = 0; j < n; ++j) x.row(j) = emb.row(source[static_cast<std::size_t>(j)]);

  RowMatrix fproj = x * fw.transpose();
  fproj.rowwise() += fb.transpose();
  RowMatrix bproj = x * bw.transpose();
  bproj.rowwise() += bb.transpose();

  RowMatrix states(n, 2 * h);
  if (fwd_trace != nullptr) {
    fwd_trace->assign(static_cast<std::size_t>(n), GruTrace{});
    bwd_trace->assign(static_cast<std::size_t>(n), GruTrace{});
  }
  Vector state = Vector::Zero(h);
  for (Eigen::Index j = 0; j < n; ++j) {
    GruTrace* tr = fwd_trace != nullptr ? &(*fwd_trace)[static_cast<std::size_t>(j)] : nullptr;
    state = gru::step(fproj.row(j).transpose(), fu, state, tr);
    if (tr != nullptr) tr->x = x.row(j).transpose();
    states.row(j).head(h) = state.transpose();
  }
  state = Vector::Zero(h);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    GruTrace* tr = bwd_trace != nullptr ? &(*bwd_trace)[static_cast<std::size_t>(j)] : nullptr;
    state = gru::step(bproj.row(j).transpose(), bu, state, tr);
    if (tr != nullptr) tr->x = x.row(j).transpose();
    states.row(j).tail(h) = state.transpose();
  }
  return states;
}

}  // namespace

RowMatrix Model::project_states(const RowMatrix& states) const { return states * mat(p_.att_uh).transpose(); }

EncoderStates Model::encode(std::span<const WordId> source) const {
  check_source(source);
  EncoderStates enc;
  enc.rows = run_encoder(source, mat(p_.src_emb), mat(p_.fwd_w), mat(p_.fwd_u), vec(p_.fwd_b), mat(p_.bwd_w),
                         mat(p_.bwd_u), vec(p_.bwd_b), config_.hidden_dim, nullptr, nullptr);
  enc.projected = project_states(enc.rows);
  return enc;
}

Vector Model::initial_state(const EncoderStates& enc) const {
  if (enc.length() == 0) throw ContractError("initial_state needs at least one encoder state");
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const Vector backward_first = enc.rows.row(0).tail(h).transpose();
  return (mat(p_.init_w) * backward_first + vec(p_.init_b)).array().tanh();
}

Attention Model::attention_from_energies(const Vector& energies, const EncoderStates& enc) {
  if (static_cast<std::size_t>(energies.size()) != enc.length()) {
    throw ContractError("one energy per encoder state is required");
  }
  Attention att;
  att.alpha = numeric::softmax_stable(energies);
  att.context = enc.rows.transpose() * att.alpha;
  return att;
}

Attention Model::attend_with(const Vector& s_prev, const Vector& emb, const EncoderStates& enc,
                             const RowMatrix& projected, RowMatrix* activation) const {
  const Vector query = mat(p_.att_ws) * s_prev + mat(p_.att_we) * emb + vec(p_.att_b);
  RowMatrix act = projected;
  act.rowwise() += query.transpose();
  act = act.array().tanh();
  const Vector energies = act * vec(p_.att_v);
  Attention att = attention_from_energies(energies, enc);
  if (activation != nullptr) *activation = std::move(act);
  return att;
}

Attention Model::attend(const Vector& s_prev, WordId y_prev, const EncoderStates& enc) const {
  if (static_cast<std::size_t>(s_prev.size()) != config_.hidden_dim ||
      static_cast<std::size_t>(enc.rows.cols()) != config_.context_dim || enc.length() == 0) {
    throw ContractError("attend: shape mismatch");
  }
  if (enc.projected.rows() == enc.rows.rows()) return attend_with(s_prev, embedding(y_prev), enc, enc.projected, nullptr);
  return attend_with(s_prev, embedding(y_prev), enc, project_states(enc.rows), nullptr);
}

Vector Model::decoder_step(WordId y_prev, const Vector& s_prev, const Vector& context) const {
  if (static_cast<std::size_t>(s_prev.size()) != config_.hidden_dim ||
      static_cast<std::size_t>(context.size()) != config_.context_dim) {
    throw ContractError("decoder_step: shape mismatch");
  }
  const Eigen::Index e = static_cast<Eigen::Index>(config_.embedding_dim);
  Vector x(e + context.size());
  x.head(e) = embedding(y_prev);
  x.tail(context.size()) = context;
  const Vector proj = mat(p_.dec_w) * x + vec(p_.dec_b);
  return gru::step(proj, mat(p_.dec_u), s_prev, nullptr);
}

Vector Model::output_logits(WordId y_prev, const Vector& state, const Vector& context) const {
  if (static_cast<std::size_t>(state.size()) != config_.hidden_dim ||
      static_cast<std::size_t>(context.size()) != config_.context_dim) {
    throw ContractError("output_logits: shape mismatch");
  }
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto l = static_cast<Eigen::Index>(config_.context_dim);
  const auto e = static_cast<Eigen::Index>(config_.embedding_dim);
  const auto w = mat(p_.out_w);
  Vector logits = vec(p_.out_b);
  logits.noalias() += w.leftCols(h) * state;
  logits.noalias() += w.middleCols(h, l) * context;
  logits.noalias() += w.rightCols(e) * embedding(y_prev);
  return logits;
}

Vector Model::output_distribution(WordId y_prev, const Vector& state, const Vector& context) const {
  return numeric::softmax_stable(output_logits(y_prev, state, context));
}

Vector Model::output_state_gradient(const Vector& dlogits) const {
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  return mat(p_.out_w).leftCols(h).transpose() * dlogits;
}

SentenceTape Model::forward(std::span<const WordId> source, std::span<const WordId> target,
                            numeric::Rng* dropout_rng) const {
  check_source(source);
  check_target(target);
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto l = static_cast<Eigen::Index>(config_.context_dim);
  const auto e = static_cast<Eigen::Index>(config_.embedding_dim);

  SentenceTape tape;
  tape.source.assign(source.begin(), source.end());
  tape.target.assign(target.begin(), target.end());
  EncoderStates enc;
  enc.rows = run_encoder(source, mat(p_.src_emb), mat(p_.fwd_w), mat(p_.fwd_u), vec(p_.fwd_b), mat(p_.bwd_w),
                         mat(p_.bwd_u), vec(p_.bwd_b), config_.hidden_dim, &tape.forward_trace,
                         &tape.backward_trace);
  tape.projected = project_states(enc.rows);
  tape.s0 = initial_state(enc);

  const bool dropout = config_.dropout_rate > 0.0 && dropout_rng != nullptr;
  const double keep = 1.0 - config_.dropout_rate;

  Vector s = tape.s0;
  tape.steps.resize(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    auto& step = tape.steps[t];
    const WordId y_prev = t == 0 ? kBos : target[t - 1];
    const Vector emb = embedding(y_prev);
    step.s_prev = s;
    Attention att = attend_with(s, emb, enc, tape.projected, &step.activation);

    step.gru.x.resize(e + l);
    step.gru.x.head(e) = emb;
    step.gru.x.tail(l) = att.context;
    const Vector proj = mat(p_.dec_w) * step.gru.x + vec(p_.dec_b);
    s = gru::step(proj, mat(p_.dec_u), s, &step.gru);

    step.out_input.resize(h + l + e);
    step.out_input << s, att.context, emb;
    Vector logits;
    if (dropout) {
      step.mask.resize(step.out_input.size());
      for (Eigen::Index i = 0; i < step.mask.size(); ++i) {
        step.mask[i] = numeric::uniform01(*dropout_rng) < keep ? 1.0 / keep : 0.0;
      }
      step.out_input.array() *= step.mask.array();
      logits = mat(p_.out_w) * step.out_input + vec(p_.out_b);
    } else {
      logits = output_logits(y_prev, s, att.context);
    }
    step.probs = numeric::softmax_stable(logits);
    tape.log_likelihood += std::log(step.probs[target[t]]);
    step.alpha = std::move(att.alpha);
    step.context = std::move(att.context);
    step.state = s;
  }
  tape.states = std::move(enc.rows);
  return tape;
}

double Model::log_likelihood(std::span<const WordId> source, std::span<const WordId> target) const {
  return forward(source, target).log_likelihood;
}

void Model::backward(const SentenceTape& tape) {
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto l = static_cast<Eigen::Index>(config_.context_dim);
  const auto e = static_cast<Eigen::Index>(config_.embedding_dim);
  const auto n = static_cast<Eigen::Index>(tape.source.size());

  RowMatrix d_states = RowMatrix::Zero(n, l);
  RowMatrix d_projected = RowMatrix::Zero(n, tape.projected.cols());
  Vector ds_carry = Vector::Zero(h);
  Vector dx;
  Vector dh_prev;

  const auto out_w = mat(p_.out_w);
  const auto dec_w = mat(p_.dec_w);
  const auto dec_u = mat(p_.dec_u);
  const auto att_ws = mat(p_.att_ws);
  const auto att_we = mat(p_.att_we);
  const auto att_v = vec(p_.att_v);

  for (std::size_t t = tape.steps.size(); t-- > 0;) {
    const auto& step = tape.steps[t];
    const WordId y_prev = t == 0 ? kBos : tape.target[t - 1];

    Vector dlogits = step.probs;
    dlogits[tape.target[t]] -= 1.0;
    grad_mat(p_.out_w).noalias() += dlogits * step.out_input.transpose();
    grad_vec(p_.out_b) += dlogits;
    Vector d_out_input = out_w.transpose() * dlogits;
    if (step.mask.size() != 0) d_out_input.array() *= step.mask.array();

    const Vector ds = d_out_input.head(h) + ds_carry;
    Vector dc = d_out_input.segment(h, l);
    Vector de = d_out_input.tail(e);

    gru::backward(step.gru, ds, dec_w, dec_u, grad_mat(p_.dec_w), grad_mat(p_.dec_u), grad_vec(p_.dec_b), dx,
                  dh_prev);
    de += dx.head(e);
    dc += dx.tail(l);

    // Attention: context = states^T alpha, alpha = softmax(act v),
    // act = tanh(projected + Ws s_prev + We emb + b).
    const Vector d_alpha = tape.states * dc;
    d_states.noalias() += step.alpha * dc.transpose();
    const double mean = step.alpha.dot(d_alpha);
    const Vector d_energy = step.alpha.array() * (d_alpha.array() - mean);
    grad_vec(p_.att_v).noalias() += step.activation.transpose() * d_energy;
    const RowMatrix d_pre = (d_energy * att_v.transpose()).array() * (1.0 - step.activation.array().square());
    d_projected += d_pre;
    const Vector d_query = d_pre.colwise().sum().transpose();
    grad_mat(p_.att_ws).noalias() += d_query * step.s_prev.transpose();
    const Vector emb = embedding(y_prev);
    grad_mat(p_.att_we).noalias() += d_query * emb.transpose();
    grad_vec(p_.att_b) += d_query;
    de.noalias() += att_we.transpose() * d_query;

    grad_mat(p_.tgt_emb).row(y_prev) += de.transpose();
    ds_carry = dh_prev;
    ds_carry.noalias() += att_ws.transpose() * d_query;
  }

  // s0 = tanh(W_init * backward_0 + b_init)
  {
    const Vector d_pre = ds_carry.array() * (1.0 - tape.s0.array().square());
    const Vector backward_first = tape.states.row(0).tail(h).transpose();
    grad_mat(p_.init_w).noalias() += d_pre * backward_first.transpose();
    grad_vec(p_.init_b) += d_pre;
    d_states.row(0).tail(h) += (mat(p_.init_w).transpose() * d_pre).transpose();
  }

  grad_mat(p_.att_uh).noalias() += d_projected.transpose() * tape.states;
  d_states.noalias() += d_projected * mat(p_.att_uh);

  auto src_grad = grad_mat(p_.src_emb);
  Vector carry = Vector::Zero(h);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const Vector dh = d_states.row(j).head(h).transpose() + carry;
    gru::backward(tape.forward_trace[static_cast<std::size_t>(j)], dh, mat(p_.fwd_w), mat(p_.fwd_u),
                  grad_mat(p_.fwd_w), grad_mat(p_.fwd_u), grad_vec(p_.fwd_b), dx, carry);
    src_grad.row(tape.source[static_cast<std::size_t>(j)]) += dx.transpose();
  }
  carry = Vector::Zero(h);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector dh = d_states.row(j).tail(h).transpose() + carry;
    gru::backward(tape.backward_trace[static_cast<std::size_t>(j)], dh, mat(p_.bwd_w), mat(p_.bwd_u),
                  grad_mat(p_.bwd_w), grad_mat(p_.bwd_u), grad_vec(p_.bwd_b), dx, carry);
    src_grad.row(tape.source[static_cast<std::size_t>(j)]) += dx.transpose();
  }
}

}  // namespace cachemt::nmt

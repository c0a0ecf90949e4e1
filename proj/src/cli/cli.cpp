#include "cachemt/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "cachemt/cache/cache.hpp"
#include "cachemt/cache/fusion.hpp"
#include "cachemt/corpus/corpus.hpp"
#include "cachemt/corpus/lexicon.hpp"
#include "cachemt/corpus/synthetic.hpp"
#include "cachemt/decode/metrics.hpp"
#include "cachemt/decode/translator.hpp"
#include "cachemt/error.hpp"
#include "cachemt/nmt/checkpoint.hpp"
#include "cachemt/training/trainer.hpp"

namespace cachemt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kFusionNames{"none", "deep", "shallow"};
const std::vector<std::string> kOnOff{"on", "off"};
const std::vector<std::string> kOptimizers{"sgd", "adadelta", "adam"};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// Options every subcommand shares for writing its manifest.
struct ManifestInfo {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
};

json resolved_config(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    if (opt->get_type_size() == 0 && value.empty()) value = opt->count() > 0 ? "true" : "false";
    cfg[name] = value;
  }
  return cfg;
}

void write_manifest(const std::string& path, const CLI::App& sub, const ManifestInfo& info) {
  json m;
  m["subcommand"] = sub.get_name();
  m["config"] = resolved_config(sub);
  m["seed"] = info.seed;
  m["inputs"] = info.inputs;
  m["outputs"] = info.outputs;
  m["version"] = kVersion;
  auto out = open_output(path);
  out << m.dump(2) << '\n';
}

std::string manifest_path_for(const std::string& output) { return output + ".manifest.json"; }

// Accepts either a parallel corpus (source side used) or plain documents.
std::vector<std::vector<corpus::Sentence>> load_sources(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::istringstream ss(text);
  if (text.find('\t') != std::string::npos) return corpus::parse_corpus(ss, path).source_documents();
  return corpus::parse_documents(ss, path);
}

cache::UpdateRule update_rule(const std::string& averaging) {
  return averaging == "on" ? cache::UpdateRule::Average : cache::UpdateRule::Replace;
}

std::size_t default_embedding(std::size_t dims) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.62 * static_cast<double>(dims))));
}

// Flags shared by pretrain, finetune and sweep.
struct TrainFlags {
  std::size_t epochs = 0;
  std::size_t batch = 80;
  std::string optimizer = "sgd";
  double lr = 0.1;
  double clip = 1.0;
  std::uint64_t seed = 1;
  std::size_t max_len = 80;

  void add_to(CLI::App* sub, std::size_t default_epochs) {
    epochs = default_epochs;
    sub->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    sub->add_option("--batch", batch, "Sentences per update")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--optimizer", optimizer, "Optimizer")->capture_default_str()->check(CLI::IsMember(kOptimizers));
    sub->add_option("--lr", lr, "Learning rate")->capture_default_str();
    sub->add_option("--clip", clip, "Global gradient-norm clip")->capture_default_str();
    sub->add_option("--seed", seed, "RNG seed")->capture_default_str();
    sub->add_option("--max-len", max_len, "Maximum sentence length")->capture_default_str();
  }

  training::TrainConfig config(bool finetune) const {
    training::TrainConfig c;
    c.optimizer.kind = training::parse_optimizer(optimizer);
    c.optimizer.learning_rate = lr;
    c.optimizer.clip_norm = clip;
    (finetune ? c.finetune_epochs : c.pretrain_epochs) = epochs;
    c.batch_size = batch;
    c.max_sentence_len = max_len;
    c.seed = seed;
    return c;
  }
};

// Flags shared by translate, inspect-cache and sweep.
struct DecodeFlags {
  std::string fusion = "deep";
  std::size_t cache_size = 25;
  std::string averaging = "on";
  std::size_t beam = 10;
  std::size_t max_len = 80;
  bool persist = false;
  bool length_normalize = false;

  void add_to(CLI::App* sub, bool with_cache_size = true) {
    sub->add_option("--fusion", fusion, "Cache fusion at decoding time")
        ->capture_default_str()
        ->check(CLI::IsMember(kFusionNames));
    if (with_cache_size) sub->add_option("--cache-size", cache_size, "Cache capacity")->capture_default_str();
    sub->add_option("--overwrite-averaging", averaging, "Average on repeated indicator words")
        ->capture_default_str()
        ->check(CLI::IsMember(kOnOff));
    sub->add_option("--beam", beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--max-len", max_len, "Maximum output length including EOS")->capture_default_str();
    sub->add_flag("--persist-cache-across-docs", persist, "Keep the cache across document boundaries");
    sub->add_flag("--length-normalize", length_normalize, "Rank finished hypotheses by per-token score");
  }

  decode::TranslateOptions options() const {
    decode::TranslateOptions o;
    o.beam.beam_width = beam;
    o.beam.max_len = max_len;
    o.beam.fusion = cache::parse_fusion_mode(fusion);
    o.beam.length_normalize = length_normalize;
    o.cache_capacity = cache_size;
    o.rule = update_rule(averaging);
    o.persist_across_documents = persist;
    return o;
  }
};

std::function<void(const training::EpochRecord&)> epoch_logger(std::ostream& log, std::ostream& out) {
  return [&log, &out](const training::EpochRecord& r) {
    json rec{{"pass", r.pass},       {"epoch", r.epoch},     {"loss", r.loss},
             {"tune_metric", r.tune_metric}, {"tokens", r.tokens}, {"updates", r.updates},
             {"selected", r.selected}};
    log << rec.dump() << '\n';
    log.flush();
    out << r.pass << " epoch " << r.epoch << " loss " << r.loss << " tune " << r.tune_metric << '\n';
  };
}

json evaluation_record(const decode::Evaluation& e) {
  return json{{"bleu", e.bleu.score},
              {"precisions", e.bleu.precisions},
              {"brevity_penalty", e.bleu.brevity_penalty},
              {"later_accuracy", e.ambiguity.later_accuracy()},
              {"later_total", e.ambiguity.later_total},
              {"first_accuracy", e.ambiguity.first_accuracy()},
              {"first_total", e.ambiguity.first_total},
              {"consistency", e.consistency.rate},
              {"repeated_types", e.consistency.repeated},
              {"unknown_tokens", e.consistency.unknown_tokens}};
}

// ---- subcommands -----------------------------------------------------------

struct GenData {
  std::string out_dir;
  corpus::SynthConfig synth;
  std::size_t tune_docs = 200;
  std::size_t test_docs = 200;
  std::string placement = "before";

  void add_to(CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    sub->add_option("--docs", synth.documents, "Training documents")->capture_default_str();
    sub->add_option("--tune-docs", tune_docs, "Tuning documents")->capture_default_str();
    sub->add_option("--test-docs", test_docs, "Test documents")->capture_default_str();
    sub->add_option("--sentences", synth.sentences_per_document, "Sentences per document")->capture_default_str();
    sub->add_option("--vocab", synth.source_vocab, "Source types")->capture_default_str();
    sub->add_option("--ambiguous", synth.ambiguous_types, "Ambiguous source types")->capture_default_str();
    sub->add_option("--ambiguous-per-doc", synth.ambiguous_per_document, "Active ambiguous types per document")
        ->capture_default_str();
    sub->add_option("--min-len", synth.min_length, "Minimum sentence length")->capture_default_str();
    sub->add_option("--max-len", synth.max_length, "Maximum sentence length")->capture_default_str();
    sub->add_option("--min-later", synth.min_later, "Minimum later occurrences")->capture_default_str();
    sub->add_option("--max-later", synth.max_later, "Maximum later occurrences")->capture_default_str();
    sub->add_option("--marker", placement, "Marker placement next to the first occurrence")
        ->capture_default_str()
        ->check(CLI::IsMember({"before", "after"}));
  }

  void run(const CLI::App& sub, std::ostream& out) {
    corpus::SynthConfig cfg = synth;
    cfg.marker_placement = corpus::parse_marker_placement(placement);
    const std::size_t train_docs = cfg.documents;
    cfg.documents = train_docs + tune_docs + test_docs;
    const corpus::SyntheticCorpus syn = corpus::generate_synthetic(cfg);

    fs::create_directories(out_dir);
    const auto& docs = syn.corpus.documents;
    auto slice = [&](std::size_t from, std::size_t n) {
      corpus::DocumentCorpus c;
      c.documents.assign(docs.begin() + static_cast<std::ptrdiff_t>(from),
                         docs.begin() + static_cast<std::ptrdiff_t>(from + n));
      return c;
    };
    ManifestInfo info;
    info.seed = cfg.seed;
    const std::vector<std::pair<std::string, corpus::DocumentCorpus>> splits = {
        {"train.txt", slice(0, train_docs)},
        {"tune.txt", slice(train_docs, tune_docs)},
        {"test.txt", slice(train_docs + tune_docs, test_docs)}};
    for (const auto& [name, c] : splits) {
      const std::string path = (fs::path(out_dir) / name).string();
      corpus::save_corpus(c, path);
      info.outputs.push_back(path);
    }
    const std::string lex = (fs::path(out_dir) / "lexicon.txt").string();
    corpus::save_lexicon(syn.lexicon, lex);
    info.outputs.push_back(lex);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), sub, info);
    out << "wrote " << cfg.documents << " documents to " << out_dir << '\n';
  }
};

struct Pretrain {
  std::string train_path;
  std::string tune_path;
  std::string out_path;
  std::string log_path;
  std::size_t dims = 1000;
  std::size_t embed = 0;
  std::size_t vocab_size = 30000;
  double dropout = 0.0;
  TrainFlags train;

  void add_to(CLI::App* sub) {
    sub->add_option("--train", train_path, "Training corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--tune", tune_path, "Tuning corpus for model selection")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Output checkpoint")->required();
    sub->add_option("--log", log_path, "Epoch log (default: <out>.log.jsonl)");
    sub->add_option("--dims", dims, "Hidden width d")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--embed", embed, "Embedding width (0: 0.62 d)")->capture_default_str();
    sub->add_option("--vocab-size", vocab_size, "Vocabulary size per side, reserved ids included")
        ->capture_default_str();
    sub->add_option("--dropout", dropout, "Dropout on the output-layer input")->capture_default_str();
    train.add_to(sub, training::TrainConfig{}.pretrain_epochs);
  }

  void run(const CLI::App& sub, std::ostream& out) {
    const corpus::DocumentCorpus train_corpus = corpus::load_corpus(train_path);
    const corpus::DocumentCorpus tune_corpus =
        tune_path.empty() ? corpus::DocumentCorpus{} : corpus::load_corpus(tune_path);
    const corpus::Vocabularies vocab = corpus::build_vocab(train_corpus, vocab_size);

    nmt::ModelConfig mc = nmt::ModelConfig::with_dims(embed == 0 ? default_embedding(dims) : embed, dims);
    mc.dropout_rate = dropout;
    mc.max_sentence_len = train.max_len;
    nmt::Model model(mc, vocab.source.size(), vocab.target.size());
    numeric::Rng rng(train.seed);
    model.initialize(rng);

    const std::string log_file = log_path.empty() ? out_path + ".log.jsonl" : log_path;
    auto log = open_output(log_file);
    const auto result = training::pretrain(std::move(model), corpus::encode(train_corpus, vocab),
                                           corpus::encode(tune_corpus, vocab), train.config(false),
                                           epoch_logger(log, out));
    nmt::save_checkpoint(out_path, nmt::make_checkpoint(result.model, vocab.source, vocab.target));

    ManifestInfo info;
    info.seed = train.seed;
    info.inputs = {train_path};
    if (!tune_path.empty()) info.inputs.push_back(tune_path);
    info.outputs = {out_path, log_file};
    write_manifest(manifest_path_for(out_path), sub, info);
    out << "kept epoch " << result.best_epoch << ", skipped " << result.skipped_pairs << " long pairs\n";
  }
};

struct Finetune {
  std::string model_path;
  std::string train_path;
  std::string tune_path;
  std::string out_path;
  std::string log_path;
  std::string fusion = "deep";
  std::size_t cache_size = 25;
  std::string averaging = "on";
  TrainFlags train;

  void add_to(CLI::App* sub) {
    sub->add_option("--model", model_path, "Pre-trained checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--train", train_path, "Training corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--tune", tune_path, "Tuning corpus for model selection")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Output checkpoint")->required();
    sub->add_option("--log", log_path, "Epoch log (default: <out>.log.jsonl)");
    sub->add_option("--fusion", fusion, "Fusion whose parameters are trained")
        ->capture_default_str()
        ->check(CLI::IsMember({"deep", "shallow"}));
    sub->add_option("--cache-size", cache_size, "Cache capacity")->capture_default_str();
    sub->add_option("--overwrite-averaging", averaging, "Average on repeated indicator words")
        ->capture_default_str()
        ->check(CLI::IsMember(kOnOff));
    train.add_to(sub, training::TrainConfig{}.finetune_epochs);
  }

  void run(const CLI::App& sub, std::ostream& out) {
    const nmt::Checkpoint ckpt = nmt::load_checkpoint(model_path);
    const corpus::Vocabularies vocab{ckpt.source_vocab, ckpt.target_vocab};
    const auto train_docs = corpus::encode(corpus::load_corpus(train_path), vocab);
    const auto tune_docs =
        tune_path.empty() ? std::vector<corpus::EncodedDocument>{} : corpus::encode(corpus::load_corpus(tune_path), vocab);

    training::FinetuneConfig fc;
    fc.fusion = cache::parse_fusion_mode(fusion);
    fc.cache_capacity = cache_size;
    fc.rule = update_rule(averaging);

    const std::string log_file = log_path.empty() ? out_path + ".log.jsonl" : log_path;
    auto log = open_output(log_file);
    const auto result = training::finetune(nmt::model_from_checkpoint(ckpt), train_docs, tune_docs, fc,
                                           train.config(true), epoch_logger(log, out));
    nmt::save_checkpoint(out_path, nmt::make_checkpoint(result.model, vocab.source, vocab.target));

    ManifestInfo info;
    info.seed = train.seed;
    info.inputs = {model_path, train_path};
    if (!tune_path.empty()) info.inputs.push_back(tune_path);
    info.outputs = {out_path, log_file};
    write_manifest(manifest_path_for(out_path), sub, info);
    out << "kept epoch " << result.best_epoch << '\n';
  }
};

struct Translate {
  std::string model_path;
  std::string input_path;
  std::string output_path;
  std::string histogram_path;
  DecodeFlags decode;

  void add_to(CLI::App* sub) {
    sub->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--input", input_path, "Source documents or parallel corpus")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--output", output_path, "Translations, one sentence per line")->required();
    sub->add_option("--histogram", histogram_path, "Matching-position histogram (JSON lines)");
    decode.add_to(sub);
  }

  void run(const CLI::App& sub, std::ostream& out) {
    const nmt::Checkpoint ckpt = nmt::load_checkpoint(model_path);
    const nmt::Model model = nmt::model_from_checkpoint(ckpt);
    const auto sources = load_sources(input_path);
    auto result = decode::translate_corpus(model, ckpt.source_vocab, ckpt.target_vocab, sources, decode.options());
    // An empty line would read back as a document break.
    for (auto& doc : result.documents)
      for (auto& sentence : doc)
        if (sentence.empty()) sentence.push_back(ckpt.target_vocab.token(nmt::kUnk));
    corpus::save_documents(result.documents, output_path);

    ManifestInfo info;
    info.inputs = {model_path, input_path};
    info.outputs = {output_path};
    if (!histogram_path.empty()) {
      auto h = open_output(histogram_path);
      h << decode::histogram_report(result.histogram);
      info.outputs.push_back(histogram_path);
    }
    write_manifest(manifest_path_for(output_path), sub, info);
    out << "translated " << result.documents.size() << " documents\n";
  }
};

struct Evaluate {
  std::string hyp_path;
  std::string ref_path;
  std::string lexicon_path;
  std::string out_path;
  bool no_smoothing = false;
  bool case_sensitive = false;

  void add_to(CLI::App* sub) {
    sub->add_option("--hyp", hyp_path, "Translations")->required()->check(CLI::ExistingFile);
    sub->add_option("--ref", ref_path, "Reference parallel corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--lexicon", lexicon_path, "Lexicon for ambiguity and consistency metrics")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Metrics record (JSON lines)");
    sub->add_flag("--no-smoothing", no_smoothing, "Disable add-one smoothing of higher-order precisions");
    sub->add_flag("--case-sensitive", case_sensitive, "Do not lowercase before counting");
  }

  void run(const CLI::App& sub, std::ostream& out) {
    const auto hyps = corpus::load_documents(hyp_path);
    const corpus::DocumentCorpus ref = corpus::load_corpus(ref_path);
    decode::BleuOptions opts;
    opts.smoothing = !no_smoothing;
    opts.lowercase = !case_sensitive;
    json rec;
    if (lexicon_path.empty()) {
      std::vector<corpus::Sentence> flat_hyp;
      std::vector<corpus::Sentence> flat_ref;
      const auto refs = ref.target_documents();
      if (hyps.size() != refs.size()) throw ContractError("document counts differ");
      for (std::size_t d = 0; d < hyps.size(); ++d) {
        if (hyps[d].size() != refs[d].size()) throw ContractError("sentence counts differ");
        flat_hyp.insert(flat_hyp.end(), hyps[d].begin(), hyps[d].end());
        flat_ref.insert(flat_ref.end(), refs[d].begin(), refs[d].end());
      }
      const auto b = decode::bleu(flat_hyp, flat_ref, opts);
      rec = json{{"bleu", b.score}, {"precisions", b.precisions}, {"brevity_penalty", b.brevity_penalty}};
    } else {
      rec = evaluation_record(decode::evaluate(ref, hyps, corpus::load_lexicon(lexicon_path), opts));
    }
    out << rec.dump() << '\n';
    ManifestInfo info;
    info.inputs = {hyp_path, ref_path};
    if (!lexicon_path.empty()) info.inputs.push_back(lexicon_path);
    if (!out_path.empty()) {
      auto f = open_output(out_path);
      f << rec.dump() << '\n';
      info.outputs.push_back(out_path);
      write_manifest(manifest_path_for(out_path), sub, info);
    }
  }
};

struct InspectCache {
  std::string model_path;
  std::string input_path;
  std::string output_path;
  bool vectors = false;
  DecodeFlags decode;

  void add_to(CLI::App* sub) {
    sub->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--input", input_path, "Source documents or parallel corpus")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--output", output_path, "Cache dump (JSON lines)")->required();
    sub->add_flag("--vectors", vectors, "Include keys and values in slot records");
    decode.add_to(sub);
  }

  void run(const CLI::App& sub, std::ostream& out) {
    const nmt::Checkpoint ckpt = nmt::load_checkpoint(model_path);
    const nmt::Model model = nmt::model_from_checkpoint(ckpt);
    const auto sources = load_sources(input_path);
    decode::DocumentTranslator translator(model, decode.options());
    auto dump = open_output(output_path);
    auto as_list = [](const numeric::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

    for (std::size_t d = 0; d < sources.size(); ++d) {
      const auto encoded = corpus::encode_sources(sources[d], ckpt.source_vocab);
      translator.begin_document();
      for (std::size_t i = 0; i < encoded.size(); ++i) {
        std::vector<nmt::WordId> indicators;
        for (const auto& slot : translator.cache().slots()) indicators.push_back(slot.indicator);
        const decode::Hypothesis hyp = translator.translate_sentence(encoded[i]);
        for (const auto& step : hyp.trace) {
          json rec{{"record", "step"}, {"document", d}, {"sentence", i}, {"t", step.t},
                   {"word", ckpt.target_vocab.token(step.word)}};
          if (step.match.size() != 0) {
            Eigen::Index best = 0;
            step.match.maxCoeff(&best);
            rec["match"] = as_list(step.match);
            rec["match_argmax_indicator"] = ckpt.target_vocab.token(indicators[static_cast<std::size_t>(best)]);
            rec["gate_mean"] = step.gate.mean();
          }
          dump << rec.dump() << '\n';
        }
      }
      const auto ages = translator.cache().ages();
      const auto& slots = translator.cache().slots();
      for (std::size_t s = 0; s < slots.size(); ++s) {
        json rec{{"record", "slot"},
                 {"document", d},
                 {"slot", s},
                 {"indicator", ckpt.target_vocab.token(slots[s].indicator)},
                 {"last_touched", slots[s].last_touched},
                 {"age", ages[s]},
                 {"key_norm", slots[s].key.norm()},
                 {"value_norm", slots[s].value.norm()}};
        if (vectors) {
          rec["key"] = as_list(slots[s].key);
          rec["value"] = as_list(slots[s].value);
        }
        dump << rec.dump() << '\n';
      }
    }
    ManifestInfo info;
    info.inputs = {model_path, input_path};
    info.outputs = {output_path};
    write_manifest(manifest_path_for(output_path), sub, info);
    out << "dumped cache for " << sources.size() << " documents\n";
  }
};

struct Sweep {
  std::string model_path;
  std::string train_path;
  std::string tune_path;
  std::string lexicon_path;
  std::string out_path;
  std::string sizes = "0,4,8,16,25";
  DecodeFlags decode;
  TrainFlags train;

  void add_to(CLI::App* sub) {
    sub->add_option("--model", model_path, "Pre-trained checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--train", train_path, "Fine-tuning corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--tune", tune_path, "Evaluation corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--lexicon", lexicon_path, "Lexicon")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Metrics (JSON lines, one record per size)")->required();
    sub->add_option("--cache-sizes", sizes, "Comma-separated capacities; 0 is the baseline")->capture_default_str();
    decode.add_to(sub, false);
    // Shares --max-len between decoding and the training filter.
    train.epochs = training::TrainConfig{}.finetune_epochs;
    sub->add_option("--epochs", train.epochs, "Fine-tuning epochs")->capture_default_str();
    sub->add_option("--batch", train.batch, "Sentences per update")->capture_default_str();
    sub->add_option("--optimizer", train.optimizer, "Optimizer")
        ->capture_default_str()
        ->check(CLI::IsMember(kOptimizers));
    sub->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
    sub->add_option("--clip", train.clip, "Global gradient-norm clip")->capture_default_str();
    sub->add_option("--seed", train.seed, "RNG seed")->capture_default_str();
  }

  void run(const CLI::App& sub, std::ostream& out) {
    std::vector<std::size_t> capacities;
    std::stringstream ss(sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        capacities.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw ContractError("bad cache size: '" + item + "'");
      }
    }
    if (capacities.empty()) throw ContractError("no cache sizes given");
    const cache::FusionMode fusion = cache::parse_fusion_mode(decode.fusion);
    if (fusion == cache::FusionMode::None) throw ContractError("sweep needs --fusion deep or shallow");

    const nmt::Checkpoint ckpt = nmt::load_checkpoint(model_path);
    const corpus::Vocabularies vocab{ckpt.source_vocab, ckpt.target_vocab};
    const nmt::Model base = nmt::model_from_checkpoint(ckpt);
    const corpus::DocumentCorpus tune = corpus::load_corpus(tune_path);
    const auto train_docs = corpus::encode(corpus::load_corpus(train_path), vocab);
    const auto tune_docs = corpus::encode(tune, vocab);
    const corpus::Lexicon lexicon = corpus::load_lexicon(lexicon_path);
    train.max_len = decode.max_len;

    auto metrics = open_output(out_path);
    for (std::size_t size : capacities) {
      decode::TranslateOptions opts = decode.options();
      opts.cache_capacity = size;
      json rec{{"cache_size", size}};
      nmt::Model model = base;
      if (size == 0) {
        opts.beam.fusion = cache::FusionMode::None;
        rec["fusion"] = "none";
      } else {
        training::FinetuneConfig fc{fusion, size, opts.rule};
        auto result = training::finetune(base, train_docs, tune_docs, fc, train.config(true));
        model = std::move(result.model);
        rec["fusion"] = cache::to_string(fusion);
        rec["finetune_best_epoch"] = result.best_epoch;
      }
      const auto translation =
          decode::translate_corpus(model, vocab.source, vocab.target, tune.source_documents(), opts);
      rec.update(evaluation_record(decode::evaluate(tune, translation.documents, lexicon)));
      metrics << rec.dump() << '\n';
      metrics.flush();
      out << rec.dump() << '\n';
    }
    ManifestInfo info;
    info.seed = train.seed;
    info.inputs = {model_path, train_path, tune_path, lexicon_path};
    info.outputs = {out_path};
    write_manifest(manifest_path_for(out_path), sub, info);
  }
};

// Long flags in `args` that neither the app nor the chosen subcommand knows.
std::vector<std::string> unknown_flags(const CLI::App& app, const std::vector<std::string>& args) {
  const CLI::App* sub = nullptr;
  for (const auto& a : args) {
    if (a.rfind("-", 0) == 0) continue;
    for (const CLI::App* candidate : app.get_subcommands([](const CLI::App*) { return true; })) {
      if (candidate->get_name() == a) sub = candidate;
    }
    if (sub != nullptr) break;
  }
  auto known = [&](const std::string& flag) {
    for (const CLI::App* scope : {&app, sub}) {
      if (scope == nullptr) continue;
      for (const CLI::Option* opt : scope->get_options()) {
        for (const auto& name : opt->get_lnames()) {
          if (flag == name) return true;
        }
      }
    }
    return false;
  };
  std::vector<std::string> out;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0 || a.size() == 2) continue;
    const std::string name = a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2);
    if (!known(name)) out.push_back(a);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Document-level translation with a continuous cache", "cachemt"};
  app.set_config("--config", "", "TOML/INI file with flag values; explicit flags take precedence");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);

  GenData gen;
  Pretrain pre;
  Finetune fine;
  Translate trans;
  Evaluate eval;
  InspectCache inspect;
  Sweep sweep;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic document corpus");
  CLI::App* pre_cmd = app.add_subcommand("pretrain", "Train the base translation model");
  CLI::App* fine_cmd = app.add_subcommand("finetune", "Train the cache fusion parameters with the model frozen");
  CLI::App* trans_cmd = app.add_subcommand("translate", "Translate documents");
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score translations");
  CLI::App* inspect_cmd = app.add_subcommand("inspect-cache", "Dump cache reads and contents while translating");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Fine-tune and evaluate over cache sizes");
  gen.add_to(gen_cmd);
  pre.add_to(pre_cmd);
  fine.add_to(fine_cmd);
  trans.add_to(trans_cmd);
  eval.add_to(eval_cmd);
  inspect.add_to(inspect_cmd);
  sweep.add_to(sweep_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* shown = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    out << shown->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto unknown = unknown_flags(app, args);
    if (unknown.empty()) {
      err << "error: " << e.what() << "\n\n";
    } else {
      err << "error: unknown flag";
      for (const auto& f : unknown) err << ' ' << f;
      err << "\nvalid flags:\n\n";
    }
    const CLI::App* shown = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << shown->help();
    return 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    if (sub == gen_cmd) gen.run(*sub, out);
    if (sub == pre_cmd) pre.run(*sub, out);
    if (sub == fine_cmd) fine.run(*sub, out);
    if (sub == trans_cmd) trans.run(*sub, out);
    if (sub == eval_cmd) eval.run(*sub, out);
    if (sub == inspect_cmd) inspect.run(*sub, out);
    if (sub == sweep_cmd) sweep.run(*sub, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace cachemt::cli

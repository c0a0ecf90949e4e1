#include "cachemt/nmt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "cachemt/error.hpp"

namespace cachemt::nmt {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void write_le_doubles(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      unsigned char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
}

void read_le_doubles(std::istream& in, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double& v : values) {
      unsigned char bytes[8];
      in.read(reinterpret_cast<char*>(bytes), 8);
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      v = std::bit_cast<double>(bits);
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_, what); }

  std::istream& stream() { return in_; }
  void count_line() { ++line_; }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t line_ = 0;
};

std::size_t parse_count(Reader& r, const std::string& header, const std::string& expected) {
  std::istringstream ss(header);
  std::string word;
  std::size_t n = 0;
  std::istringstream want(expected);
  std::string w;
  while (want >> w) {
    if (!(ss >> word) || word != w) r.fail("expected '" + expected + " <n>'");
  }
  if (!(ss >> n)) r.fail("expected a count after '" + expected + "'");
  return n;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);

  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  const auto& c = ckpt.config;
  const std::vector<std::pair<std::string, std::string>> config = {
      {"embedding_dim", std::to_string(c.embedding_dim)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"context_dim", std::to_string(c.context_dim)},
      {"cache_capacity", std::to_string(c.cache_capacity)},
      {"max_sentence_len", std::to_string(c.max_sentence_len)},
      {"beam_width", std::to_string(c.beam_width)},
      {"dropout_rate", format_double(c.dropout_rate)},
  };
  out << "config " << config.size() << '\n';
  for (const auto& [k, v] : config) out << k << '=' << v << '\n';
  for (const auto& [label, vocab] : {std::pair{"source", &ckpt.source_vocab}, std::pair{"target", &ckpt.target_vocab}}) {
    out << "vocab " << label << ' ' << vocab->size() << '\n';
    for (const auto& t : vocab->tokens()) out << t << '\n';
  }
  const auto names = ckpt.params.names();
  out << "tensors " << names.size() << '\n';
  for (const auto& name : names) {
    const auto& entry = ckpt.params.at(name);
    out << "tensor " << name << ' ' << (entry.trainable ? 1 : 0) << ' ' << entry.value.rank();
    for (auto d : entry.value.shape()) out << ' ' << d;
    out << '\n';
    write_le_doubles(out, entry.value.data());
    out << '\n';
  }
  out << "end\n";
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  Reader r(in, path);

  {
    std::istringstream ss(r.line());
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kCheckpointMagic) r.fail("not a checkpoint file");
    if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const std::size_t n_config = parse_count(r, r.line(), "config");
  std::map<std::string, std::string> kv;
  for (std::size_t i = 0; i < n_config; ++i) {
    const std::string s = r.line();
    const auto eq = s.find('=');
    if (eq == std::string::npos) r.fail("expected key=value");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) r.fail(std::string("missing config key ") + key);
    return it->second;
  };
  try {
    ckpt.config.embedding_dim = std::stoull(get("embedding_dim"));
    ckpt.config.hidden_dim = std::stoull(get("hidden_dim"));
    ckpt.config.context_dim = std::stoull(get("context_dim"));
    ckpt.config.cache_capacity = std::stoull(get("cache_capacity"));
    ckpt.config.max_sentence_len = std::stoull(get("max_sentence_len"));
    ckpt.config.beam_width = std::stoull(get("beam_width"));
    ckpt.config.dropout_rate = std::stod(get("dropout_rate"));
  } catch (const std::logic_error&) {
    r.fail("malformed config value");
  }

  for (auto [label, vocab] : {std::pair{"source", &ckpt.source_vocab}, std::pair{"target", &ckpt.target_vocab}}) {
    const std::size_t n = parse_count(r, r.line(), std::string("vocab ") + label);
    if (n < kReservedCount) r.fail("vocabulary lacks reserved symbols");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = r.line();
      if (i < kReservedCount) {
        if (vocab->token(static_cast<WordId>(i)) != tok) r.fail("reserved symbol mismatch");
      } else if (vocab->add(tok) != static_cast<WordId>(i)) {
        r.fail("duplicate vocabulary token: " + tok);
      }
    }
  }

  const std::size_t n_tensors = parse_count(r, r.line(), "tensors");
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::istringstream ss(r.line());
    std::string word;
    std::string name;
    int trainable = 0;
    std::size_t rank = 0;
    if (!(ss >> word >> name >> trainable >> rank) || word != "tensor") r.fail("expected tensor header");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      if (!(ss >> d)) r.fail("truncated tensor shape");
    }
    numeric::Tensor t(shape);
    read_le_doubles(in, t.data());
    char nl = 0;
    if (!in.get(nl) || nl != '\n') r.fail("truncated tensor payload for " + name);
    r.count_line();
    if (ckpt.params.contains(name)) r.fail("duplicate tensor " + name);
    ckpt.params.add(name, std::move(t), trainable != 0);
  }
  if (r.line() != "end") r.fail("missing end marker");
  return ckpt;
}

Checkpoint make_checkpoint(const Model& model, const Vocab& source, const Vocab& target) {
  if (source.size() != model.source_vocab_size() || target.size() != model.target_vocab_size()) {
    throw ContractError("vocabulary sizes do not match the model");
  }
  return Checkpoint{model.config(), source, target, model.params()};
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  return Model(ckpt.config, ckpt.source_vocab.size(), ckpt.target_vocab.size(), ckpt.params);
}

}  // namespace cachemt::nmt

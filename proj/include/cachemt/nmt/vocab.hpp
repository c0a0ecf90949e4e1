#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cachemt::nmt {

using WordId = std::int32_t;

inline constexpr WordId kPad = 0;
inline constexpr WordId kBos = 1;
inline constexpr WordId kEos = 2;
inline constexpr WordId kUnk = 3;
inline constexpr std::size_t kReservedCount = 4;

// Token <-> id bijection. Ids are dense; 0..3 are always the reserved symbols.
class Vocab {
 public:
  Vocab();

  WordId add(const std::string& token);
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  // Unknown tokens map to kUnk.
  WordId id(const std::string& token) const;
  const std::string& token(WordId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<WordId> encode(std::span<const std::string> tokens) const;
  // Stops at the first EOS; skips PAD and BOS.
  std::vector<std::string> decode(std::span<const WordId> ids) const;

  static bool is_reserved(WordId id) { return id >= 0 && id < static_cast<WordId>(kReservedCount); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, WordId> ids_;
};

}  // namespace cachemt::nmt

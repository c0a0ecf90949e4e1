#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cachemt/nmt/decoder_step.hpp"
#include "cachemt/nmt/vocab.hpp"
#include "cachemt/numeric/tensor.hpp"

namespace cachemt::cache {

using nmt::WordId;
using numeric::Vector;

struct CacheSlot {
  Vector key;    // attention context, width l
  Vector value;  // decoder state, width d
  WordId indicator = nmt::kPad;
  std::uint64_t last_touched = 0;
};

// What happens when a word that already owns a slot is written again.
enum class UpdateRule {
  Average,  // key and value become the mean of old and new
  Replace,  // key and value are overwritten (averaging ablation)
};

// Fixed-capacity key-value memory holding one slot per target word.
//
// Writes fill the next empty slot or evict the least recently touched one
// (lowest index on ties). Only writes and updates touch a slot; reads never
// change recency.
class Cache {
 public:
  Cache(std::size_t capacity, std::size_t key_width, std::size_t value_width,
        UpdateRule rule = UpdateRule::Average);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return slots_.size(); }
  bool empty() const noexcept { return slots_.empty(); }
  bool enabled() const noexcept { return capacity_ > 0; }
  std::size_t key_width() const noexcept { return key_width_; }
  std::size_t value_width() const noexcept { return value_width_; }
  UpdateRule rule() const noexcept { return rule_; }
  std::uint64_t stamp() const noexcept { return stamp_; }

  const std::vector<CacheSlot>& slots() const noexcept { return slots_; }
  std::optional<std::size_t> find(WordId word) const;

  // Writes the (context, state, word) triple of every step, in order.
  // Steps whose word is PAD, BOS or EOS are skipped.
  void write(std::span<const nmt::DecoderStep> steps);
  void write(const Vector& key, const Vector& value, WordId word);

  void reset();

  // Recency rank per slot (0 = most recently touched).
  std::vector<std::size_t> ages() const;

  static bool is_writable(WordId word) noexcept {
    return word != nmt::kPad && word != nmt::kBos && word != nmt::kEos;
  }

 private:
  std::size_t least_recent() const;

  std::size_t capacity_;
  std::size_t key_width_;
  std::size_t value_width_;
  UpdateRule rule_;
  std::vector<CacheSlot> slots_;
  std::unordered_map<WordId, std::size_t> index_;
  std::uint64_t stamp_ = 0;
};

// Softmax over query . key for every occupied slot. No parameters, no
// temperature. Throws ContractError on an empty cache.
Vector match(const Vector& query, const Cache& cache);

// Sum of slot values weighted by `probs`.
Vector read(const Vector& probs, const Cache& cache);

}  // namespace cachemt::cache

#include "cachemt/cache/cache.hpp"

#include <algorithm>
#include <numeric>

#include "cachemt/error.hpp"
#include "cachemt/numeric/ops.hpp"

namespace cachemt::cache {

Cache::Cache(std::size_t capacity, std::size_t key_width, std::size_t value_width, UpdateRule rule)
    : capacity_(capacity), key_width_(key_width), value_width_(value_width), rule_(rule) {
  slots_.reserve(capacity_);
}

std::optional<std::size_t> Cache::find(WordId word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Cache::least_recent() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < slots_.size(); ++i) {
    if (slots_[i].last_touched < slots_[best].last_touched) best = i;
  }
  return best;
}

void Cache::write(const Vector& key, const Vector& value, WordId word) {
  if (capacity_ == 0 || !is_writable(word)) return;
  if (static_cast<std::size_t>(key.size()) != key_width_ || static_cast<std::size_t>(value.size()) != value_width_) {
    throw ContractError("cache write: key/value width mismatch");
  }
  ++stamp_;
  if (auto hit = find(word)) {
    CacheSlot& slot = slots_[*hit];
    if (rule_ == UpdateRule::Average) {
      slot.key = (slot.key + key) / 2.0;
      slot.value = (slot.value + value) / 2.0;
    } else {
      slot.key = key;
      slot.value = value;
    }
    slot.last_touched = stamp_;
    return;
  }
  std::size_t target = slots_.size();
  if (slots_.size() < capacity_) {
    slots_.push_back(CacheSlot{});
  } else {
    target = least_recent();
    index_.erase(slots_[target].indicator);
  }
  slots_[target] = CacheSlot{key, value, word, stamp_};
  index_[word] = target;
}

void Cache::write(std::span<const nmt::DecoderStep> steps) {
  for (const auto& step : steps) write(step.context, step.state, step.word);
}

void Cache::reset() {
  slots_.clear();
  index_.clear();
  stamp_ = 0;
}

std::vector<std::size_t> Cache::ages() const {
  std::vector<std::size_t> order(slots_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    return slots_[a].last_touched > slots_[b].last_touched;
  });
  std::vector<std::size_t> age(slots_.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) age[order[rank]] = rank;
  return age;
}

Vector match(const Vector& query, const Cache& cache) {
  if (cache.empty()) throw ContractError("cache_match on an empty cache");
  if (static_cast<std::size_t>(query.size()) != cache.key_width()) throw ContractError("cache_match: width mismatch");
  const auto& slots = cache.slots();
  Vector scores(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) scores[static_cast<Eigen::Index>(i)] = query.dot(slots[i].key);
  return numeric::softmax_stable(scores);
}

Vector read(const Vector& probs, const Cache& cache) {
  const auto& slots = cache.slots();
  if (static_cast<std::size_t>(probs.size()) != slots.size()) {
    throw ContractError("cache_read: one probability per occupied slot is required");
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(cache.value_width()));
  for (std::size_t i = 0; i < slots.size(); ++i) out += probs[static_cast<Eigen::Index>(i)] * slots[i].value;
  return out;
}

}  // namespace cachemt::cache

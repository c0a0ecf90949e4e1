#include "cachemt/numeric/parameter_store.hpp"

#include <cstring>

#include "cachemt/error.hpp"

namespace cachemt::numeric {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

Tensor& ParameterStore::add(const std::string& name, std::vector<std::size_t> shape, bool trainable) {
  return add(name, Tensor(std::move(shape)), trainable);
}

Tensor& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Entry entry;
  entry.grad = Tensor(value.shape());
  entry.value = std::move(value);
  entry.trainable = trainable;
  return entries_.emplace(name, std::move(entry)).first->second.value;
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::set_trainable(const std::string& name, bool trainable) { at(name).trainable = trainable; }

void ParameterStore::set_trainable_prefix(const std::string& prefix, bool trainable) {
  for (auto& [name, entry] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) entry.trainable = trainable;
  }
}

void ParameterStore::set_all_trainable(bool trainable) {
  for (auto& [name, entry] : entries_) entry.trainable = trainable;
}

void ParameterStore::zero_grad() {
  for (auto& [name, entry] : entries_) entry.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, entry] : entries_) n += entry.value.size();
  return n;
}

std::size_t ParameterStore::trainable_scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) n += entry.value.size();
  }
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

std::uint64_t ParameterStore::fingerprint() const { return fingerprint_prefix(""); }

std::uint64_t ParameterStore::fingerprint_prefix(const std::string& prefix) const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, entry] : entries_) {
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    fnv_mix(h, name.data(), name.size());
    const auto data = entry.value.data();
    fnv_mix(h, data.data(), data.size() * sizeof(double));
  }
  return h;
}

}  // namespace cachemt::numeric

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cachemt/numeric/tensor.hpp"

namespace cachemt::numeric {

// Named parameters with gradient buffers and per-parameter trainable flags.
// Iteration order is by name, so every traversal is deterministic.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, std::vector<std::size_t> shape, bool trainable = true);
  Tensor& add(const std::string& name, Tensor value, bool trainable = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  void set_trainable(const std::string& name, bool trainable);
  // Applies to every parameter whose name starts with `prefix`.
  void set_trainable_prefix(const std::string& prefix, bool trainable);
  void set_all_trainable(bool trainable);
  void zero_grad();

  std::size_t scalar_count() const;
  std::size_t trainable_scalar_count() const;
  std::vector<std::string> names() const;

  // FNV-1a over names and value bytes; equal fingerprints across a training
  // pass are used to assert the freeze contract.
  std::uint64_t fingerprint() const;
  std::uint64_t fingerprint_prefix(const std::string& prefix) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace cachemt::numeric

#pragma once

#include <cstddef>

#include "cachemt/nmt/vocab.hpp"
#include "cachemt/numeric/tensor.hpp"

namespace cachemt::nmt {

// What one decoding step produced. (context, state, word) is the triple the
// cache stores once the sentence is finished.
struct DecoderStep {
  std::size_t t = 0;
  numeric::Vector context;   // c_t, width l
  numeric::Vector state;     // s_t, width d
  numeric::Vector combined;  // state after cache fusion; equals `state` without a cache read
  numeric::Vector gate;      // fusion weights; all zeros when the cache was not read
  WordId word = kPad;
  numeric::Vector match;     // matching distribution over occupied slots, empty if not read
};

}  // namespace cachemt::nmt

#pragma once

#include "truthsr/dataset.hpp"
#include "truthsr/embedding_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace truthsr {

struct SynthOptions {
  int dim = 64;             // text and image embedding dimension
  int len_min = 8;          // per-user sequence length range, inclusive
  int len_max = 15;
  double noise = 0.6;       // topic jitter for review/image embeddings
  double missing_prob = 0;  // chance a position has no review/image
};

/// Planted-structure dataset plus matching stub embeddings and the ground
/// truth transition table (item index k is named "i<k>"; next[k] is the
/// planted successor of item k).
struct SyntheticData {
  Dataset dataset;
  EmbeddingStore store;
  std::vector<std::string> item_names;
  std::vector<int> next;
};

/// Deterministic generator. Each user walks a planted cycle: with probability
/// pattern_strength the next item is next[current], otherwise uniform. Review
/// and image embeddings of the same interaction share the item's topic vector,
/// so the multimodal view and the cross-modal alignment loss carry signal.
SyntheticData generate_synthetic(std::uint64_t seed, int users, int items,
                                 double pattern_strength, const SynthOptions& opt = {});

}  // namespace truthsr

#pragma once

#include "truthsr/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace truthsr {

/// One implicit-feedback event. Empty review_id/image_id means the user left
/// no review/image for this interaction.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
  std::string review_id;
  std::string image_id;
};

/// Immutable interaction table with per-user and per-item chronological
/// indexes and a contiguous item vocabulary (first-appearance order).
class Dataset {
 public:
  Dataset() = default;

  /// Builds indexes and the vocabulary from the given interactions.
  /// Duplicate (user, item, timestamp) triples are dropped, keeping the first.
  /// Requires at least one interaction and at least two distinct items.
  static Dataset build(std::vector<Interaction> interactions);

  /// Same, but with an externally supplied vocabulary (superset of the items
  /// actually present). Used for split views that share one vocabulary.
  static Dataset build_with_vocab(std::vector<Interaction> interactions,
                                  std::vector<std::string> vocab);

  const std::vector<Interaction>& interactions() const { return interactions_; }
  std::size_t size() const { return interactions_.size(); }

  const std::vector<std::string>& users() const { return user_names_; }
  /// Positions into interactions(), sorted by timestamp; ties keep input order.
  const std::vector<std::size_t>& user_positions(const std::string& user) const;
  /// Positions into interactions(), chronological, for one item.
  const std::vector<std::size_t>& item_positions(const std::string& item) const;
  bool has_item(const std::string& item) const { return item_vocab_.find(item) != item_vocab_.end(); }

  int item_count() const { return static_cast<int>(item_names_.size()); }
  int item_id(const std::string& item) const;
  const std::string& item_name(int id) const { return item_names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& item_names() const { return item_names_; }

 private:
  void build_indexes();

  std::vector<Interaction> interactions_;
  std::vector<std::string> user_names_;
  std::unordered_map<std::string, std::vector<std::size_t>> user_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> item_index_;
  std::vector<std::string> item_names_;
  std::unordered_map<std::string, int> item_vocab_;
};

/// Parses a .jsonl interaction file (one JSON object per line, fields
/// user/item/ts plus optional review_id/image_id). Malformed lines raise
/// ParseError naming the line; an empty file raises DataError.
Dataset load_interactions(const std::filesystem::path& path);

/// Writes the same format, one interaction per line in table order.
/// Deterministic: identical datasets produce byte-identical files.
void save_interactions(const Dataset& d, const std::filesystem::path& path);

/// Iterated k-core: removes users and items with fewer than k interactions
/// until a fixpoint is reached, then rebuilds the vocabulary.
Dataset k_core_filter(const Dataset& d, int k);

/// Per-user leave-one-out material: the training prefix plus the two held-out
/// interactions (second-to-last for validation, last for test).
struct UserSplit {
  std::string user;
  std::vector<Interaction> train_seq;
  Interaction val_target;
  Interaction test_target;
};

/// Result of chronological_split(). All views share the source vocabulary.
struct SplitDataset {
  Dataset train;
  std::vector<UserSplit> users;
  std::vector<std::string> item_names;
  std::unordered_map<std::string, int> item_vocab;
  std::size_t dropped_users = 0;

  int item_count() const { return static_cast<int>(item_names.size()); }
  int item_id(const std::string& item) const;
};

/// Leave-one-out split: per user, last interaction is the test target,
/// second-to-last the validation target, the rest train. Users with fewer
/// than three interactions are dropped and counted.
SplitDataset chronological_split(const Dataset& d);

}  // namespace truthsr

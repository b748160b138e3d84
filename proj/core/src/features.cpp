#include "truthsr/features.hpp"

#include <algorithm>
#include <unordered_set>

namespace truthsr {

namespace {

// Keeps the most recent max_len entries, preserving order.
template <typename It>
std::vector<const Interaction*> tail_context(It begin, It end, int max_len) {
  std::vector<const Interaction*> out;
  const auto total = static_cast<std::size_t>(std::distance(begin, end));
  const std::size_t keep = std::min<std::size_t>(total, static_cast<std::size_t>(max_len));
  out.reserve(keep);
  for (It it = begin + static_cast<std::ptrdiff_t>(total - keep); it != end; ++it) {
    out.push_back(&*it);
  }
  return out;
}

}  // namespace

std::vector<Sample> make_train_samples(const SplitDataset& split, int max_len) {
  check_data(max_len >= 1, "make_train_samples: max_len must be positive");
  std::vector<Sample> out;
  for (const UserSplit& u : split.users) {
    for (std::size_t t = 1; t < u.train_seq.size(); ++t) {
      Sample s;
      s.user = &u.user;
      s.context = tail_context(u.train_seq.begin(),
                               u.train_seq.begin() + static_cast<std::ptrdiff_t>(t), max_len);
      s.target = split.item_id(u.train_seq[t].item_id);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sample> make_val_samples(const SplitDataset& split, int max_len) {
  check_data(max_len >= 1, "make_val_samples: max_len must be positive");
  std::vector<Sample> out;
  out.reserve(split.users.size());
  for (const UserSplit& u : split.users) {
    Sample s;
    s.user = &u.user;
    s.context = tail_context(u.train_seq.begin(), u.train_seq.end(), max_len);
    s.target = split.item_id(u.val_target.item_id);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> make_test_samples(const SplitDataset& split, int max_len) {
  check_data(max_len >= 1, "make_test_samples: max_len must be positive");
  std::vector<Sample> out;
  out.reserve(split.users.size());
  for (const UserSplit& u : split.users) {
    Sample s;
    s.user = &u.user;
    s.context = tail_context(u.train_seq.begin(), u.train_seq.end(), max_len);
    s.context.push_back(&u.val_target);
    if (static_cast<int>(s.context.size()) > max_len) {
      s.context.erase(s.context.begin());
    }
    s.target = split.item_id(u.test_target.item_id);
    out.push_back(std::move(s));
  }
  return out;
}

ReviewBankIndex::ReviewBankIndex(const SplitDataset& split, const EmbeddingStore& store) {
  by_item_.resize(static_cast<std::size_t>(split.item_count()));
  const Dataset& train = split.train;
  // item_positions is chronological, so each bank ends up oldest -> newest.
  // Only items that actually occur in the train segments have positions.
  std::unordered_set<std::string> seen;
  for (const Interaction& first : train.interactions()) {
    if (!seen.insert(first.item_id).second) continue;
    auto& bank = by_item_[static_cast<std::size_t>(split.item_id(first.item_id))];
    for (std::size_t pos : train.item_positions(first.item_id)) {
      const Interaction& it = train.interactions()[pos];
      if (it.review_id.empty()) continue;
      const VecF* v = store.find(EmbeddingKind::Text, it.review_id);
      if (v == nullptr) continue;
      bank.push_back(Entry{&it.user_id, v});
    }
  }
}

std::vector<const VecF*> ReviewBankIndex::query(int item, const std::string& user,
                                                int bank_max) const {
  check_data(item >= 0 && item < static_cast<int>(by_item_.size()),
             "review bank: item id out of range");
  check_data(bank_max >= 1, "review bank: bank_max must be positive");
  std::vector<const VecF*> out;
  const auto& bank = by_item_[static_cast<std::size_t>(item)];
  for (auto it = bank.rbegin(); it != bank.rend(); ++it) {
    if (*it->user == user) continue;
    out.push_back(it->vec);
    if (static_cast<int>(out.size()) == bank_max) break;
  }
  return out;
}

}  // namespace truthsr

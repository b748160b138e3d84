#pragma once

#include "truthsr/dataset.hpp"
#include "truthsr/embedding_store.hpp"
#include "truthsr/model.hpp"

#include <string>
#include <vector>

namespace truthsr {

/// One next-item prediction task: a chronological context (oldest first,
/// already truncated to max_len) and the vocabulary id of the target item.
/// Context pointers borrow from the SplitDataset that produced the sample.
struct Sample {
  const std::string* user = nullptr;
  std::vector<const Interaction*> context;
  int target = -1;
};

/// Teacher forcing over each user's train segment: every proper prefix
/// predicts the next train item.
std::vector<Sample> make_train_samples(const SplitDataset& split, int max_len);

/// One sample per user: context = train segment, target = validation item.
std::vector<Sample> make_val_samples(const SplitDataset& split, int max_len);

/// One sample per user: context = train segment plus the validation
/// interaction, target = test item.
std::vector<Sample> make_test_samples(const SplitDataset& split, int max_len);

/// Per-item banks of other users' review vectors, built once from the train
/// segments. Entries are chronological; queries walk from the newest, skip
/// the asking user's own reviews, and cap the result at bank_max (newest
/// first). Borrows from the split and the store; keep both alive.
class ReviewBankIndex {
 public:
  ReviewBankIndex() = default;
  ReviewBankIndex(const SplitDataset& split, const EmbeddingStore& store);

  std::vector<const VecF*> query(int item, const std::string& user, int bank_max) const;

 private:
  struct Entry {
    const std::string* user;
    const VecF* vec;
  };
  std::vector<std::vector<Entry>> by_item_;
};

/// Dense per-sample inputs in the compute scalar type. Missing review/image
/// vectors become zero columns; has_image marks positions whose image is
/// present (only those enter the alignment loss).
template <typename T>
struct FeatureBundle {
  std::vector<int> ids;          // context item ids, oldest first
  Mat<T> t_u;                    // d_t x N review vectors
  Mat<T> z;                      // d_v x N image vectors
  std::vector<char> has_image;   // N flags
  std::vector<Mat<T>> banks;     // per position: d_t x M bank (M may be 0)
};

template <typename T>
FeatureBundle<T> build_features(const Sample& s, const SplitDataset& split,
                                const EmbeddingStore& store,
                                const ReviewBankIndex& banks, const ModelConfig& cfg) {
  check_data(!s.context.empty(), "build_features: empty context");
  const std::size_t n = s.context.size();

  FeatureBundle<T> f;
  f.ids.reserve(n);
  for (const Interaction* it : s.context) {
    f.ids.push_back(split.item_id(it->item_id));
  }
  if (!cfg.uses_mm_view()) return f;

  f.t_u = Mat<T>::Zero(cfg.d_t, static_cast<Eigen::Index>(n));
  f.z = Mat<T>::Zero(cfg.d_v, static_cast<Eigen::Index>(n));
  f.has_image.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Interaction* it = s.context[i];
    if (!it->review_id.empty()) {
      if (const VecF* v = store.find(EmbeddingKind::Text, it->review_id)) {
        check_dims(v->size() == cfg.d_t, "build_features: text dim mismatch");
        f.t_u.col(static_cast<Eigen::Index>(i)) = v->cast<T>();
      }
    }
    if (!it->image_id.empty()) {
      if (const VecF* v = store.find(EmbeddingKind::Image, it->image_id)) {
        check_dims(v->size() == cfg.d_v, "build_features: image dim mismatch");
        f.z.col(static_cast<Eigen::Index>(i)) = v->cast<T>();
        f.has_image[i] = 1;
      }
    }
  }

  if (cfg.coattention) {
    f.banks.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto vecs = banks.query(f.ids[i], *s.user, cfg.bank_max);
      Mat<T> bank(cfg.d_t, static_cast<Eigen::Index>(vecs.size()));
      for (std::size_t m = 0; m < vecs.size(); ++m) {
        check_dims(vecs[m]->size() == cfg.d_t, "build_features: bank dim mismatch");
        bank.col(static_cast<Eigen::Index>(m)) = vecs[m]->template cast<T>();
      }
      f.banks.push_back(std::move(bank));
    }
  }
  return f;
}

}  // namespace truthsr

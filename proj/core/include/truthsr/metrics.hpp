#pragma once

#include "truthsr/forward.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace truthsr {

/// Full ordering of the item vocabulary for one prediction. The per-item
/// arrays are indexed by item id, not by rank position.
struct RankingResult {
  std::vector<int> order;  // item ids, best first
  VecD belief;             // per-item belief mass (or probability)
  VecD expected_prob;      // per-item alpha_i / D (or probability)
  double uncertainty = 0;  // joint uncertainty mass (0 for softmax heads)
};

/// Sorts all items by score descending, item id ascending on ties. Items in
/// `mask` (the user's history, when masking is on) sort after all others.
RankingResult full_rank(const VecD& score, const VecD& expected_prob, double uncertainty,
                        std::span<const int> mask = {});

/// 1-based position of the target in the ranking.
int rank_of(const RankingResult& r, int target);

/// 1 iff the target sits within the top k.
double recall_at_k(const RankingResult& r, int target, int k);

/// 1/log2(rank+1) when the target sits within the top k, else 0. With a
/// single relevant item the ideal DCG is 1, so this is already normalized.
double ndcg_at_k(const RankingResult& r, int target, int k);

/// Ranks one sample with the model (inference path).
template <typename T>
RankingResult full_rank_sample(const ModelParams<T>& params, const FeatureBundle<T>& f,
                               bool mask_history) {
  const ForwardOutput<T> out = forward_sample(params, f);
  std::vector<int> mask;
  if (mask_history) mask = f.ids;
  return full_rank(out.rank_score.template cast<double>(),
                   out.expected_prob.template cast<double>(),
                   static_cast<double>(out.uncertainty), mask);
}

/// Aggregated metrics over a sample set.
struct MetricsReport {
  std::vector<int> ks;
  std::vector<double> recall;        // aligned with ks
  std::vector<double> ndcg;          // aligned with ks
  double mean_uncertainty = 0;
  std::size_t samples = 0;
  std::vector<double> uncertainties; // per sample, in sample order
  std::vector<double> hits10;        // per-sample Recall@10, in sample order

  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

/// One row of the uncertainty report: an equal-width slice of [0, 1] with
/// its population and that population's Recall@10.
struct UncertaintyBucket {
  double lo = 0, hi = 0;
  std::size_t count = 0;
  double recall10 = 0;
};

/// Partitions predictions into `buckets` equal-width uncertainty slices
/// (uncertainty 1.0 lands in the last one).
std::vector<UncertaintyBucket> uncertainty_report(std::span<const double> uncertainties,
                                                  std::span<const double> hits10, int buckets);

/// Metrics document: {"k": {"10": {"recall": ..., "ndcg": ...}, ...},
/// "mean_uncertainty": ..., "buckets": [...]}. Deterministic bytes for
/// identical inputs.
std::string metrics_to_json(const MetricsReport& report,
                            const std::vector<UncertaintyBucket>& buckets);

namespace detail {
/// Worker count: min(TRUTHSR_THREADS, hardware concurrency, jobs), >= 1.
int worker_count(std::size_t jobs);
}  // namespace detail

/// Evaluates the model on a sample set. Parallel over samples; every sample
/// writes to its own slot and the reduction runs in sample order, so results
/// do not depend on the worker count.
template <typename T>
MetricsReport evaluate(const ModelParams<T>& params, const SplitDataset& split,
                       const EmbeddingStore& store, const ReviewBankIndex& banks,
                       std::span<const Sample> samples, std::span<const int> ks,
                       bool mask_history) {
  check_data(!samples.empty(), "evaluate: no samples");
  for (int k : ks) check_data(k >= 1, "evaluate: k must be >= 1");

  struct Slot {
    std::vector<double> recall, ndcg;
    double hit10 = 0;
    double uncertainty = 0;
  };
  std::vector<Slot> slots(samples.size());

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const FeatureBundle<T> f = build_features<T>(samples[i], split, store, banks, params.cfg);
      const RankingResult r = full_rank_sample(params, f, mask_history);
      Slot& slot = slots[i];
      slot.recall.reserve(ks.size());
      slot.ndcg.reserve(ks.size());
      for (int k : ks) {
        slot.recall.push_back(recall_at_k(r, samples[i].target, k));
        slot.ndcg.push_back(ndcg_at_k(r, samples[i].target, k));
      }
      slot.hit10 = recall_at_k(r, samples[i].target, 10);
      slot.uncertainty = r.uncertainty;
    }
  };

  const int workers = detail::worker_count(samples.size());
  if (workers <= 1) {
    run_range(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (samples.size() + static_cast<std::size_t>(workers) - 1) /
                              static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(samples.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  MetricsReport rep;
  rep.ks.assign(ks.begin(), ks.end());
  rep.recall.assign(ks.size(), 0.0);
  rep.ndcg.assign(ks.size(), 0.0);
  rep.samples = samples.size();
  rep.uncertainties.reserve(samples.size());
  rep.hits10.reserve(samples.size());
  double c_sum = 0;
  for (const Slot& slot : slots) {
    for (std::size_t j = 0; j < ks.size(); ++j) {
      rep.recall[j] += slot.recall[j];
      rep.ndcg[j] += slot.ndcg[j];
    }
    c_sum += slot.uncertainty;
    rep.uncertainties.push_back(slot.uncertainty);
    rep.hits10.push_back(slot.hit10);
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t j = 0; j < ks.size(); ++j) {
    rep.recall[j] *= inv;
    rep.ndcg[j] *= inv;
  }
  rep.mean_uncertainty = c_sum * inv;
  return rep;
}

}  // namespace truthsr

#include "truthsr/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace truthsr {

RankingResult full_rank(const VecD& score, const VecD& expected_prob, double uncertainty,
                        std::span<const int> mask) {
  check_dims(score.size() >= 1, "full_rank: empty score vector");
  check_dims(score.size() == expected_prob.size(), "full_rank: score/probability size mismatch");
  check_data(score.allFinite(), "full_rank: non-finite score");

  std::vector<char> masked(static_cast<std::size_t>(score.size()), 0);
  for (int id : mask) {
    check_data(id >= 0 && id < score.size(), "full_rank: mask id out of range");
    masked[static_cast<std::size_t>(id)] = 1;
  }

  RankingResult r;
  r.order.resize(static_cast<std::size_t>(score.size()));
  std::iota(r.order.begin(), r.order.end(), 0);
  std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    const char ma = masked[static_cast<std::size_t>(a)];
    const char mb = masked[static_cast<std::size_t>(b)];
    if (ma != mb) return ma < mb;
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  r.belief = score;
  r.expected_prob = expected_prob;
  r.uncertainty = uncertainty;
  return r;
}

int rank_of(const RankingResult& r, int target) {
  check_data(target >= 0 && target < static_cast<int>(r.order.size()),
             "rank_of: target outside vocabulary");
  const auto it = std::find(r.order.begin(), r.order.end(), target);
  return static_cast<int>(it - r.order.begin()) + 1;
}

double recall_at_k(const RankingResult& r, int target, int k) {
  check_data(k >= 1, "recall_at_k: k must be >= 1");
  return rank_of(r, target) <= k ? 1.0 : 0.0;
}

double ndcg_at_k(const RankingResult& r, int target, int k) {
  check_data(k >= 1, "ndcg_at_k: k must be >= 1");
  const int rank = rank_of(r, target);
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double MetricsReport::recall_at(int k) const {
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] == k) return recall[j];
  }
  throw DataError("metrics report does not cover k=" + std::to_string(k));
}

double MetricsReport::ndcg_at(int k) const {
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] == k) return ndcg[j];
  }
  throw DataError("metrics report does not cover k=" + std::to_string(k));
}

std::vector<UncertaintyBucket> uncertainty_report(std::span<const double> uncertainties,
                                                  std::span<const double> hits10, int buckets) {
  check_data(buckets >= 2, "uncertainty_report: need at least 2 buckets");
  check_dims(uncertainties.size() == hits10.size(),
             "uncertainty_report: uncertainty/hit count mismatch");

  std::vector<UncertaintyBucket> out(static_cast<std::size_t>(buckets));
  const double width = 1.0 / static_cast<double>(buckets);
  for (int b = 0; b < buckets; ++b) {
    out[static_cast<std::size_t>(b)].lo = width * b;
    out[static_cast<std::size_t>(b)].hi = b + 1 == buckets ? 1.0 : width * (b + 1);
  }
  for (std::size_t i = 0; i < uncertainties.size(); ++i) {
    const double c = uncertainties[i];
    check_data(c >= 0.0 && c <= 1.0, "uncertainty_report: uncertainty outside [0, 1]");
    int b = static_cast<int>(c / width);
    if (b >= buckets) b = buckets - 1;  // c == 1.0
    auto& bucket = out[static_cast<std::size_t>(b)];
    ++bucket.count;
    bucket.recall10 += hits10[i];
  }
  for (auto& bucket : out) {
    if (bucket.count > 0) bucket.recall10 /= static_cast<double>(bucket.count);
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& report,
                            const std::vector<UncertaintyBucket>& buckets) {
  nlohmann::json doc;
  nlohmann::json ks = nlohmann::json::object();
  for (std::size_t j = 0; j < report.ks.size(); ++j) {
    ks[std::to_string(report.ks[j])] = {{"recall", report.recall[j]},
                                        {"ndcg", report.ndcg[j]}};
  }
  doc["k"] = std::move(ks);
  doc["mean_uncertainty"] = report.mean_uncertainty;
  doc["samples"] = report.samples;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& b : buckets) {
    rows.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"recall10", b.recall10}});
  }
  doc["buckets"] = std::move(rows);
  return doc.dump(2) + "\n";
}

namespace detail {

int worker_count(std::size_t jobs) {
  if (jobs <= 1) return 1;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  long limit = static_cast<long>(hw);
  if (const char* env = std::getenv("TRUTHSR_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || parsed < 1) {
      throw DataError("TRUTHSR_THREADS must be a positive integer");
    }
    limit = parsed;
  }
  const long cap = std::min<long>(limit, static_cast<long>(jobs));
  return static_cast<int>(std::max<long>(1, cap));
}

}  // namespace detail

}  // namespace truthsr

#pragma once

#include "truthsr/metrics.hpp"
#include "truthsr/synthetic.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace truthsr {

/// Optimization settings wrapped around the model shape.
struct TrainConfig {
  ModelConfig model;
  double lr = 1e-2;
  int epochs = 100;
  int batch_size = 32;
  int eval_every = 10;
  std::uint64_t seed = 7;

  void validate() const {
    model.validate();
    check_data(lr > 0.0, "train config: lr must be positive");
    check_data(epochs >= 0, "train config: epochs must be nonnegative");
    check_data(batch_size >= 1, "train config: batch_size must be positive");
    check_data(eval_every >= 1, "train config: eval_every must be positive");
  }
};

/// Per-parameter accumulated squared gradients (same shapes as the model).
template <typename T>
struct AdagradState {
  ModelParams<T> g2;
  double eps = 1e-10;
};

template <typename T>
AdagradState<T> make_adagrad(const ModelParams<T>& params) {
  return {zeros_like(params), 1e-10};
}

/// G += g.g; theta -= lr * g / (sqrt(G) + eps), elementwise.
template <typename T>
void adagrad_step(ModelParams<T>& params, const ModelParams<T>& grads, AdagradState<T>& state,
                  double lr) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto a = state.g2.tensors();
  check_dims(p.size() == g.size() && p.size() == a.size(), "adagrad_step: tensor sets differ");
  for (std::size_t i = 0; i < p.size(); ++i) {
    check_dims(p[i].rows == g[i].rows && p[i].cols == g[i].cols, "adagrad_step: shape mismatch");
    const Eigen::Index n = p[i].size();
    for (Eigen::Index j = 0; j < n; ++j) {
      const T gj = g[i].data[j];
      a[i].data[j] += gj * gj;
      p[i].data[j] -= static_cast<T>(lr) * gj /
                      (std::sqrt(a[i].data[j]) + static_cast<T>(state.eps));
    }
  }
}

/// Mean gradients and mean loss of one batch.
template <typename T>
struct BatchGradients {
  ModelParams<T> grads;
  double loss = 0;
};

/// Builds one tape per sample, accumulates leaf gradients in sample order,
/// and divides by the batch size. Errors are wrapped with the sample index.
template <typename T>
BatchGradients<T> compute_gradients(const ModelParams<T>& params, std::span<const Sample> batch,
                                    const SplitDataset& split, const EmbeddingStore& store,
                                    const ReviewBankIndex& banks) {
  check_data(!batch.empty(), "compute_gradients: empty batch");
  BatchGradients<T> out{zeros_like(params), 0.0};
  double loss_sum = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      Tape<T> tape;
      TapeLeaves<T> leaves = make_leaves(tape, params, out.grads);
      const FeatureBundle<T> f = build_features<T>(batch[i], split, store, banks, params.cfg);
      const Var loss = tape_forward_sample(tape, leaves, params.cfg, f, batch[i].target);
      loss_sum += static_cast<double>(tape.scalar(loss));
      tape.backward(loss);
    } catch (const Error& e) {
      throw ModelError("sample " + std::to_string(i) + " (user " + *batch[i].user +
                       "): " + e.what());
    }
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  for (auto& ref : out.grads.tensors()) {
    for (Eigen::Index j = 0; j < ref.size(); ++j) ref.data[j] *= inv;
  }
  out.loss = loss_sum / static_cast<double>(batch.size());
  return out;
}

/// One line of the fit log.
struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  bool evaluated = false;
  double val_recall10 = 0;
  double val_ndcg10 = 0;
};

template <typename T>
struct FitResult {
  ModelParams<T> params;  // snapshot with the best validation Recall@10
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_recall10 = 0;
};

/// Deterministic training loop: seeded epoch shuffles, fixed batch order,
/// Adagrad updates, periodic validation, best-on-validation selection.
/// Validation runs every eval_every epochs and always on the final epoch.
template <typename T>
FitResult<T> fit(const SplitDataset& split, const EmbeddingStore& store,
                 const TrainConfig& cfg) {
  cfg.validate();
  ModelParams<T> params = init_params<T>(cfg.model, cfg.seed);
  FitResult<T> out;
  out.params = params;
  if (cfg.epochs == 0) return out;

  const ReviewBankIndex banks(split, store);
  const std::vector<Sample> train = make_train_samples(split, cfg.model.max_len);
  check_data(!train.empty(), "fit: no training samples (all train segments have length 1)");
  const std::vector<Sample> val = make_val_samples(split, cfg.model.max_len);
  const std::array<int, 1> ks{10};

  AdagradState<T> opt = make_adagrad(params);
  Rng shuffle_rng(mix_seed(cfg.seed, fnv1a64("epoch-shuffle")));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample> batch;
      batch.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) batch.push_back(train[order[i]]);
      try {
        const BatchGradients<T> bg = compute_gradients(params, std::span<const Sample>(batch),
                                                       split, store, banks);
        adagrad_step(params, bg.grads, opt, cfg.lr);
        loss_sum += bg.loss;
      } catch (const Error& e) {
        throw ModelError("epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batches) + ": " + e.what());
      }
      ++batches;
    }
    if (!all_finite(params)) {
      throw ModelError("epoch " + std::to_string(epoch) + ": non-finite parameters after update");
    }

    EpochLog lg;
    lg.epoch = epoch;
    lg.train_loss = loss_sum / static_cast<double>(batches);
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const MetricsReport rep =
          evaluate(params, split, store, banks, std::span<const Sample>(val),
                   std::span<const int>(ks), false);
      lg.evaluated = true;
      lg.val_recall10 = rep.recall_at(10);
      lg.val_ndcg10 = rep.ndcg_at(10);
      if (lg.val_recall10 > best) {
        best = lg.val_recall10;
        out.params = params;
        out.best_epoch = epoch;
        out.best_recall10 = lg.val_recall10;
      }
    }
    out.log.push_back(lg);
  }
  return out;
}

// ---- gradient verification ----

struct GradCheckGroup {
  std::string group;
  double max_rel_err = 0;
  Eigen::Index entries = 0;  // coordinates actually compared
  Eigen::Index skipped = 0;  // coordinates straddling a rectifier kink
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double tolerance = 1e-5;
  bool pass = false;
};

std::string format_report(const GradCheckReport& report);

/// Compares tape gradients against central finite differences of the
/// inference path on a tiny synthetic instance, in 64-bit arithmetic.
/// The evidence head rectifies its scores, so a coordinate whose step
/// straddles that kink has no valid central difference; such coordinates
/// are detected by comparing two step sizes and reported as skipped
/// instead of polluting the error. `corrupt_group` deliberately offsets
/// that group's analytic gradients (test fixture proving the harness
/// catches a broken backward pass).
GradCheckReport grad_check(std::uint64_t seed, const std::string& corrupt_group = "");

}  // namespace truthsr

// Acceptance gate for the full pipeline. Runs ten self-contained criteria,
// prints one PASS/FAIL line per criterion plus the measured numbers behind
// it, and exits nonzero if any criterion fails. Every tolerance and
// threshold is pinned next to the check it guards.

#include "truthsr/checkpoint.hpp"
#include "truthsr/evidential.hpp"
#include "truthsr/features.hpp"
#include "truthsr/forward.hpp"
#include "truthsr/metrics.hpp"
#include "truthsr/rng.hpp"
#include "truthsr/special.hpp"
#include "truthsr/synthetic.hpp"
#include "truthsr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace {

using namespace truthsr;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Accumulates expectations for one criterion; failures print immediately so
/// the log shows exactly which expectation broke.
struct Gate {
  bool ok = true;

  void expect(bool cond, const char* what) {
    if (!cond) {
      ok = false;
      std::printf("        unmet: %s\n", what);
    }
  }
};

// ---------------------------------------------------------------------------
// 1. Opinion algebra invariants over random evidence.

bool opinion_algebra() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr int kTrials = 10000;
  constexpr double kMassTol = 1e-9;
  constexpr double kCommuteTol = 1e-12;
  constexpr double kIdentityTol = 1e-12;
  constexpr double kRoundTripTol = 1e-9;
  constexpr double kBudgetSeconds = 5.0;

  Rng rng(fnv1a64("opinion-algebra"));
  double worst_mass = 0, worst_commute = 0, worst_identity = 0, worst_round = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const int classes = static_cast<int>(rng.uniform_int(2, 50));
    // Mix hard zeros, everyday magnitudes, and large spikes so the algebra
    // sees vacuous corners and near-saturated opinions alike.
    const auto draw = [&] {
      VecD raw(classes);
      for (int i = 0; i < classes; ++i) {
        const double u = rng.unif01();
        if (u < 0.15) {
          raw[i] = 0.0;
        } else if (u < 0.9) {
          raw[i] = rng.uniform(0.0, 20.0);
        } else {
          raw[i] = std::exp(rng.uniform(0.0, 18.0));
        }
      }
      return opinion_from_evidence(evidence_from_scores(raw));
    };
    const Opinion<double> m1 = draw();
    const Opinion<double> m2 = draw();

    worst_mass = std::max(worst_mass, std::abs(m1.b.sum() + m1.c - 1.0));

    const Opinion<double> ab = ds_combine(m1, m2);
    const Opinion<double> ba = ds_combine(m2, m1);
    worst_commute = std::max(worst_commute, (ab.b - ba.b).cwiseAbs().maxCoeff());
    worst_commute = std::max(worst_commute, std::abs(ab.c - ba.c));

    Opinion<double> vacuous;
    vacuous.b = VecD::Zero(classes);
    vacuous.c = 1.0;
    const Opinion<double> same = ds_combine(m1, vacuous);
    worst_identity = std::max(worst_identity, (same.b - m1.b).cwiseAbs().maxCoeff());
    worst_identity = std::max(worst_identity, std::abs(same.c - m1.c));

    const Opinion<double> back = opinion_from_evidence(dirichlet_from_opinion(m1));
    worst_round = std::max(worst_round, (back.b - m1.b).cwiseAbs().maxCoeff());
    worst_round = std::max(worst_round, std::abs(back.c - m1.c));
  }
  const double dt = seconds_since(t0);
  std::printf("        worst: mass %.3e  commute %.3e  identity %.3e  round-trip %.3e  (%.2fs)\n",
              worst_mass, worst_commute, worst_identity, worst_round, dt);
  g.expect(worst_mass <= kMassTol, "belief plus uncertainty sums to one (1e-9)");
  g.expect(worst_commute <= kCommuteTol, "combination commutes (1e-12)");
  g.expect(worst_identity <= kIdentityTol, "vacuous opinion is the identity (1e-12)");
  g.expect(worst_round <= kRoundTripTol, "opinion/Dirichlet round trip (1e-9)");
  g.expect(dt < kBudgetSeconds, "finishes under 5 seconds");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 2. Hand-computed combination example.

bool combination_worked_example() {
  Gate g;
  constexpr double kTol = 1e-5;
  Opinion<double> m1, m2;
  m1.b = VecD(2);
  m1.b << 0.6, 0.2;
  m1.c = 0.2;
  m2.b = VecD(2);
  m2.b << 0.5, 0.3;
  m2.c = 0.2;
  // By hand: conflict 0.6*0.3 + 0.2*0.5 = 0.28, so the normalizer is 0.72;
  // numerators are 0.52, 0.16 for belief and 0.04 for uncertainty.
  const Opinion<double> m = ds_combine(m1, m2);
  validate_opinion(m);
  std::printf("        combined b = (%.6f, %.6f)  c = %.6f\n", m.b[0], m.b[1], m.c);
  g.expect(std::abs(m.b[0] - 0.72222) <= kTol, "first belief = 0.72222 (1e-5)");
  g.expect(std::abs(m.b[1] - 0.22222) <= kTol, "second belief = 0.22222 (1e-5)");
  g.expect(std::abs(m.c - 0.05556) <= kTol, "uncertainty = 0.05556 (1e-5)");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 3. Digamma loss identities.

bool digamma_loss_checks() {
  Gate g;
  constexpr double kPsiTol = 1e-9;
  const double gap = digamma(3.0) - digamma(2.0);
  std::printf("        psi(3) - psi(2) = %.12f\n", gap);
  g.expect(std::abs(gap - 0.5) <= kPsiTol, "digamma gap equals 1/2 (1e-9)");

  // Piling evidence on the true class must strictly lower the loss while the
  // other classes stay fixed.
  bool monotone = true;
  double prev = 0;
  for (int i = 0; i < 100; ++i) {
    VecD alpha(3);
    alpha << 1.0 + 0.25 * static_cast<double>(i), 3.0, 1.5;
    const double loss = dirichlet_ce_loss_index(alpha, 0);
    if (i > 0 && !(loss < prev)) monotone = false;
    prev = loss;
  }
  g.expect(monotone, "loss strictly decreases in true-class evidence over 100 points");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 4. Gradient verification against central differences.

bool gradient_verification() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr double kGradTol = 1e-5;
  constexpr double kBudgetSeconds = 30.0;
  const GradCheckReport report = grad_check(7);
  const double dt = seconds_since(t0);
  double worst = 0;
  for (const GradCheckGroup& grp : report.groups) worst = std::max(worst, grp.max_rel_err);
  std::printf("        %zu parameter groups, worst relative error %.3e  (%.2fs)\n",
              report.groups.size(), worst, dt);
  g.expect(report.groups.size() == 8, "covers all eight parameter groups");
  for (const GradCheckGroup& grp : report.groups) {
    if (!(grp.pass && grp.max_rel_err < kGradTol)) {
      g.ok = false;
      std::printf("        unmet: group %s at %.3e\n", grp.group.c_str(), grp.max_rel_err);
    }
  }
  g.expect(report.pass, "report passes overall");
  g.expect(dt < kBudgetSeconds, "finishes under 30 seconds");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 5. Learnability on a fully deterministic planted pattern.

bool planted_pattern_learnability() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr double kRecallFloor = 0.95;
  constexpr double kBudgetSeconds = 300.0;

  SynthOptions opt;
  const SyntheticData data = generate_synthetic(7, 50, 30, 1.0, opt);
  const SplitDataset split = chronological_split(data.dataset);

  TrainConfig tc;
  tc.epochs = 200;
  tc.eval_every = 200;
  tc.model.item_count = split.item_count();
  tc.model.d_t = data.store.text_dim();
  tc.model.d_v = data.store.image_dim();
  const FitResult<float> fr = fit<float>(split, data.store, tc);

  const ReviewBankIndex banks(split, data.store);
  const std::vector<Sample> train = make_train_samples(split, tc.model.max_len);
  const std::vector<int> ks{1};
  const MetricsReport report = evaluate(fr.params, split, data.store, banks, train, ks, false);
  const double dt = seconds_since(t0);
  std::printf("        train Recall@1 = %.4f over %zu samples  (%.1fs)\n", report.recall_at(1),
              report.samples, dt);
  g.expect(report.recall_at(1) >= kRecallFloor, "train Recall@1 reaches 0.95 within 200 epochs");
  g.expect(dt < kBudgetSeconds, "finishes under 5 minutes");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 6. Held-out signal well above the uniform baseline at a larger scale.

bool signal_over_noise() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr double kRecallFloor = 0.25;  // uniform-random expectation is 10/200 = 0.05

  SynthOptions opt;
  const SyntheticData data = generate_synthetic(7, 200, 200, 0.8, opt);
  const SplitDataset split = chronological_split(data.dataset);

  TrainConfig tc;
  tc.epochs = 60;
  tc.eval_every = 60;
  tc.model.item_count = split.item_count();
  tc.model.d_t = data.store.text_dim();
  tc.model.d_v = data.store.image_dim();
  const FitResult<float> fr = fit<float>(split, data.store, tc);

  const ReviewBankIndex banks(split, data.store);
  const std::vector<Sample> test = make_test_samples(split, tc.model.max_len);
  const std::vector<int> ks{10};
  const MetricsReport report = evaluate(fr.params, split, data.store, banks, test, ks, false);
  const double dt = seconds_since(t0);
  std::printf("        test Recall@10 = %.4f over %zu users (uniform baseline 0.05)  (%.1fs)\n",
              report.recall_at(10), report.samples, dt);
  g.expect(report.recall_at(10) >= kRecallFloor, "test Recall@10 reaches 0.25");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 7. Ranking metrics against a brute-force oracle.

bool metric_oracle() {
  Gate g;
  constexpr double kNdcgTol = 1e-12;
  Rng rng(fnv1a64("metric-oracle"));
  int bad_instance = -1;
  for (int inst = 0; inst < 100 && bad_instance < 0; ++inst) {
    const int n = static_cast<int>(rng.uniform_int(5, 30));
    VecD score(n), prob(n);
    for (int i = 0; i < n; ++i) {
      score[i] = rng.uniform(-2.0, 2.0);
      prob[i] = rng.unif01();
    }
    // Forced ties exercise the id tiebreak on both sides.
    score[1] = score[0];
    score[3] = score[2];
    std::vector<int> mask;
    std::vector<char> masked(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      if (rng.unif01() < 0.2) {
        mask.push_back(i);
        masked[static_cast<std::size_t>(i)] = 1;
      }
    }
    const RankingResult r = full_rank(score, prob, 0.3, mask);

    // Oracle ordering: unmasked before masked, higher score first, lower id
    // on ties.
    std::vector<int> want(static_cast<std::size_t>(n));
    std::iota(want.begin(), want.end(), 0);
    std::sort(want.begin(), want.end(), [&](int a, int b) {
      const char ma = masked[static_cast<std::size_t>(a)];
      const char mb = masked[static_cast<std::size_t>(b)];
      if (ma != mb) return ma < mb;
      if (score[a] != score[b]) return score[a] > score[b];
      return a < b;
    });
    if (want != r.order) {
      bad_instance = inst;
      break;
    }

    const int target = static_cast<int>(rng.uniform_int(0, n - 1));
    const int rank =
        static_cast<int>(std::find(want.begin(), want.end(), target) - want.begin()) + 1;
    if (rank_of(r, target) != rank) bad_instance = inst;
    for (const int k : {1, 3, 10}) {
      const double want_recall = rank <= k ? 1.0 : 0.0;
      const double want_ndcg =
          rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
      if (recall_at_k(r, target, k) != want_recall) bad_instance = inst;
      if (ndcg_at_k(r, target, k) != want_ndcg) bad_instance = inst;
    }
  }
  if (bad_instance >= 0) std::printf("        first mismatch at instance %d\n", bad_instance);
  g.expect(bad_instance < 0, "100 random instances match the oracle exactly");

  // A hit at rank 3 discounts to 1/log2(4) = 1/2 exactly.
  VecD s(5), p(5);
  s << 5.0, 4.0, 3.0, 2.0, 1.0;
  p << 0.2, 0.2, 0.2, 0.2, 0.2;
  const RankingResult r3 = full_rank(s, p, 0.0);
  const double v = ndcg_at_k(r3, 2, 3);
  std::printf("        NDCG@3 for a rank-3 hit = %.15f\n", v);
  g.expect(std::abs(v - 0.5) <= kNdcgTol, "rank-3 NDCG equals one half (1e-12)");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 8. Joint uncertainty rises when item labels are rotated away from the
//    multimodal content.

bool uncertainty_under_relabeling() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr int kSeeds = 20;
  constexpr int kWinsFloor = 19;

  // Deterministic pair: equal belief magnitude, aligned vs opposed. The
  // opposed pair must keep more combined uncertainty.
  {
    Opinion<double> a, opposed;
    a.b = VecD(3);
    a.b << 0.5, 0.1, 0.0;
    a.c = 0.4;
    opposed.b = VecD(3);
    opposed.b << 0.1, 0.5, 0.0;
    opposed.c = 0.4;
    const double c_agree = ds_combine(a, a).c;
    const double c_conflict = ds_combine(a, opposed).c;
    std::printf("        combined c: agreeing %.4f  conflicting %.4f\n", c_agree, c_conflict);
    g.expect(c_conflict > c_agree, "conflicting views keep more combined uncertainty");
  }

  SynthOptions opt;
  opt.dim = 16;
  const SyntheticData data = generate_synthetic(7, 300, 30, 1.0, opt);
  const SplitDataset split = chronological_split(data.dataset);

  TrainConfig tc;
  tc.epochs = 80;
  tc.eval_every = 80;
  tc.model.d_h = 32;
  tc.model.item_count = split.item_count();
  tc.model.d_t = data.store.text_dim();
  tc.model.d_v = data.store.image_dim();
  const FitResult<float> fr = fit<float>(split, data.store, tc);
  const ModelConfig& mc = fr.params.cfg;

  const ReviewBankIndex banks(split, data.store);
  const std::vector<Sample> test = make_test_samples(split, mc.max_len);

  // The generator plants one successor cycle over the vocabulary; map it
  // onto split ids by item name.
  std::vector<int> next(static_cast<std::size_t>(mc.item_count), -1);
  for (std::size_t i = 0; i < data.item_names.size(); ++i) {
    const int from = split.item_id(data.item_names[i]);
    const int to = split.item_id(data.item_names[static_cast<std::size_t>(data.next[i])]);
    next[static_cast<std::size_t>(from)] = to;
  }

  std::vector<FeatureBundle<float>> clean, dirty;
  for (std::size_t i = 0; i < test.size(); ++i) {
    FeatureBundle<float> f = build_features<float>(test[i], split, data.store, banks, mc);
    (i % 2 == 0 ? clean : dirty).push_back(std::move(f));
  }
  const auto mean_uncertainty = [&](const std::vector<FeatureBundle<float>>& fs) {
    double s = 0;
    for (const FeatureBundle<float>& f : fs) {
      s += static_cast<double>(forward_sample(fr.params, f).uncertainty);
    }
    return s / static_cast<double>(fs.size());
  };
  const double clean_mean = mean_uncertainty(clean);

  // Advancing every id k steps along the planted cycle keeps the id view's
  // sequences in-distribution (powers of the cycle commute with the
  // transition map) while detaching them from the review and image content,
  // so only the cross-view conflict moves.
  int wins = 0;
  for (int sd = 0; sd < kSeeds; ++sd) {
    Rng rot(mix_seed(static_cast<std::uint64_t>(sd), fnv1a64("cycle-rotate")));
    const int k = 1 + static_cast<int>(rot.uniform_int(0, mc.item_count - 2));
    std::vector<int> p(static_cast<std::size_t>(mc.item_count));
    for (int i = 0; i < mc.item_count; ++i) {
      int cur = i;
      for (int step = 0; step < k; ++step) cur = next[static_cast<std::size_t>(cur)];
      p[static_cast<std::size_t>(i)] = cur;
    }
    double s = 0;
    for (const FeatureBundle<float>& f : dirty) {
      FeatureBundle<float> shifted = f;
      for (int& id : shifted.ids) id = p[static_cast<std::size_t>(id)];
      s += static_cast<double>(forward_sample(fr.params, shifted).uncertainty);
    }
    const double shifted_mean = s / static_cast<double>(dirty.size());
    if (shifted_mean > clean_mean) ++wins;
  }
  const double dt = seconds_since(t0);
  std::printf("        clean-half mean c %.4f, relabeled half wins %d/%d  (%.1fs)\n", clean_mean,
              wins, kSeeds, dt);
  g.expect(wins >= kWinsFloor, "relabeled half carries more uncertainty in >= 19 of 20 seeds");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 9. Ablation trends: both views beat the id view alone, and the evidential
//    head matches softmax accuracy while emitting uncertainty.

bool ablation_trends() {
  const auto t0 = Clock::now();
  Gate g;
  constexpr double kHeadGap = 0.02;

  SynthOptions opt;
  opt.dim = 16;
  const SyntheticData data = generate_synthetic(7, 400, 30, 0.8, opt);
  const SplitDataset split = chronological_split(data.dataset);
  const ReviewBankIndex banks(split, data.store);
  const std::vector<Sample> test = make_test_samples(split, 50);
  const std::vector<int> ks{10};

  const auto run = [&](Views views, HeadKind head) {
    TrainConfig tc;
    tc.epochs = 60;
    tc.eval_every = 60;
    tc.model.d_h = 32;
    tc.model.item_count = split.item_count();
    tc.model.d_t = data.store.text_dim();
    tc.model.d_v = data.store.image_dim();
    tc.model.views = views;
    tc.model.head = head;
    const FitResult<float> fr = fit<float>(split, data.store, tc);
    return evaluate(fr.params, split, data.store, banks, test, ks, false);
  };

  const MetricsReport both = run(Views::Both, HeadKind::Evidential);
  const MetricsReport id_only = run(Views::IdOnly, HeadKind::Evidential);
  const MetricsReport softmax = run(Views::Both, HeadKind::Softmax);
  const double dt = seconds_since(t0);
  std::printf("        test Recall@10: both %.4f  id-only %.4f  softmax %.4f  (%.1fs)\n",
              both.recall_at(10), id_only.recall_at(10), softmax.recall_at(10), dt);
  std::printf("        mean uncertainty: evidential %.4f  softmax %.4f\n", both.mean_uncertainty,
              softmax.mean_uncertainty);
  g.expect(both.recall_at(10) >= id_only.recall_at(10), "both views beat the id view alone");
  g.expect(std::abs(both.recall_at(10) - softmax.recall_at(10)) <= kHeadGap,
           "evidential head within 0.02 of softmax Recall@10");
  g.expect(both.mean_uncertainty > 0.0, "evidential head emits uncertainty");
  g.expect(softmax.mean_uncertainty == 0.0, "softmax head carries no uncertainty signal");
  return g.ok;
}

// ---------------------------------------------------------------------------
// 10. Determinism of metrics and persistence of checkpoints.

bool determinism_and_persistence() {
  const auto t0 = Clock::now();
  Gate g;

  SynthOptions opt;
  opt.dim = 8;
  const SyntheticData data = generate_synthetic(11, 20, 10, 0.9, opt);
  const SplitDataset split = chronological_split(data.dataset);
  const ReviewBankIndex banks(split, data.store);

  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 16;
  tc.eval_every = 4;
  tc.model.d_h = 16;
  tc.model.d_i = 8;
  tc.model.d_m = 8;
  tc.model.item_count = split.item_count();
  tc.model.d_t = data.store.text_dim();
  tc.model.d_v = data.store.image_dim();

  const std::vector<Sample> test = make_test_samples(split, tc.model.max_len);
  const std::vector<int> ks{5, 10};
  const auto metrics_json = [&](const ModelParams<float>& params) {
    const MetricsReport report = evaluate(params, split, data.store, banks, test, ks, false);
    return metrics_to_json(report, uncertainty_report(report.uncertainties, report.hits10, 5));
  };

  const FitResult<float> first = fit<float>(split, data.store, tc);
  const FitResult<float> second = fit<float>(split, data.store, tc);
  const std::string ja = metrics_json(first.params);
  const std::string jb = metrics_json(second.params);
  std::printf("        metrics JSON: %zu bytes vs %zu bytes, %s\n", ja.size(), jb.size(),
              ja == jb ? "identical" : "DIFFER");
  g.expect(ja == jb, "same seed and config give byte-identical metrics JSON");

  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "truthsr-acceptance-probe";
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / "probe.tsrm";
  save_checkpoint(first.params, split.item_names, path);
  const Checkpoint loaded = load_checkpoint(path);

  bool identical = true;
  for (const Sample& sample : test) {
    const FeatureBundle<float> f =
        build_features<float>(sample, split, data.store, banks, first.params.cfg);
    const ForwardOutput<float> x = forward_sample(first.params, f);
    const ForwardOutput<float> y = forward_sample(loaded.params, f);
    if (!(x.rank_score == y.rank_score) || !(x.expected_prob == y.expected_prob) ||
        x.uncertainty != y.uncertainty) {
      identical = false;
      break;
    }
  }
  std::filesystem::remove_all(dir);
  const double dt = seconds_since(t0);
  std::printf("        checkpoint probe over %zu samples: %s  (%.1fs)\n", test.size(),
              identical ? "bit-identical" : "DIFFER", dt);
  g.expect(identical, "checkpoint round trip reproduces probe outputs bit for bit");
  return g.ok;
}

struct Criterion {
  const char* name;
  bool (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"opinion algebra invariants", &opinion_algebra},
      {"combination worked example", &combination_worked_example},
      {"digamma loss identities", &digamma_loss_checks},
      {"gradient verification", &gradient_verification},
      {"planted-pattern learnability", &planted_pattern_learnability},
      {"signal over noise at scale", &signal_over_noise},
      {"ranking metric oracle", &metric_oracle},
      {"uncertainty under relabeled histories", &uncertainty_under_relabeling},
      {"view and head ablation trends", &ablation_trends},
      {"determinism and persistence", &determinism_and_persistence},
  };

  int failures = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    std::printf("criterion %d: %s\n", index, c.name);
    std::fflush(stdout);
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      std::printf("        exception: %s\n", e.what());
    }
    std::printf("%s  criterion %d: %s\n", ok ? "PASS" : "FAIL", index, c.name);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}

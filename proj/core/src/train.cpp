#include "truthsr/train.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace truthsr {

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  os << "gradient check (tolerance " << std::scientific << std::setprecision(0)
     << report.tolerance << ")\n";
  for (const auto& g : report.groups) {
    os << "  " << std::left << std::setw(10) << g.group << " entries " << std::right
       << std::setw(4) << g.entries << "  max rel err " << std::scientific
       << std::setprecision(3) << g.max_rel_err;
    if (g.skipped > 0) os << "  skipped " << g.skipped << " (kink)";
    os << "  " << (g.pass ? "pass" : "FAIL") << "\n";
  }
  os << (report.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

GradCheckReport grad_check(std::uint64_t seed, const std::string& corrupt_group) {
  // Tiny instance: |I| = 5, contexts truncated to N = 3, d_h = 4.
  ModelConfig cfg;
  cfg.item_count = 5;
  cfg.d_i = 4;
  cfg.d_t = 4;
  cfg.d_v = 4;
  cfg.d_m = 4;
  cfg.d_h = 4;
  cfg.layers = 2;
  cfg.max_len = 3;
  cfg.bank_max = 3;
  cfg.lambda = 1.0;

  SynthOptions opt;
  opt.dim = cfg.d_t;
  opt.len_min = 4;
  opt.len_max = 6;
  opt.missing_prob = 0.25;  // exercises the missing-image exclusion path
  const SyntheticData data =
      generate_synthetic(mix_seed(seed, fnv1a64("gradcheck-data")), 6, cfg.item_count, 0.7, opt);
  const SplitDataset split = chronological_split(data.dataset);
  const ReviewBankIndex banks(split, data.store);

  std::vector<Sample> samples = make_train_samples(split, cfg.max_len);
  check_data(!samples.empty(), "grad_check: no samples");
  if (samples.size() > 4) samples.resize(4);

  ModelParams<double> params =
      init_params<double>(cfg, mix_seed(seed, fnv1a64("gradcheck-params")));

  // Features do not depend on the parameters, so build them once.
  std::vector<FeatureBundle<double>> bundles;
  bundles.reserve(samples.size());
  for (const Sample& s : samples) {
    bundles.push_back(build_features<double>(s, split, data.store, banks, cfg));
  }
  auto batch_loss = [&](const ModelParams<double>& p) {
    double sum = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      sum += sample_loss(forward_sample(p, bundles[i]), samples[i].target, cfg);
    }
    return sum / static_cast<double>(samples.size());
  };

  BatchGradients<double> analytic =
      compute_gradients(params, std::span<const Sample>(samples), split, data.store, banks);
  if (!corrupt_group.empty()) {
    for (auto& ref : analytic.grads.tensors()) {
      if (ref.group() != corrupt_group) continue;
      for (Eigen::Index j = 0; j < ref.size(); ++j) ref.data[j] += 0.5;
    }
  }

  const double h = 1e-4;
  GradCheckReport report;
  std::map<std::string, GradCheckGroup> groups;
  std::vector<std::string> group_order;

  auto p_refs = params.tensors();
  const auto g_refs = analytic.grads.tensors();
  for (std::size_t t = 0; t < p_refs.size(); ++t) {
    const std::string group = p_refs[t].group();
    if (groups.find(group) == groups.end()) {
      groups[group] = GradCheckGroup{group, 0.0, 0, 0, true};
      group_order.push_back(group);
    }
    GradCheckGroup& gr = groups[group];
    for (Eigen::Index j = 0; j < p_refs[t].size(); ++j) {
      const double saved = p_refs[t].data[j];
      auto loss_at = [&](double offset) {
        p_refs[t].data[j] = saved + offset;
        const double value = batch_loss(params);
        p_refs[t].data[j] = saved;
        return value;
      };
      const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
      const double fd_half = (loss_at(h / 2) - loss_at(-h / 2)) / h;

      // Smooth coordinates agree to O(h^2); a step straddling the evidence
      // head's rectifier kink disagrees at the scale of the slope gap.
      const double agree_scale = std::max({std::abs(fd), std::abs(fd_half), 1e-6});
      if (std::abs(fd - fd_half) > 1e-3 * agree_scale) {
        ++gr.skipped;
        continue;
      }

      // The difference quotient carries ~eps*|L|/h of cancellation noise
      // (about 1e-11 here), so gradients below 1e-5 cannot be resolved to
      // the 1e-5 relative tolerance; the floor keeps noise-dominated
      // near-zero coordinates from reading as spurious relative error.
      const double an = g_refs[t].data[j];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-5});
      gr.max_rel_err = std::max(gr.max_rel_err, std::abs(fd - an) / denom);
      ++gr.entries;
    }
  }

  report.pass = true;
  for (const std::string& name : group_order) {
    GradCheckGroup g = groups[name];
    g.pass = g.max_rel_err < report.tolerance;
    report.pass = report.pass && g.pass;
    report.groups.push_back(std::move(g));
  }
  return report;
}

}  // namespace truthsr

#include "truthsr/synthetic.hpp"

#include "truthsr/rng.hpp"

#include <numeric>

namespace truthsr {

namespace {

VecF jittered_topic(const VecF& topic, const std::string& id, std::uint64_t seed,
                    double noise) {
  Rng rng(mix_seed(seed, fnv1a64("jitter\x1f" + id)));
  VecF v = topic;
  const double scale = noise / std::sqrt(static_cast<double>(topic.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] += static_cast<float>(scale * rng.normal());
  }
  const float norm = v.norm();
  return norm > 1e-12f ? VecF(v / norm) : topic;
}

}  // namespace

SyntheticData generate_synthetic(std::uint64_t seed, int users, int items,
                                 double pattern_strength, const SynthOptions& opt) {
  check_data(users >= 1, "generate_synthetic requires users >= 1");
  check_data(items >= 2, "generate_synthetic requires items >= 2");
  check_data(pattern_strength >= 0.0 && pattern_strength <= 1.0,
             "pattern_strength must be in [0, 1]");
  check_data(opt.dim >= 1 && opt.len_min >= 1 && opt.len_max >= opt.len_min,
             "invalid synthetic options");

  SyntheticData out;
  out.item_names.reserve(static_cast<std::size_t>(items));
  for (int k = 0; k < items; ++k) out.item_names.push_back("i" + std::to_string(k));

  Rng rng(mix_seed(seed, fnv1a64("synthetic")));

  // single cycle through a shuffled item order
  std::vector<int> order(static_cast<std::size_t>(items));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  out.next.assign(static_cast<std::size_t>(items), 0);
  for (int k = 0; k < items; ++k) {
    out.next[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
        order[static_cast<std::size_t>((k + 1) % items)];
  }

  std::vector<VecF> topics;
  topics.reserve(static_cast<std::size_t>(items));
  for (int k = 0; k < items; ++k) {
    topics.push_back(stub_encode(EmbeddingKind::Text, "topic\x1f" + out.item_names[static_cast<std::size_t>(k)],
                                 opt.dim, seed));
  }

  std::vector<Interaction> interactions;
  for (int u = 0; u < users; ++u) {
    const std::string user = "u" + std::to_string(u);
    const int len = static_cast<int>(rng.uniform_int(opt.len_min, opt.len_max));
    int item = static_cast<int>(rng.uniform_int(0, items - 1));
    for (int n = 0; n < len; ++n) {
      if (n > 0) {
        item = rng.unif01() < pattern_strength
                   ? out.next[static_cast<std::size_t>(item)]
                   : static_cast<int>(rng.uniform_int(0, items - 1));
      }
      Interaction it;
      it.user_id = user;
      it.item_id = out.item_names[static_cast<std::size_t>(item)];
      it.timestamp = n;
      const bool miss_review = rng.unif01() < opt.missing_prob;
      const bool miss_image = rng.unif01() < opt.missing_prob;
      if (!miss_review) it.review_id = "r/" + user + "/" + std::to_string(n);
      if (!miss_image) it.image_id = "g/" + user + "/" + std::to_string(n);

      const VecF& topic = topics[static_cast<std::size_t>(item)];
      if (!miss_review) {
        out.store.add(EmbeddingKind::Text, it.review_id,
                      jittered_topic(topic, it.review_id, seed, opt.noise));
      }
      if (!miss_image) {
        out.store.add(EmbeddingKind::Image, it.image_id,
                      jittered_topic(topic, it.image_id, seed, opt.noise));
      }
      interactions.push_back(std::move(it));
    }
  }

  out.dataset = Dataset::build(std::move(interactions));
  return out;
}

}  // namespace truthsr

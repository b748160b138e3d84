#include "truthsr/synthetic.hpp"

#include <doctest.h>

#include <string>
#include <unordered_map>
#include <vector>

using namespace truthsr;

TEST_SUITE_BEGIN("synthetic");

TEST_CASE("generation is a pure function of its arguments") {
  const SyntheticData a = generate_synthetic(11, 8, 6, 0.7);
  const SyntheticData b = generate_synthetic(11, 8, 6, 0.7);
  REQUIRE(a.dataset.size() == b.dataset.size());
  for (std::size_t i = 0; i < a.dataset.size(); ++i) {
    const auto& x = a.dataset.interactions()[i];
    const auto& y = b.dataset.interactions()[i];
    CHECK(x.user_id == y.user_id);
    CHECK(x.item_id == y.item_id);
    CHECK(x.timestamp == y.timestamp);
    CHECK(x.review_id == y.review_id);
    CHECK(x.image_id == y.image_id);
  }
  CHECK(a.next == b.next);
  for (const auto& [id, v] : a.store.vectors(EmbeddingKind::Text)) {
    const VecF* w = b.store.find(EmbeddingKind::Text, id);
    REQUIRE(w != nullptr);
    CHECK(v == *w);
  }
  const SyntheticData c = generate_synthetic(12, 8, 6, 0.7);
  CHECK(c.dataset.interactions()[1].item_id != a.dataset.interactions()[1].item_id);
}

TEST_CASE("pattern strength one walks the planted cycle exactly") {
  const SyntheticData d = generate_synthetic(3, 10, 12, 1.0);
  std::unordered_map<std::string, int> vocab;
  for (std::size_t k = 0; k < d.item_names.size(); ++k) {
    vocab[d.item_names[k]] = static_cast<int>(k);
  }
  for (const auto& user : d.dataset.users()) {
    const auto& pos = d.dataset.user_positions(user);
    for (std::size_t i = 0; i + 1 < pos.size(); ++i) {
      const int cur = vocab.at(d.dataset.interactions()[pos[i]].item_id);
      const int nxt = vocab.at(d.dataset.interactions()[pos[i + 1]].item_id);
      CHECK(nxt == d.next[static_cast<std::size_t>(cur)]);
    }
  }
}

TEST_CASE("sequence lengths respect the configured range") {
  SynthOptions opt;
  opt.len_min = 4;
  opt.len_max = 6;
  const SyntheticData d = generate_synthetic(5, 20, 8, 0.5, opt);
  CHECK(d.dataset.users().size() == 20);
  for (const auto& user : d.dataset.users()) {
    const auto n = d.dataset.user_positions(user).size();
    CHECK(n >= 4);
    CHECK(n <= 6);
  }
}

TEST_CASE("every interaction carries embeddings when nothing is missing") {
  const SyntheticData d = generate_synthetic(9, 10, 6, 0.8);
  for (const auto& it : d.dataset.interactions()) {
    REQUIRE(!it.review_id.empty());
    REQUIRE(!it.image_id.empty());
    CHECK(d.store.find(EmbeddingKind::Text, it.review_id) != nullptr);
    CHECK(d.store.find(EmbeddingKind::Image, it.image_id) != nullptr);
  }
  CHECK(d.store.text_dim() == 64);
  CHECK(d.store.image_dim() == 64);
}

TEST_CASE("missing_prob one drops all content") {
  SynthOptions opt;
  opt.missing_prob = 1.0;
  const SyntheticData d = generate_synthetic(4, 6, 5, 0.5, opt);
  for (const auto& it : d.dataset.interactions()) {
    CHECK(it.review_id.empty());
    CHECK(it.image_id.empty());
  }
  CHECK(d.store.count(EmbeddingKind::Text) == 0);
}

TEST_CASE("matched review and image pairs share a topic") {
  // review and image of one interaction come from the same item topic, so
  // their correlation should dominate the cross-item correlation
  SynthOptions opt;
  opt.noise = 0.2;
  const SyntheticData d = generate_synthetic(13, 6, 5, 0.5, opt);
  double matched = 0, crossed = 0;
  int n = 0;
  const auto& rows = d.dataset.interactions();
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    if (rows[i].item_id == rows[i + 1].item_id) continue;
    const VecF* t0 = d.store.find(EmbeddingKind::Text, rows[i].review_id);
    const VecF* z0 = d.store.find(EmbeddingKind::Image, rows[i].image_id);
    const VecF* z1 = d.store.find(EmbeddingKind::Image, rows[i + 1].image_id);
    matched += t0->dot(*z0);
    crossed += t0->dot(*z1);
    ++n;
  }
  REQUIRE(n > 10);
  CHECK(matched / n > crossed / n);
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(generate_synthetic(1, 0, 5, 0.5), DataError);
  CHECK_THROWS_AS(generate_synthetic(1, 5, 1, 0.5), DataError);
  CHECK_THROWS_AS(generate_synthetic(1, 5, 5, 1.5), DataError);
}

TEST_SUITE_END();

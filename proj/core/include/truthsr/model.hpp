#pragma once

#include "truthsr/common.hpp"
#include "truthsr/gru.hpp"
#include "truthsr/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace truthsr {

/// Which views feed the joint opinion.
enum class Views { Both, IdOnly, MmOnly };

/// Evidential head (rectified evidence + subjective logic) or a conventional
/// softmax head (ablation baseline, reports no uncertainty).
enum class HeadKind { Evidential, Softmax };

inline const char* to_string(Views v) {
  switch (v) {
    case Views::IdOnly: return "id";
    case Views::MmOnly: return "mm";
    default: return "both";
  }
}

inline const char* to_string(HeadKind h) {
  return h == HeadKind::Softmax ? "softmax" : "evidential";
}

inline Views views_from_string(const std::string& s) {
  if (s == "id") return Views::IdOnly;
  if (s == "mm") return Views::MmOnly;
  if (s == "both") return Views::Both;
  throw DataError("unknown views setting '" + s + "' (expected id|mm|both)");
}

inline HeadKind head_from_string(const std::string& s) {
  if (s == "softmax") return HeadKind::Softmax;
  if (s == "evidential") return HeadKind::Evidential;
  throw DataError("unknown head setting '" + s + "' (expected softmax|evidential)");
}

/// Shape and wiring configuration of one model instance.
struct ModelConfig {
  int item_count = 0;  // |I|, from the dataset vocabulary
  int d_i = 64;        // item-ID embedding size
  int d_t = 64;        // review-text embedding size (from the store)
  int d_v = 64;        // image embedding size (from the store)
  int d_m = 64;        // fused multimodal input size
  int d_h = 64;        // GRU hidden size
  int layers = 2;      // GRU layers per view
  int max_len = 50;    // context truncated to this many most recent positions
  int bank_max = 10;   // most recent other-user reviews kept per item
  double lambda = 1.0; // weight of the evidential losses
  double eps = 1e-8;   // alignment-loss epsilon
  Views views = Views::Both;
  bool coattention = true;
  HeadKind head = HeadKind::Evidential;

  bool uses_id_view() const { return views != Views::MmOnly; }
  bool uses_mm_view() const { return views != Views::IdOnly; }
  /// Images are projected into the text space for the matching inner product
  /// whenever the two embedding sizes differ.
  bool has_image_projection() const { return d_t != d_v; }

  void validate() const {
    check_data(item_count >= 2, "model config: need at least 2 items");
    check_data(d_i >= 1 && d_t >= 1 && d_v >= 1 && d_m >= 1 && d_h >= 1,
               "model config: dimensions must be positive");
    check_data(layers >= 1, "model config: need at least one GRU layer");
    check_data(max_len >= 1, "model config: max_len must be positive");
    check_data(bank_max >= 1, "model config: bank_max must be positive");
    check_data(lambda >= 0.0, "model config: lambda must be nonnegative");
    check_data(eps > 0.0, "model config: eps must be positive");
  }
};

/// Named view into one parameter tensor (contiguous column-major storage).
template <typename T>
struct TensorRef {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  /// Group label for reporting: the prefix before the first '.'.
  std::string group() const { return name.substr(0, name.find('.')); }
};

/// Per-view output head mapping the final hidden state to raw item scores.
template <typename T>
struct HeadParams {
  Mat<T> w;  // |I| x d_h
  Vec<T> b;  // |I|
};

/// All trainable state. Tensor groups are named and ordered; that order is
/// the checkpoint manifest order and the initialization draw order.
template <typename T>
struct ModelParams {
  ModelConfig cfg;

  Mat<T> id_table;  // |I| x d_i
  Mat<T> mr;        // d_t x d_t
  Mat<T> wp;        // d_t x 2*d_t
  Mat<T> wm;        // d_m x (d_t + d_v)
  Mat<T> img_proj;  // d_t x d_v when d_t != d_v, otherwise empty
  GruParams<T> gru1, gru2;
  HeadParams<T> head1, head2;

  std::vector<TensorRef<T>> tensors() { return list<TensorRef<T>>(*this); }
  std::vector<TensorRef<const T>> tensors() const { return list<TensorRef<const T>>(*this); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& ref : tensors()) n += ref.size();
    return n;
  }

 private:
  template <typename Ref, typename Self>
  static std::vector<Ref> list(Self& self) {
    std::vector<Ref> out;
    auto add = [&out](std::string name, auto& m) {
      out.push_back(Ref{std::move(name), m.data(), m.rows(), m.cols()});
    };
    add("id_table", self.id_table);
    add("mr", self.mr);
    add("wp", self.wp);
    add("wm", self.wm);
    if (self.img_proj.size() > 0) add("img_proj", self.img_proj);
    auto add_view = [&](const char* gru_name, auto& gru, const char* head_name, auto& head) {
      for (std::size_t l = 0; l < gru.layers.size(); ++l) {
        auto& lay = gru.layers[l];
        const std::string p = std::string(gru_name) + ".l" + std::to_string(l) + ".";
        add(p + "wz", lay.wz);
        add(p + "uz", lay.uz);
        add(p + "bz", lay.bz);
        add(p + "wr", lay.wr);
        add(p + "ur", lay.ur);
        add(p + "br", lay.br);
        add(p + "wh", lay.wh);
        add(p + "uh", lay.uh);
        add(p + "bh", lay.bh);
      }
      add(std::string(head_name) + ".w", head.w);
      add(std::string(head_name) + ".b", head.b);
    };
    add_view("gru1", self.gru1, "head1", self.head1);
    add_view("gru2", self.gru2, "head2", self.head2);
    return out;
  }
};

namespace detail {

template <typename T>
void fill_uniform(Mat<T>& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
GruParams<T> make_gru(int input_dim, int hidden, int layers, Rng& rng) {
  GruParams<T> g;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int l = 0; l < layers; ++l) {
    GruLayer<T> lay;
    const int d_in = l == 0 ? input_dim : hidden;
    lay.wz.resize(hidden, d_in);
    lay.uz.resize(hidden, hidden);
    lay.wr.resize(hidden, d_in);
    lay.ur.resize(hidden, hidden);
    lay.wh.resize(hidden, d_in);
    lay.uh.resize(hidden, hidden);
    fill_uniform(lay.wz, rng, bound);
    fill_uniform(lay.uz, rng, bound);
    fill_uniform(lay.wr, rng, bound);
    fill_uniform(lay.ur, rng, bound);
    fill_uniform(lay.wh, rng, bound);
    fill_uniform(lay.uh, rng, bound);
    lay.bz = Vec<T>::Zero(hidden);
    lay.br = Vec<T>::Zero(hidden);
    lay.bh = Vec<T>::Zero(hidden);
    g.layers.push_back(std::move(lay));
  }
  return g;
}

template <typename T>
HeadParams<T> make_head(int items, int hidden, Rng& rng) {
  HeadParams<T> h;
  h.w.resize(items, hidden);
  fill_uniform(h.w, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
  h.b = Vec<T>::Zero(items);
  return h;
}

}  // namespace detail

/// Deterministic initialization: one seeded stream consumed in manifest
/// order. The ID table draws from [-0.1, 0.1]; projection matrices from
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)]; GRU and head weights from
/// [-1/sqrt(d_h), 1/sqrt(d_h)]; all biases start at zero.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, fnv1a64("model-init")));
  ModelParams<T> p;
  p.cfg = cfg;

  p.id_table.resize(cfg.item_count, cfg.d_i);
  detail::fill_uniform(p.id_table, rng, 0.1);

  p.mr.resize(cfg.d_t, cfg.d_t);
  detail::fill_uniform(p.mr, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_t)));
  p.wp.resize(cfg.d_t, 2 * cfg.d_t);
  detail::fill_uniform(p.wp, rng, 1.0 / std::sqrt(2.0 * cfg.d_t));
  p.wm.resize(cfg.d_m, cfg.d_t + cfg.d_v);
  detail::fill_uniform(p.wm, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_t + cfg.d_v)));
  if (cfg.has_image_projection()) {
    p.img_proj.resize(cfg.d_t, cfg.d_v);
    detail::fill_uniform(p.img_proj, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_v)));
  }

  p.gru1 = detail::make_gru<T>(cfg.d_i, cfg.d_h, cfg.layers, rng);
  p.head1 = detail::make_head<T>(cfg.item_count, cfg.d_h, rng);
  p.gru2 = detail::make_gru<T>(cfg.d_m, cfg.d_h, cfg.layers, rng);
  p.head2 = detail::make_head<T>(cfg.item_count, cfg.d_h, rng);
  return p;
}

/// Same shapes, all entries zero. Used for gradient and optimizer buffers.
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> z = p;
  for (auto& ref : z.tensors()) {
    std::fill(ref.data, ref.data + ref.size(), T(0));
  }
  return z;
}

template <typename T>
bool all_finite(const ModelParams<T>& p) {
  for (const auto& ref : p.tensors()) {
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      if (!std::isfinite(static_cast<double>(ref.data[i]))) return false;
    }
  }
  return true;
}

}  // namespace truthsr

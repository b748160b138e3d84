#pragma once

#include "truthsr/evidential.hpp"
#include "truthsr/features.hpp"
#include "truthsr/perception.hpp"
#include "truthsr/tape.hpp"

#include <cmath>
#include <vector>

namespace truthsr {

/// Stable log-softmax of a vector (max-subtracted; exp of it is softmax).
template <typename T>
Vec<T> log_softmax(const Vec<T>& x) {
  check_dims(x.size() >= 1, "log_softmax: empty input");
  const T m = x.maxCoeff();
  const T lse = std::log((x.array() - m).exp().sum()) + m;
  return x.array() - lse;
}

/// Everything one prediction produces. Evidential runs fill the evidence and
/// opinion fields; softmax runs fill the probability fields. The ranking
/// surface at the bottom is filled either way.
template <typename T>
struct ForwardOutput {
  Evidence<T> ev1, ev2, joint_ev;
  Opinion<T> op1, op2, joint_op;
  Vec<T> s1, s2;             // raw head scores of the active views
  Vec<T> p1, p2, p_joint;    // softmax-head probabilities
  T l_tv = T(0);

  Vec<T> rank_score;         // joint belief, or joint probability
  Vec<T> expected_prob;      // alpha/D, or joint probability
  T uncertainty = T(0);      // joint c, or 0 for the softmax head
};

namespace detail {

/// Co-attention re-modeling of the whole review sequence; with co-attention
/// disabled the raw review vectors pass through unchanged. Empty banks
/// aggregate to the zero vector.
template <typename T>
Mat<T> remodel_sequence(const ModelParams<T>& p, const FeatureBundle<T>& f) {
  if (!p.cfg.coattention) return f.t_u;
  const Eigen::Index d_t = p.cfg.d_t;
  const Eigen::Index n = f.t_u.cols();
  check_data(f.banks.size() == static_cast<std::size_t>(n),
             "forward: bank count does not match sequence length");
  Mat<T> out(d_t, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Mat<T>& bank = f.banks[static_cast<std::size_t>(i)];
    if (bank.cols() == 0) {
      Vec<T> spliced = Vec<T>::Zero(2 * d_t);
      spliced.head(d_t) = f.t_u.col(i);
      out.col(i) = p.wp * spliced;
    } else {
      const Mat<T> a_mat = affinity_matrix(bank, f.t_u, p.mr);
      const Vec<T> a = relevance_vector(a_mat);
      out.col(i) = remodel_review(Vec<T>(f.t_u.col(i)), a, bank, p.wp);
    }
  }
  return out;
}

/// Alignment loss over the positions whose image is present. Images are
/// projected into the text space first when the dimensions differ.
template <typename T>
T alignment_loss(const ModelParams<T>& p, const Mat<T>& t_tilde, const FeatureBundle<T>& f) {
  std::vector<Eigen::Index> included;
  for (std::size_t i = 0; i < f.has_image.size(); ++i) {
    if (f.has_image[i]) included.push_back(static_cast<Eigen::Index>(i));
  }
  if (included.empty()) return T(0);

  const Eigen::Index m = static_cast<Eigen::Index>(included.size());
  Mat<T> tt(p.cfg.d_t, m);
  Mat<T> zz(p.cfg.d_v, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    tt.col(j) = t_tilde.col(included[static_cast<std::size_t>(j)]);
    zz.col(j) = f.z.col(included[static_cast<std::size_t>(j)]);
  }
  const Mat<T> z_shared = p.cfg.has_image_projection() ? Mat<T>(p.img_proj * zz) : zz;
  const Mat<T> prob = match_probabilities(tt, z_shared);
  const Mat<T> pairs = Mat<T>::Identity(m, m);
  return cross_modal_loss(prob, pairs, static_cast<T>(p.cfg.eps));
}

}  // namespace detail

/// Inference-path forward for one sample. Pure in the parameters; this is
/// also the reference the training path is verified against.
template <typename T>
ForwardOutput<T> forward_sample(const ModelParams<T>& params, const FeatureBundle<T>& f) {
  const ModelConfig& cfg = params.cfg;
  check_data(!f.ids.empty(), "forward: empty context");
  ForwardOutput<T> out;

  if (cfg.uses_id_view()) {
    const Mat<T> x1 = id_embed(params.id_table, f.ids);
    const Vec<T> h1 = encode_view(x1, params.gru1);
    out.s1 = params.head1.w * h1 + params.head1.b;
  }
  if (cfg.uses_mm_view()) {
    const Mat<T> t_tilde = detail::remodel_sequence(params, f);
    const Mat<T> x2 = fuse_views(t_tilde, f.z, params.wm);
    const Vec<T> h2 = encode_view(x2, params.gru2);
    out.s2 = params.head2.w * h2 + params.head2.b;
    out.l_tv = detail::alignment_loss(params, t_tilde, f);
  }

  if (cfg.head == HeadKind::Evidential) {
    if (cfg.uses_id_view()) {
      out.ev1 = evidence_from_scores(out.s1);
      out.op1 = opinion_from_evidence(out.ev1);
    }
    if (cfg.uses_mm_view()) {
      out.ev2 = evidence_from_scores(out.s2);
      out.op2 = opinion_from_evidence(out.ev2);
    }
    if (cfg.views == Views::Both) {
      out.joint_op = ds_combine(out.op1, out.op2);
    } else {
      out.joint_op = cfg.uses_id_view() ? out.op1 : out.op2;
    }
    out.joint_ev = dirichlet_from_opinion(out.joint_op);
    out.rank_score = out.joint_op.b;
    out.uncertainty = out.joint_op.c;
    out.expected_prob = out.joint_ev.alpha() / out.joint_ev.strength();
  } else {
    if (cfg.uses_id_view()) out.p1 = softmax(out.s1);
    if (cfg.uses_mm_view()) out.p2 = softmax(out.s2);
    if (cfg.views == Views::Both) {
      out.p_joint = T(0.5) * (out.p1 + out.p2);
    } else {
      out.p_joint = cfg.uses_id_view() ? out.p1 : out.p2;
    }
    out.rank_score = out.p_joint;
    out.expected_prob = out.p_joint;
    out.uncertainty = T(0);
  }
  return out;
}

/// Loss of one prediction against its target item, assembled exactly as the
/// training path assembles it.
template <typename T>
T sample_loss(const ForwardOutput<T>& out, int target, const ModelConfig& cfg) {
  std::vector<T> view_losses;
  T joint_loss;
  if (cfg.head == HeadKind::Evidential) {
    if (cfg.uses_id_view()) {
      view_losses.push_back(dirichlet_ce_loss_index(Vec<T>(out.ev1.alpha()), target));
    }
    if (cfg.uses_mm_view()) {
      view_losses.push_back(dirichlet_ce_loss_index(Vec<T>(out.ev2.alpha()), target));
    }
    joint_loss = dirichlet_ce_loss_index(Vec<T>(out.joint_ev.alpha()), target);
  } else {
    if (cfg.uses_id_view()) view_losses.push_back(-log_softmax(out.s1)[target]);
    if (cfg.uses_mm_view()) view_losses.push_back(-log_softmax(out.s2)[target]);
    joint_loss = -std::log(out.p_joint[target]);
  }
  return total_loss(out.l_tv, std::span<const T>(view_losses), joint_loss,
                    static_cast<T>(cfg.lambda));
}

// ---- training path: the same computation expressed on the tape ----

/// Tape handles for every parameter tensor, bound to a gradient buffer set.
template <typename T>
struct TapeLeaves {
  struct GruL {
    Var wz, uz, bz, wr, ur, br, wh, uh, bh;
  };
  Var id_table, mr, wp, wm, img_proj;
  std::vector<GruL> gru1, gru2;
  Var head1_w, head1_b, head2_w, head2_b;
};

/// Registers every parameter as a tape leaf accumulating into `grads`
/// (same shapes as `params`, usually from zeros_like).
template <typename T>
TapeLeaves<T> make_leaves(Tape<T>& tape, const ModelParams<T>& params, ModelParams<T>& grads) {
  TapeLeaves<T> leaves;
  leaves.id_table = tape.leaf(params.id_table, &grads.id_table);
  leaves.mr = tape.leaf(params.mr, &grads.mr);
  leaves.wp = tape.leaf(params.wp, &grads.wp);
  leaves.wm = tape.leaf(params.wm, &grads.wm);
  if (params.img_proj.size() > 0) {
    leaves.img_proj = tape.leaf(params.img_proj, &grads.img_proj);
  }
  auto bind_gru = [&tape](const GruParams<T>& g, GruParams<T>& gg) {
    std::vector<typename TapeLeaves<T>::GruL> out;
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      const GruLayer<T>& a = g.layers[l];
      GruLayer<T>& b = gg.layers[l];
      out.push_back({tape.leaf(a.wz, &b.wz), tape.leaf(a.uz, &b.uz), tape.leaf(a.bz, &b.bz),
                     tape.leaf(a.wr, &b.wr), tape.leaf(a.ur, &b.ur), tape.leaf(a.br, &b.br),
                     tape.leaf(a.wh, &b.wh), tape.leaf(a.uh, &b.uh), tape.leaf(a.bh, &b.bh)});
    }
    return out;
  };
  leaves.gru1 = bind_gru(params.gru1, grads.gru1);
  leaves.gru2 = bind_gru(params.gru2, grads.gru2);
  leaves.head1_w = tape.leaf(params.head1.w, &grads.head1.w);
  leaves.head1_b = tape.leaf(params.head1.b, &grads.head1.b);
  leaves.head2_w = tape.leaf(params.head2.w, &grads.head2.w);
  leaves.head2_b = tape.leaf(params.head2.b, &grads.head2.b);
  return leaves;
}

namespace detail {

template <typename T>
Var tape_gru_encode(Tape<T>& t, Var x_seq, const std::vector<typename TapeLeaves<T>::GruL>& layers) {
  const Eigen::Index n = t.value(x_seq).cols();
  check_dims(n >= 1, "tape gru: empty sequence");
  std::vector<Var> h;
  h.reserve(layers.size());
  for (const auto& lay : layers) {
    h.push_back(t.constant(Mat<T>::Zero(t.value(lay.uz).rows(), 1)));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Var in = t.col(x_seq, i);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& lay = layers[l];
      Var z = t.sigmoid_(t.add(t.add(t.matmul(lay.wz, in), t.matmul(lay.uz, h[l])), lay.bz));
      Var r = t.sigmoid_(t.add(t.add(t.matmul(lay.wr, in), t.matmul(lay.ur, h[l])), lay.br));
      Var cand =
          t.tanh_(t.add(t.add(t.matmul(lay.wh, in), t.matmul(lay.uh, t.cmul(r, h[l]))), lay.bh));
      // (1 - z) . h + z . cand, written as h - z.h + z.cand
      h[l] = t.add(t.sub(h[l], t.cmul(z, h[l])), t.cmul(z, cand));
      in = h[l];
    }
  }
  return h.back();
}

/// Opinion of one view on the tape: b = e/D and c = |I|/D as 1x1 node.
template <typename T>
struct TapeOpinion {
  Var b;  // |I| x 1
  Var c;  // 1 x 1
};

template <typename T>
TapeOpinion<T> tape_opinion(Tape<T>& t, Var evidence) {
  const T classes = static_cast<T>(t.value(evidence).rows());
  Var strength = t.add_const(t.sum(evidence), classes);
  return {t.div_scalar(evidence, strength), t.const_div_scalar(classes, strength)};
}

template <typename T>
TapeOpinion<T> tape_ds_combine(Tape<T>& t, const TapeOpinion<T>& m1, const TapeOpinion<T>& m2) {
  Var s1 = t.sum(m1.b);
  Var s2 = t.sum(m2.b);
  Var beta = t.sub(t.cmul(s1, s2), t.dot(m1.b, m2.b));
  if (static_cast<double>(t.scalar(beta)) >= 1.0 - 1e-12) {
    throw ModelError("ds_combine: total conflict between opinions");
  }
  Var one_minus = t.add_const(t.scale(beta, T(-1)), T(1));
  Var numer = t.add(t.cmul(m1.b, m2.b),
                    t.add(t.mul_scalar(m2.b, m1.c), t.mul_scalar(m1.b, m2.c)));
  return {t.div_scalar(numer, one_minus), t.div_scalar(t.cmul(m1.c, m2.c), one_minus)};
}

/// psi(sum alpha) - psi(alpha_target) from a |I| x 1 alpha node.
template <typename T>
Var tape_dirichlet_loss(Tape<T>& t, Var alpha, int target) {
  const Eigen::Index classes = t.value(alpha).rows();
  Mat<T> onehot = Mat<T>::Zero(classes, 1);
  onehot(target, 0) = T(1);
  Var alpha_true = t.dot(alpha, t.constant(std::move(onehot)));
  return t.sub(t.digamma_(t.sum(alpha)), t.digamma_(alpha_true));
}

}  // namespace detail

/// Builds the full loss graph for one sample and returns the scalar loss
/// node. Gradients land in the buffers bound by make_leaves after backward().
template <typename T>
Var tape_forward_sample(Tape<T>& t, const TapeLeaves<T>& leaves, const ModelConfig& cfg,
                        const FeatureBundle<T>& f, int target) {
  check_data(!f.ids.empty(), "tape forward: empty context");
  check_data(target >= 0 && target < cfg.item_count, "tape forward: target out of range");

  Var s1, s2;
  Var l_tv = t.constant(Mat<T>::Zero(1, 1));
  if (cfg.uses_id_view()) {
    Var x1 = t.gather_rows_t(leaves.id_table, f.ids);
    Var h1 = detail::tape_gru_encode(t, x1, leaves.gru1);
    s1 = t.add(t.matmul(leaves.head1_w, h1), leaves.head1_b);
  }
  if (cfg.uses_mm_view()) {
    const Eigen::Index n = f.t_u.cols();
    Var t_u = t.constant(f.t_u);
    Var z_all = t.constant(f.z);

    std::vector<Var> t_tilde_cols;
    t_tilde_cols.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!cfg.coattention) {
        t_tilde_cols.push_back(t.col(t_u, i));
        continue;
      }
      const Mat<T>& bank = f.banks[static_cast<std::size_t>(i)];
      Var agg;
      if (bank.cols() == 0) {
        agg = t.constant(Mat<T>::Zero(cfg.d_t, 1));
      } else {
        Var bank_v = t.constant(bank);
        Var aff = t.tanh_(t.matmul(t.transpose_(bank_v), t.matmul(leaves.mr, t_u)));
        Var a = t.softmax_vec(t.rowmax(aff));
        agg = t.matmul(bank_v, a);
      }
      t_tilde_cols.push_back(t.matmul(leaves.wp, t.concat_rows(t.col(t_u, i), agg)));
    }
    Var t_tilde = t.concat_cols(std::span<const Var>(t_tilde_cols));
    Var x2 = t.matmul(leaves.wm, t.concat_rows(t_tilde, z_all));
    Var h2 = detail::tape_gru_encode(t, x2, leaves.gru2);
    s2 = t.add(t.matmul(leaves.head2_w, h2), leaves.head2_b);

    std::vector<Eigen::Index> included;
    for (std::size_t i = 0; i < f.has_image.size(); ++i) {
      if (f.has_image[i]) included.push_back(static_cast<Eigen::Index>(i));
    }
    if (!included.empty()) {
      const Eigen::Index m = static_cast<Eigen::Index>(included.size());
      std::vector<Var> tt_cols;
      tt_cols.reserve(static_cast<std::size_t>(m));
      for (Eigen::Index j : included) {
        tt_cols.push_back(t_tilde_cols[static_cast<std::size_t>(j)]);
      }
      Var tt = t.concat_cols(std::span<const Var>(tt_cols));

      Var z_bar;
      if (cfg.has_image_projection()) {
        Mat<T> z_inc(cfg.d_v, m);
        for (Eigen::Index j = 0; j < m; ++j) {
          z_inc.col(j) = f.z.col(included[static_cast<std::size_t>(j)]);
        }
        Var projected = t.matmul(leaves.img_proj, t.constant(std::move(z_inc)));
        std::vector<Var> bar_cols;
        for (Eigen::Index j = 0; j < m; ++j) {
          Var cj = t.col(projected, j);
          Var norm = t.sqrt_(t.dot(cj, cj));
          check_data(t.scalar(norm) > T(0), "tape forward: zero-norm projected image");
          bar_cols.push_back(t.div_scalar(cj, norm));
        }
        z_bar = t.concat_cols(std::span<const Var>(bar_cols));
      } else {
        Mat<T> z_norm(cfg.d_v, m);
        for (Eigen::Index j = 0; j < m; ++j) {
          const Vec<T> zj = f.z.col(included[static_cast<std::size_t>(j)]);
          const T norm = zj.norm();
          check_data(norm > T(0), "tape forward: zero-norm image vector");
          z_norm.col(j) = zj / norm;
        }
        z_bar = t.constant(std::move(z_norm));
      }

      Var logits = t.matmul(t.transpose_(tt), z_bar);
      Var ls = t.log_softmax_rows(logits);
      // q rows are one-hot on the diagonal, so log(q + eps) is a constant.
      Mat<T> log_q(m, m);
      log_q.setConstant(std::log(static_cast<T>(cfg.eps)));
      log_q.diagonal().setConstant(std::log(T(1) + static_cast<T>(cfg.eps)));
      Var kl = t.dot(t.exp_(ls), t.sub(ls, t.constant(std::move(log_q))));
      l_tv = t.scale(kl, T(1) / static_cast<T>(m));
    }
  }

  std::vector<Var> view_losses;
  Var joint_loss;
  if (cfg.head == HeadKind::Evidential) {
    detail::TapeOpinion<T> op1, op2, joint;
    if (cfg.uses_id_view()) {
      Var e1 = t.relu_clamped(s1, static_cast<T>(kEvidenceCap));
      op1 = detail::tape_opinion(t, e1);
      view_losses.push_back(detail::tape_dirichlet_loss(t, t.add_const(e1, T(1)), target));
    }
    if (cfg.uses_mm_view()) {
      Var e2 = t.relu_clamped(s2, static_cast<T>(kEvidenceCap));
      op2 = detail::tape_opinion(t, e2);
      view_losses.push_back(detail::tape_dirichlet_loss(t, t.add_const(e2, T(1)), target));
    }
    if (cfg.views == Views::Both) {
      joint = detail::tape_ds_combine(t, op1, op2);
    } else {
      joint = cfg.uses_id_view() ? op1 : op2;
    }
    Var joint_strength = t.const_div_scalar(static_cast<T>(cfg.item_count), joint.c);
    Var joint_alpha = t.add_const(t.mul_scalar(joint.b, joint_strength), T(1));
    joint_loss = detail::tape_dirichlet_loss(t, joint_alpha, target);
  } else {
    Mat<T> onehot_row = Mat<T>::Zero(1, cfg.item_count);
    onehot_row(0, target) = T(1);
    Var onehot = t.constant(std::move(onehot_row));
    Var p1, p2, p_joint;
    if (cfg.uses_id_view()) {
      Var ls1 = t.log_softmax_rows(t.transpose_(s1));
      view_losses.push_back(t.scale(t.dot(ls1, onehot), T(-1)));
      p1 = t.exp_(ls1);
    }
    if (cfg.uses_mm_view()) {
      Var ls2 = t.log_softmax_rows(t.transpose_(s2));
      view_losses.push_back(t.scale(t.dot(ls2, onehot), T(-1)));
      p2 = t.exp_(ls2);
    }
    if (cfg.views == Views::Both) {
      p_joint = t.scale(t.add(p1, p2), T(0.5));
    } else {
      p_joint = cfg.uses_id_view() ? p1 : p2;
    }
    joint_loss = t.scale(t.log_(t.dot(p_joint, onehot)), T(-1));
  }

  Var evid = joint_loss;
  for (Var v : view_losses) evid = t.add(evid, v);
  return t.add(l_tv, t.scale(evid, static_cast<T>(cfg.lambda)));
}

}  // namespace truthsr

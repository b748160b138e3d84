#pragma once

#include "truthsr/common.hpp"

#include <cmath>

namespace truthsr {

/// Stable softmax of a vector (max-subtraction).
template <typename T>
Vec<T> softmax(const Vec<T>& x) {
  check_dims(x.size() >= 1, "softmax: empty input");
  const T m = x.maxCoeff();
  Vec<T> y = (x.array() - m).exp();
  return y / y.sum();
}

/// Bilinear co-attention affinity: A[i][j] = tanh(t_I_i . (M_R t_U_j)).
/// t_I is d_t x M (one item's review bank), t_U is d_t x N (the user's
/// review sequence). Every entry lies in (-1, 1).
template <typename T>
Mat<T> affinity_matrix(const Mat<T>& t_I, const Mat<T>& t_U, const Mat<T>& M_R) {
  check_dims(M_R.rows() == M_R.cols(), "affinity_matrix: M_R must be square");
  check_dims(t_I.rows() == M_R.rows() && t_U.rows() == M_R.rows(),
             "affinity_matrix: embedding dim does not match M_R");
  return (t_I.transpose() * (M_R * t_U)).array().tanh();
}

/// Row-wise maximization followed by softmax: one weight per bank review.
template <typename T>
Vec<T> relevance_vector(const Mat<T>& A) {
  check_dims(A.rows() >= 1 && A.cols() >= 1, "relevance_vector: empty affinity matrix");
  Vec<T> row_max = A.rowwise().maxCoeff();
  return softmax(row_max);
}

/// Attention-aggregates the bank with weights a, splices with the original
/// review embedding, and projects back to d_t: W_p * [t_U_n ; t_I a].
template <typename T>
Vec<T> remodel_review(const Vec<T>& t_U_n, const Vec<T>& a, const Mat<T>& t_I,
                      const Mat<T>& W_p) {
  const Eigen::Index d_t = t_U_n.size();
  check_dims(t_I.rows() == d_t, "remodel_review: bank dim mismatch");
  check_dims(t_I.cols() == a.size(), "remodel_review: weight count mismatch");
  check_dims(W_p.rows() == d_t && W_p.cols() == 2 * d_t,
             "remodel_review: W_p must be d_t x 2*d_t");
  Vec<T> spliced(2 * d_t);
  spliced.head(d_t) = t_U_n;
  spliced.tail(d_t) = t_I * a;
  return W_p * spliced;
}

/// Multimodal fusion: column n is W_m * [t_tilde_n ; z_n].
template <typename T>
Mat<T> fuse_views(const Mat<T>& t_tilde, const Mat<T>& z, const Mat<T>& W_m) {
  check_dims(t_tilde.cols() == z.cols(), "fuse_views: sequence lengths differ");
  check_dims(W_m.cols() == t_tilde.rows() + z.rows(),
             "fuse_views: W_m columns must equal d_t + d_v");
  Mat<T> spliced(t_tilde.rows() + z.rows(), t_tilde.cols());
  spliced.topRows(t_tilde.rows()) = t_tilde;
  spliced.bottomRows(z.rows()) = z;
  return W_m * spliced;
}

/// Text-to-image match probabilities: P[i][j] = softmax_j(t_tilde_i . z_j/|z_j|).
/// Requires a shared embedding space (d_t == d_v) and nonzero image columns;
/// missing images must be excluded by the caller before this point.
template <typename T>
Mat<T> match_probabilities(const Mat<T>& t_tilde, const Mat<T>& z) {
  check_dims(t_tilde.rows() == z.rows(),
             "match_probabilities: text and image dims differ");
  check_dims(t_tilde.cols() == z.cols(), "match_probabilities: pair counts differ");
  const Eigen::Index n = t_tilde.cols();
  check_dims(n >= 1, "match_probabilities: empty pair set");

  Mat<T> z_bar(z.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const T norm = z.col(j).norm();
    check_data(norm > T(0), "match_probabilities: zero-norm image vector at column " +
                                std::to_string(j));
    z_bar.col(j) = z.col(j) / norm;
  }

  Mat<T> logits = t_tilde.transpose() * z_bar;
  Mat<T> p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.row(i) = softmax(Vec<T>(logits.row(i).transpose())).transpose();
  }
  return p;
}

/// Alignment loss between match probabilities and the true pair indicator:
/// (1/N) sum_ij p_ij log(p_ij / (q_ij + eps)), q rows = normalized O rows.
/// Terms with p_ij = 0 contribute zero.
template <typename T>
T cross_modal_loss(const Mat<T>& p, const Mat<T>& o, T eps) {
  check_dims(p.rows() == p.cols(), "cross_modal_loss: P must be square");
  check_dims(o.rows() == p.rows() && o.cols() == p.cols(),
             "cross_modal_loss: O shape must match P");
  check_data(eps > T(0), "cross_modal_loss: eps must be positive");

  const Eigen::Index n = p.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row_sum = static_cast<double>(o.row(i).sum());
    check_data(row_sum >= 1.0, "cross_modal_loss: O row " + std::to_string(i) +
                                   " has no matching pair");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pij = static_cast<double>(p(i, j));
      if (pij <= 0.0) continue;
      const double qij = static_cast<double>(o(i, j)) / row_sum;
      loss += pij * std::log(pij / (qij + static_cast<double>(eps)));
    }
  }
  return static_cast<T>(loss / static_cast<double>(n));
}

}  // namespace truthsr

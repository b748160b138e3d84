#pragma once

#include "truthsr/common.hpp"
#include "truthsr/special.hpp"

#include <cmath>
#include <span>

namespace truthsr {

/// Evidence is clamped to this bound before the Dirichlet strength is formed,
/// which keeps the conflict arithmetic in ds_combine stable.
inline constexpr double kEvidenceCap = 1e9;

/// Nonnegative per-item support. alpha_i = e_i + 1, D = sum(alpha).
template <typename T>
struct Evidence {
  Vec<T> e;

  Vec<T> alpha() const { return e.array() + T(1); }
  T strength() const { return e.sum() + static_cast<T>(e.size()); }
  int classes() const { return static_cast<int>(e.size()); }
};

/// Subjective-logic opinion: belief mass per item plus one uncertainty mass.
/// Invariant: b_i >= 0, c > 0, sum(b) + c = 1.
template <typename T>
struct Opinion {
  Vec<T> b;
  T c = T(1);

  int classes() const { return static_cast<int>(b.size()); }
};

template <typename T>
void validate_opinion(const Opinion<T>& m, double tol = 1e-9) {
  check_data(m.c > T(0), "opinion: uncertainty mass must be positive");
  check_data((m.b.array() >= T(0)).all(), "opinion: negative belief mass");
  const double mass = static_cast<double>(m.b.sum()) + static_cast<double>(m.c);
  check_data(std::abs(mass - 1.0) <= tol, "opinion: masses do not sum to one");
}

/// Rectifies raw classifier scores into evidence: e_i = max(raw_i, 0),
/// clamped to kEvidenceCap.
template <typename T>
Evidence<T> evidence_from_scores(const Vec<T>& raw) {
  check_data(raw.allFinite(), "evidence_from_scores: non-finite score");
  Evidence<T> ev;
  ev.e = raw.array().max(T(0)).min(static_cast<T>(kEvidenceCap));
  return ev;
}

/// b_i = e_i / D, c = |I| / D.
template <typename T>
Opinion<T> opinion_from_evidence(const Evidence<T>& ev) {
  check_data(ev.classes() >= 1, "opinion_from_evidence: empty evidence");
  const T d = ev.strength();
  Opinion<T> m;
  m.b = ev.e / d;
  m.c = static_cast<T>(ev.classes()) / d;
  return m;
}

/// Exact inverse of opinion_from_evidence: D = |I| / c, e_i = b_i * D.
template <typename T>
Evidence<T> dirichlet_from_opinion(const Opinion<T>& m) {
  check_data(m.c > T(0), "dirichlet_from_opinion: zero uncertainty mass");
  const T d = static_cast<T>(m.classes()) / m.c;
  Evidence<T> ev;
  ev.e = m.b * d;
  return ev;
}

/// Reduced Dempster-Shafer combination of two opinions over the same frame.
/// beta = sum_{i != j} b1_i b2_j is the conflict; 1/(1-beta) renormalizes.
template <typename T>
Opinion<T> ds_combine(const Opinion<T>& m1, const Opinion<T>& m2) {
  check_dims(m1.classes() == m2.classes(), "ds_combine: class counts differ");
  const T s1 = m1.b.sum();
  const T s2 = m2.b.sum();
  const T beta = s1 * s2 - m1.b.dot(m2.b);
  if (static_cast<double>(beta) >= 1.0 - 1e-12) {
    throw ModelError("ds_combine: total conflict between opinions");
  }
  const T norm = T(1) / (T(1) - beta);
  Opinion<T> m;
  m.b = norm * (m1.b.cwiseProduct(m2.b) + m1.c * m2.b + m2.c * m1.b);
  m.c = norm * m1.c * m2.c;
  return m;
}

/// Expected cross-entropy under the Dirichlet: psi(D) - psi(alpha_true).
template <typename T>
T dirichlet_ce_loss_index(const Vec<T>& alpha, int true_class) {
  check_data(true_class >= 0 && true_class < alpha.size(),
             "dirichlet_ce_loss: class index out of range");
  check_data((alpha.array() >= T(1) - T(1e-6)).all(),
             "dirichlet_ce_loss: alpha components must be >= 1");
  const double d = static_cast<double>(alpha.sum());
  return static_cast<T>(digamma(d) - digamma(static_cast<double>(alpha[true_class])));
}

template <typename T>
T dirichlet_ce_loss(const Vec<T>& alpha, const Vec<T>& y) {
  check_dims(alpha.size() == y.size(), "dirichlet_ce_loss: shape mismatch");
  int hot = -1;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == T(1)) {
      check_data(hot < 0, "dirichlet_ce_loss: y must be one-hot");
      hot = static_cast<int>(i);
    } else {
      check_data(y[i] == T(0), "dirichlet_ce_loss: y must be one-hot");
    }
  }
  check_data(hot >= 0, "dirichlet_ce_loss: y must have exactly one 1");
  return dirichlet_ce_loss_index(alpha, hot);
}

/// L = l_tv + lambda * (sum of per-view losses + joint loss).
template <typename T>
T total_loss(T l_tv, std::span<const T> per_view_losses, T joint_loss, T lambda) {
  check_data(lambda >= T(0), "total_loss: lambda must be nonnegative");
  T acc = joint_loss;
  for (T v : per_view_losses) acc += v;
  return l_tv + lambda * acc;
}

}  // namespace truthsr

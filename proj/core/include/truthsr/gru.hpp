#pragma once

#include "truthsr/common.hpp"

#include <cmath>
#include <vector>

namespace truthsr {

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// One GRU layer: update gate z, reset gate r, candidate h~. The reset gate
/// is applied inside the candidate's recurrent term.
template <typename T>
struct GruLayer {
  Mat<T> wz, uz;  // d_h x d_in, d_h x d_h
  Mat<T> wr, ur;
  Mat<T> wh, uh;
  Vec<T> bz, br, bh;

  Eigen::Index input_dim() const { return wz.cols(); }
  Eigen::Index hidden_dim() const { return wz.rows(); }
};

template <typename T>
struct GruParams {
  std::vector<GruLayer<T>> layers;  // layer 0 reads the input sequence
};

/// z = s(Wz x + Uz h + bz); r = s(Wr x + Ur h + br);
/// h~ = tanh(Wh x + Uh (r . h) + bh); h' = (1-z) . h + z . h~
template <typename T>
Vec<T> gru_step(const Vec<T>& h_prev, const Vec<T>& x, const GruLayer<T>& layer) {
  check_dims(x.size() == layer.input_dim(), "gru_step: input dim mismatch");
  check_dims(h_prev.size() == layer.hidden_dim(), "gru_step: hidden dim mismatch");

  Vec<T> z = layer.wz * x + layer.uz * h_prev + layer.bz;
  Vec<T> r = layer.wr * x + layer.ur * h_prev + layer.br;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = stable_sigmoid(z[i]);
    r[i] = stable_sigmoid(r[i]);
  }
  Vec<T> cand = (layer.wh * x + layer.uh * (r.cwiseProduct(h_prev)) + layer.bh).array().tanh();
  return (Vec<T>::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(cand);
}

/// Runs the stack over a d_in x N sequence, zero initial state per layer,
/// feeding each layer's hidden sequence to the next; returns the top layer's
/// final hidden state.
template <typename T>
Vec<T> encode_view(const Mat<T>& x_seq, const GruParams<T>& params) {
  check_dims(x_seq.cols() >= 1, "encode_view: empty sequence");
  check_data(!params.layers.empty(), "encode_view: needs at least one layer");

  std::vector<Vec<T>> h;
  h.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    h.push_back(Vec<T>::Zero(layer.hidden_dim()));
  }
  for (Eigen::Index t = 0; t < x_seq.cols(); ++t) {
    Vec<T> input = x_seq.col(t);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      h[l] = gru_step(h[l], input, params.layers[l]);
      input = h[l];
    }
  }
  return h.back();
}

}  // namespace truthsr

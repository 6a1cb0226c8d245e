#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "gazecl/numcore/ops.hpp"
#include "gazecl/numcore/tensor.hpp"

namespace gazecl::objective {

using numcore::ContractError;
using numcore::i64;
using numcore::NumericError;
using numcore::Tensor;

// Pairwise cosine similarities of 2N projection rows. Symmetric with unit
// diagonal; all entries clamped to [-1, 1].
template <typename T>
struct SimilarityMatrix {
  i64 n = 0;
  std::vector<T> values;  // row-major [n, n]

  T at(i64 i, i64 j) const { return values[i * n + j]; }
};

// Total loss plus the per-anchor terms it averages.
template <typename T>
struct LossValue {
  T total = T(0);
  std::vector<T> per_anchor;
};

namespace detail {

template <typename T>
void check_pair_map(const std::vector<i64>& pair_of, i64 n) {
  if (static_cast<i64>(pair_of.size()) != n)
    throw ContractError("nt_xent: pair map covers " +
                        std::to_string(pair_of.size()) + " slots, batch has " +
                        std::to_string(n));
  for (i64 i = 0; i < n; ++i) {
    if (pair_of[i] < 0 || pair_of[i] >= n || pair_of[i] == i ||
        pair_of[pair_of[i]] != i)
      throw ContractError(
          "nt_xent: pair map must be an involution without fixed points "
          "(violated at slot " +
          std::to_string(i) + ")");
  }
}

// Stable per-anchor terms: l_i = logsumexp_{k != i}(s_ik / tau) - s_{i,p(i)} / tau.
template <typename T>
std::vector<T> anchor_terms(const T* sim, i64 n, const std::vector<i64>& pair_of,
                            T tau) {
  std::vector<T> terms(static_cast<std::size_t>(n));
  for (i64 i = 0; i < n; ++i) {
    const T* row = sim + i * n;
    T m = -std::numeric_limits<T>::infinity();
    for (i64 k = 0; k < n; ++k)
      if (k != i) m = std::max(m, row[k] / tau);
    T sum = T(0);
    for (i64 k = 0; k < n; ++k)
      if (k != i) sum += std::exp(row[k] / tau - m);
    terms[i] = m + std::log(sum) - row[pair_of[i]] / tau;
  }
  return terms;
}

}  // namespace detail

template <typename T>
SimilarityMatrix<T> cosine_similarity_matrix(const Tensor<T>& z) {
  if (z.rank() != 2)
    throw ContractError("cosine_similarity_matrix: input must be [2N, d_z]");
  const i64 n = z.dim(0), d = z.dim(1);
  const T* pz = z.data().data();

  std::vector<T> norms(static_cast<std::size_t>(n));
  for (i64 i = 0; i < n; ++i) {
    T sq = T(0);
    const T* row = pz + i * d;
    for (i64 c = 0; c < d; ++c) sq += row[c] * row[c];
    norms[i] = std::sqrt(sq);
    if (static_cast<double>(norms[i]) < 1e-12)
      throw NumericError("cosine_similarity_matrix: row " + std::to_string(i) +
                         " has near-zero norm (degenerate embedding)");
  }

  SimilarityMatrix<T> out;
  out.n = n;
  out.values.assign(static_cast<std::size_t>(n * n), T(0));
  for (i64 i = 0; i < n; ++i) {
    out.values[i * n + i] = T(1);
    for (i64 j = i + 1; j < n; ++j) {
      const T* a = pz + i * d;
      const T* b = pz + j * d;
      T dot = T(0);
      for (i64 c = 0; c < d; ++c) dot += a[c] * b[c];
      T s = dot / (norms[i] * norms[j]);
      // Identical rows have cosine exactly 1; report it that way instead of
      // the rounded quotient.
      if (s > T(1) - T(1e-6) &&
          std::memcmp(a, b, static_cast<std::size_t>(d) * sizeof(T)) == 0)
        s = T(1);
      s = std::clamp(s, T(-1), T(1));
      out.values[i * n + j] = s;
      out.values[j * n + i] = s;
    }
  }
  return out;
}

template <typename T>
LossValue<T> nt_xent_from_similarity(const SimilarityMatrix<T>& sim,
                                     const std::vector<i64>& pair_of, T tau) {
  if (!(tau > T(0))) throw ContractError("nt_xent: temperature must be > 0");
  detail::check_pair_map<T>(pair_of, sim.n);
  LossValue<T> out;
  out.per_anchor = detail::anchor_terms(sim.values.data(), sim.n, pair_of, tau);
  T total = T(0);
  for (T v : out.per_anchor) total += v;
  out.total = total / static_cast<T>(sim.n);
  return out;
}

template <typename T>
LossValue<T> nt_xent(const Tensor<T>& z, const std::vector<i64>& pair_of,
                     T tau) {
  return nt_xent_from_similarity(cosine_similarity_matrix(z), pair_of, tau);
}

// Differentiable NT-Xent for training: row-normalize, form the similarity
// matrix, reduce with the stabilized per-anchor terms.
template <typename T>
Tensor<T> nt_xent_loss(const Tensor<T>& z, std::vector<i64> pair_of, T tau) {
  if (!(tau > T(0))) throw ContractError("nt_xent: temperature must be > 0");
  if (z.rank() != 2) throw ContractError("nt_xent: input must be [2N, d_z]");
  const i64 n = z.dim(0);
  detail::check_pair_map<T>(pair_of, n);

  auto zn = numcore::row_l2_normalize(z);
  auto sim = numcore::matmul_nt(zn, zn);

  auto terms = detail::anchor_terms(sim.data().data(), n, pair_of, tau);
  T total = T(0);
  for (T v : terms) total += v;
  total /= static_cast<T>(n);

  auto sn = sim.node();
  return numcore::detail::make_result<T>(
      {}, {total}, {sim},
      [sn, n, tau, pair_of = std::move(pair_of)](numcore::detail::Node<T>& self) {
        if (!sn->requires_grad) return;
        sn->ensure_grad();
        const T go = self.grad[0] / (static_cast<T>(n) * tau);
        const T* s = sn->value.data();
        T* gs = sn->grad.data();
        for (i64 i = 0; i < n; ++i) {
          const T* row = s + i * n;
          T m = -std::numeric_limits<T>::infinity();
          for (i64 k = 0; k < n; ++k)
            if (k != i) m = std::max(m, row[k] / tau);
          T sum = T(0);
          for (i64 k = 0; k < n; ++k)
            if (k != i) sum += std::exp(row[k] / tau - m);
          T* grow = gs + i * n;
          for (i64 k = 0; k < n; ++k) {
            if (k == i) continue;
            const T w = std::exp(row[k] / tau - m) / sum;
            grow[k] += go * (w - (k == pair_of[i] ? T(1) : T(0)));
          }
        }
      });
}

// Canonical slot layout: slots [0, N) pair with [N, 2N).
inline std::vector<i64> paired_layout(i64 n_pairs) {
  std::vector<i64> map(static_cast<std::size_t>(2 * n_pairs));
  for (i64 i = 0; i < n_pairs; ++i) {
    map[i] = i + n_pairs;
    map[i + n_pairs] = i;
  }
  return map;
}

}  // namespace gazecl::objective

#include <algorithm>
#include <cmath>
#include <map>

#include "gazecl/numcore/parallel.hpp"
#include "gazecl/probe/probe.hpp"

namespace gazecl::probe {

namespace {

// Full-batch projected subgradient descent on
//   F(w) = (lambda/2) ||w||^2 + (1/n) sum_i hinge(y_i, w . x_i)
// with lambda = 1 / (C n), which shares its minimizer with the primal
// 0.5 ||w||^2 + C sum hinge. The bias rides as an augmented coordinate.
// Step 1/(lambda t) plus tail averaging; no randomness anywhere.
std::vector<double> train_binary(const std::vector<const float*>& x, i64 dim,
                                 const std::vector<double>& y, double C,
                                 i64 iterations) {
  const i64 n = static_cast<i64>(x.size());
  const i64 adim = dim + 1;
  const double lambda = 1.0 / (C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  std::vector<double> w(adim, 0.0), avg(adim, 0.0), grad(adim, 0.0);
  i64 avg_count = 0;
  for (i64 t = 1; t <= iterations; ++t) {
    for (i64 d = 0; d < adim; ++d) grad[d] = lambda * w[d];
    for (i64 i = 0; i < n; ++i) {
      double dot = w[dim];  // bias coordinate
      const float* xi = x[i];
      for (i64 d = 0; d < dim; ++d) dot += w[d] * xi[d];
      if (y[i] * dot < 1.0) {
        const double scale = -y[i] / static_cast<double>(n);
        for (i64 d = 0; d < dim; ++d) grad[d] += scale * xi[d];
        grad[dim] += scale;
      }
    }
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    for (i64 d = 0; d < adim; ++d) w[d] -= eta * grad[d];

    double norm_sq = 0.0;
    for (double v : w) norm_sq += v * v;
    if (norm_sq > radius * radius) {
      const double scale = radius / std::sqrt(norm_sq);
      for (double& v : w) v *= scale;
    }
    if (2 * t > iterations) {
      for (i64 d = 0; d < adim; ++d) avg[d] += w[d];
      ++avg_count;
    }
  }
  for (i64 d = 0; d < adim; ++d) avg[d] /= static_cast<double>(avg_count);
  return avg;
}

}  // namespace

i64 LinearSVMModel::predict(const float* x) const {
  i64 best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (i64 c = 0; c < static_cast<i64>(classes.size()); ++c) {
    double score = biases[c];
    const double* w = weights.data() + c * dim;
    for (i64 d = 0; d < dim; ++d) score += w[d] * x[d];
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

LinearSVMModel train_linear_svm(const EmbeddingSet& train,
                                const SVMOptions& options) {
  std::map<std::string, i64> counts;
  for (const auto& row : train.rows) counts[row.viewer_id]++;
  if (counts.size() < 2)
    throw numcore::ContractError(
        "train_linear_svm: need at least 2 classes, got " +
        std::to_string(counts.size()));
  for (const auto& [cls, count] : counts)
    if (count < 2)
      throw numcore::ContractError("train_linear_svm: class \"" + cls +
                                   "\" has fewer than 2 examples");

  LinearSVMModel model;
  model.dim = train.dim;
  model.C = options.C;
  for (const auto& [cls, count] : counts) model.classes.push_back(cls);
  model.weights.assign(model.classes.size() * train.dim, 0.0);
  model.biases.assign(model.classes.size(), 0.0);

  std::vector<const float*> x;
  x.reserve(train.rows.size());
  for (const auto& row : train.rows) x.push_back(row.h.data());

  // One-vs-rest problems are independent; solve them in parallel.
  numcore::parallel_for(
      static_cast<i64>(model.classes.size()), [&](i64 lo, i64 hi) {
        for (i64 c = lo; c < hi; ++c) {
          std::vector<double> y;
          y.reserve(train.rows.size());
          for (const auto& row : train.rows)
            y.push_back(row.viewer_id == model.classes[c] ? 1.0 : -1.0);
          const auto w =
              train_binary(x, train.dim, y, options.C, options.iterations);
          std::copy(w.begin(), w.begin() + train.dim,
                    model.weights.begin() + c * train.dim);
          model.biases[c] = w[train.dim];
        }
      });
  return model;
}

double svm_objective(const std::vector<std::vector<double>>& x,
                     const std::vector<double>& y,
                     const std::vector<double>& w, double b, double C) {
  double obj = 0.0;
  for (double v : w) obj += 0.5 * v * v;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dot = b;
    for (std::size_t d = 0; d < w.size(); ++d) dot += w[d] * x[i][d];
    obj += C * std::max(0.0, 1.0 - y[i] * dot);
  }
  return obj;
}

}  // namespace gazecl::probe

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "gazecl/numcore/hash.hpp"
#include "gazecl/probe/probe.hpp"

namespace gazecl::probe {

namespace {

std::string fingerprint(const EmbeddingSet& data, const SVMOptions& options,
                        i64 folds) {
  std::string desc = "dim=" + std::to_string(data.dim) +
                     ";rows=" + std::to_string(data.rows.size()) +
                     ";C=" + std::to_string(options.C) +
                     ";iters=" + std::to_string(options.iterations) +
                     ";folds=" + std::to_string(folds);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(numcore::fnv1a64(desc)));
  return buf;
}

}  // namespace

EvalReport evaluate(const LinearSVMModel& model, const EmbeddingSet& test) {
  if (test.rows.empty())
    throw numcore::ContractError("evaluate: empty test set");
  if (test.dim != model.dim)
    throw numcore::ContractError("evaluate: embedding width mismatch");
  std::set<std::string> known(model.classes.begin(), model.classes.end());
  for (const auto& row : test.rows)
    if (known.count(row.viewer_id) == 0)
      throw numcore::ContractError("evaluate: unknown class label \"" +
                                   row.viewer_id + "\"");

  std::map<std::string, std::pair<i64, i64>> per_class;  // correct, total
  i64 correct = 0;
  for (const auto& row : test.rows) {
    const i64 pred = model.predict(row.h.data());
    const bool hit = model.classes[pred] == row.viewer_id;
    correct += hit;
    auto& [c, t] = per_class[row.viewer_id];
    c += hit;
    t += 1;
  }

  EvalReport report;
  report.task = "viewer-identification";
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(test.rows.size());
  for (const auto& [cls, ct] : per_class)
    report.per_class_accuracy[cls] =
        static_cast<double>(ct.first) / static_cast<double>(ct.second);
  report.split = "held-out test set";
  report.config_fingerprint = fingerprint(test, {}, 1);
  return report;
}

std::vector<i64> stratified_folds(const EmbeddingSet& embeddings, i64 k) {
  if (k < 2) throw numcore::ContractError("stratified_folds: need k >= 2");
  const i64 n = static_cast<i64>(embeddings.rows.size());
  // Deterministic order: sort row indices by (viewer, recording), then deal
  // each viewer's rows round-robin.
  std::vector<i64> order(n);
  for (i64 i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](i64 a, i64 b) {
    const auto& ra = embeddings.rows[a];
    const auto& rb = embeddings.rows[b];
    if (ra.viewer_id != rb.viewer_id) return ra.viewer_id < rb.viewer_id;
    return ra.recording_id < rb.recording_id;
  });
  std::vector<i64> fold(n, 0);
  std::string current;
  i64 within = 0;
  for (i64 i = 0; i < n; ++i) {
    const auto& row = embeddings.rows[order[i]];
    if (row.viewer_id != current) {
      current = row.viewer_id;
      within = 0;
    }
    fold[order[i]] = within % k;
    ++within;
  }
  return fold;
}

EvalReport cross_validate(const EmbeddingSet& embeddings, i64 folds,
                          const SVMOptions& options, const std::string& task) {
  const auto fold_of = stratified_folds(embeddings, folds);

  EvalReport report;
  report.task = task;
  report.split =
      "viewer-stratified " + std::to_string(folds) + "-fold cross-validation";
  report.config_fingerprint = fingerprint(embeddings, options, folds);

  std::map<std::string, std::pair<i64, i64>> per_class;
  i64 correct_total = 0;
  for (i64 f = 0; f < folds; ++f) {
    EmbeddingSet train_set, test_set;
    train_set.dim = test_set.dim = embeddings.dim;
    for (std::size_t i = 0; i < embeddings.rows.size(); ++i) {
      (fold_of[i] == f ? test_set : train_set).rows.push_back(embeddings.rows[i]);
    }
    const auto model = train_linear_svm(train_set, options);
    i64 correct = 0;
    for (const auto& row : test_set.rows) {
      const bool hit = model.classes[model.predict(row.h.data())] == row.viewer_id;
      correct += hit;
      auto& [c, t] = per_class[row.viewer_id];
      c += hit;
      t += 1;
    }
    report.fold_accuracies.push_back(
        static_cast<double>(correct) /
        static_cast<double>(test_set.rows.size()));
    correct_total += correct;
  }
  report.accuracy = static_cast<double>(correct_total) /
                    static_cast<double>(embeddings.rows.size());
  for (const auto& [cls, ct] : per_class)
    report.per_class_accuracy[cls] =
        static_cast<double>(ct.first) / static_cast<double>(ct.second);
  return report;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["task"] = report.task;
  j["accuracy"] = report.accuracy;
  j["per_class_accuracy"] = report.per_class_accuracy;
  j["split"] = report.split;
  j["config_fingerprint"] = report.config_fingerprint;
  if (!report.fold_accuracies.empty()) {
    j["fold_accuracies"] = report.fold_accuracies;
    double mean = 0;
    for (double a : report.fold_accuracies) mean += a;
    j["fold_mean_accuracy"] = mean / report.fold_accuracies.size();
  }
  return j.dump(2) + "\n";
}

}  // namespace gazecl::probe

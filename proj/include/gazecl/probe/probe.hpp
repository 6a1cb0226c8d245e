#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/pipeline/checkpoint.hpp"
#include "gazecl/pipeline/config.hpp"

namespace gazecl::probe {

using i64 = std::int64_t;

struct EmbeddingRow {
  std::string recording_id;
  std::string viewer_id;
  std::string dataset_id;
  std::vector<float> h;
};

struct EmbeddingSet {
  i64 dim = 0;
  std::vector<EmbeddingRow> rows;
};

// Eval-mode representations of full-length recordings; the projection head
// is not applied.
EmbeddingSet embed_corpus(pipeline::Checkpoint& checkpoint,
                          const std::vector<ingest::VelocitySignal>& corpus);

// CSV with header recording_id,viewer_id,dataset_id,h_0,...,h_{dim-1}.
void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

// One-vs-rest linear SVM trained by deterministic full-batch subgradient
// descent on the L2-regularized hinge loss.
struct LinearSVMModel {
  i64 dim = 0;
  double C = 1.0;
  std::vector<std::string> classes;
  std::vector<double> weights;  // [classes][dim]
  std::vector<double> biases;   // [classes]

  i64 predict(const float* x) const;
};

struct SVMOptions {
  double C = 1.0;
  i64 iterations = 10000;
};

LinearSVMModel train_linear_svm(const EmbeddingSet& train,
                                const SVMOptions& options = {});

// Primal objective 0.5 ||w||^2 + C * sum hinge for one binary problem; used
// by tests to compare against exhaustive search.
double svm_objective(const std::vector<std::vector<double>>& x,
                     const std::vector<double>& y,
                     const std::vector<double>& w, double b, double C);

struct EvalReport {
  std::string task;
  double accuracy = 0.0;
  std::map<std::string, double> per_class_accuracy;
  std::string split;
  std::string config_fingerprint;
  std::vector<double> fold_accuracies;  // filled by cross_validate
};

EvalReport evaluate(const LinearSVMModel& model, const EmbeddingSet& test);

// Viewer-stratified k-fold assignment: each viewer's rows are spread across
// folds in near-proportional counts (within one).
std::vector<i64> stratified_folds(const EmbeddingSet& embeddings, i64 k);

EvalReport cross_validate(const EmbeddingSet& embeddings, i64 folds,
                          const SVMOptions& options = {},
                          const std::string& task = "viewer-identification");

std::string to_json(const EvalReport& report);

// Ablation grid: one trained model per (cell, seed), probed with the shared
// protocol.
struct AblationCell {
  std::string name;
  std::vector<augment::CropMethod> crops;
  std::vector<augment::TransformKind> transforms;
};

struct AblationRow {
  std::string name;
  bool ok = false;
  std::string error;
  std::vector<double> seed_accuracies;
  double mean_accuracy = 0.0;
};

std::vector<AblationRow> ablation_run(
    const std::vector<AblationCell>& grid,
    const std::vector<ingest::VelocitySignal>& corpus,
    const pipeline::TrainConfig& base,
    const std::vector<std::uint64_t>& seeds, i64 eval_folds = 5,
    const SVMOptions& options = {});

void write_ablation_table(const std::filesystem::path& path,
                          const std::vector<AblationRow>& rows);

}  // namespace gazecl::probe

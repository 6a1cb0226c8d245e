#include <fstream>

#include "gazecl/pipeline/train.hpp"
#include "gazecl/probe/probe.hpp"

namespace gazecl::probe {

std::vector<AblationRow> ablation_run(
    const std::vector<AblationCell>& grid,
    const std::vector<ingest::VelocitySignal>& corpus,
    const pipeline::TrainConfig& base, const std::vector<std::uint64_t>& seeds,
    i64 eval_folds, const SVMOptions& options) {
  if (seeds.empty())
    throw numcore::ContractError("ablation_run: need at least one seed");

  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    AblationRow row;
    row.name = cell.name;
    try {
      for (std::uint64_t seed : seeds) {
        pipeline::TrainConfig cfg = base;
        cfg.crops = cell.crops;
        cfg.transforms = cell.transforms;
        cfg.seed = seed;
        cfg.validate();

        auto result = pipeline::train(cfg, corpus);
        if (result.aborted)
          throw std::runtime_error("training aborted: " + result.abort_reason);
        auto embeddings = embed_corpus(result.checkpoint, corpus);
        const auto report =
            cross_validate(embeddings, eval_folds, options, cell.name);
        row.seed_accuracies.push_back(report.accuracy);
      }
      double mean = 0;
      for (double a : row.seed_accuracies) mean += a;
      row.mean_accuracy = mean / static_cast<double>(row.seed_accuracies.size());
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_table(const std::filesystem::path& path,
                          const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw numcore::ContractError("cannot write ablation table " + path.string());
  out << "configuration,status,mean_accuracy,seed_accuracies\n";
  char buf[32];
  for (const auto& row : rows) {
    out << row.name << ',' << (row.ok ? "ok" : "error") << ',';
    if (row.ok) {
      std::snprintf(buf, sizeof(buf), "%.6f", row.mean_accuracy);
      out << buf;
    } else {
      out << "n/a";
    }
    out << ',';
    if (row.ok) {
      for (std::size_t i = 0; i < row.seed_accuracies.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", row.seed_accuracies[i]);
        out << (i ? "|" : "") << buf;
      }
    } else {
      std::string msg = row.error;
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      out << msg;
    }
    out << "\n";
  }
}

}  // namespace gazecl::probe

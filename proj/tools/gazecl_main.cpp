// Command-line front end: synthesize corpora, train encoders, export
// embeddings, evaluate biometric probes, and sweep augmentation ablations.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/numcore/parallel.hpp"
#include "gazecl/pipeline/checkpoint.hpp"
#include "gazecl/pipeline/train.hpp"
#include "gazecl/probe/probe.hpp"

namespace fs = std::filesystem;
using namespace gazecl;
using gazecl::pipeline::i64;

namespace {

std::vector<ingest::VelocitySignal> load_signals(const fs::path& manifest) {
  return ingest::preprocess_all(ingest::load_manifest(manifest));
}

int cmd_synth(i64 viewers, i64 per_viewer, double duration, std::uint64_t seed,
              const fs::path& out_dir) {
  ingest::SynthParams sp;
  sp.num_viewers = viewers;
  sp.recordings_per_viewer = per_viewer;
  sp.duration_s = duration;
  sp.seed = seed;
  const auto corpus = ingest::synthesize_corpus(sp);
  ingest::write_corpus(out_dir, corpus);
  std::cout << "wrote " << corpus.size() << " recordings ("
            << viewers << " viewers x " << per_viewer << " x " << duration
            << " s) under " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& manifest,
              const fs::path& out_ckpt) {
  std::vector<std::string> overrides;
  const auto config = pipeline::TrainConfig::load(config_path, &overrides);
  for (const auto& key : overrides)
    std::cout << "config override: " << key << "\n";

  const auto corpus = load_signals(manifest);
  std::cout << "corpus: " << corpus.size() << " recordings, "
            << corpus.size() / config.batch_size << " batches per epoch\n";

  auto result = pipeline::train(config, corpus);
  pipeline::save_checkpoint(out_ckpt, result.checkpoint);
  const fs::path loss_path = out_ckpt.string() + ".losses.csv";
  pipeline::write_loss_log(loss_path, result.losses);

  if (!result.losses.empty()) {
    double first = 0, last = 0;
    i64 nf = 0, nl = 0;
    const i64 first_epoch = result.losses.front().epoch;
    const i64 last_epoch = result.losses.back().epoch;
    for (const auto& e : result.losses) {
      if (e.epoch == first_epoch) { first += e.loss; ++nf; }
      if (e.epoch == last_epoch) { last += e.loss; ++nl; }
    }
    std::cout << "epoch " << first_epoch << " mean loss " << first / nf
              << "; epoch " << last_epoch << " mean loss " << last / nl << "\n";
  }
  std::cout << "checkpoint: " << out_ckpt.string() << " (loss log "
            << loss_path.string() << ")\n";

  if (result.aborted) {
    std::cerr << "training aborted: " << result.abort_reason
              << " (last good state saved)\n";
    return 2;
  }
  return 0;
}

int cmd_embed(const fs::path& ckpt_path, const fs::path& manifest,
              const fs::path& out_csv, i64 threads) {
  numcore::set_num_threads(static_cast<int>(threads));
  auto ckpt = pipeline::load_checkpoint(ckpt_path);
  const auto corpus = load_signals(manifest);
  const auto embeddings = probe::embed_corpus(ckpt, corpus);
  probe::write_embeddings(out_csv, embeddings);
  std::cout << "wrote " << embeddings.rows.size() << " embeddings of width "
            << embeddings.dim << " to " << out_csv.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& emb_path, const fs::path& report_path,
             const std::string& task, i64 folds, double svm_c, i64 iterations) {
  const auto embeddings = probe::read_embeddings(emb_path);
  const auto report =
      probe::cross_validate(embeddings, folds, {svm_c, iterations}, task);
  std::ofstream out(report_path);
  if (!out) throw std::runtime_error("cannot write " + report_path.string());
  out << probe::to_json(report);
  std::cout << "accuracy " << report.accuracy << " over "
            << embeddings.rows.size() << " recordings (" << report.split
            << "); report " << report_path.string() << "\n";
  return 0;
}

int cmd_ablate(const fs::path& grid_path, const fs::path& manifest,
               const fs::path& out_table) {
  std::ifstream in(grid_path);
  if (!in) throw std::runtime_error("cannot open grid " + grid_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto sections = pipeline::parse_sections(ss.str(), grid_path.string());

  pipeline::TrainConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<probe::AblationCell> grid;
  for (const auto& [name, kv] : sections) {
    if (name.empty()) {
      pipeline::KeyValues config_kv;
      for (const auto& [key, value] : kv) {
        if (key == "seeds") {
          for (const auto& item : value.items)
            seeds.push_back(std::stoull(item));
        } else {
          config_kv.emplace_back(key, value);
        }
      }
      base.apply(config_kv);
      continue;
    }
    if (name.rfind("cell ", 0) != 0)
      throw std::runtime_error(grid_path.string() + ": section [" + name +
                               "] should be [cell <name>]");
    probe::AblationCell cell;
    cell.name = name.substr(5);
    for (const auto& [key, value] : kv) {
      if (key == "crops") {
        for (const auto& item : value.items)
          cell.crops.push_back(augment::crop_from_string(item));
      } else if (key == "transforms") {
        for (const auto& item : value.items)
          cell.transforms.push_back(augment::transform_from_string(item));
      } else {
        throw std::runtime_error(grid_path.string() + ": cell key \"" + key +
                                 "\" (expected crops/transforms)");
      }
    }
    grid.push_back(std::move(cell));
  }
  if (grid.empty())
    throw std::runtime_error(grid_path.string() + ": no [cell ...] sections");
  if (seeds.empty()) seeds.push_back(base.seed);

  const auto corpus = load_signals(manifest);
  const auto rows = probe::ablation_run(grid, corpus, base, seeds);
  probe::write_ablation_table(out_table, rows);
  for (const auto& row : rows) {
    if (row.ok)
      std::cout << row.name << ": mean accuracy " << row.mean_accuracy << "\n";
    else
      std::cout << row.name << ": ERROR " << row.error << "\n";
  }
  std::cout << "table: " << out_table.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive representation learning for gaze velocity signals"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic gaze corpus");
  i64 viewers = 10, per_viewer = 200;
  double duration = 3.0;
  std::uint64_t seed = 1;
  std::string out_dir;
  synth->add_option("--viewers", viewers, "number of synthetic viewers");
  synth->add_option("--per-viewer", per_viewer, "recordings per viewer");
  synth->add_option("--duration", duration, "recording length in seconds");
  synth->add_option("--seed", seed, "corpus seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train an encoder on a manifest");
  std::string config_path, data_path, ckpt_path;
  train->add_option("--config", config_path, "training config file")->required();
  train->add_option("--data", data_path, "manifest csv")->required();
  train->add_option("--out", ckpt_path, "output checkpoint")->required();

  // embed
  auto* embed = app.add_subcommand("embed", "encode recordings to vectors");
  std::string emb_ckpt, emb_data, emb_out;
  i64 emb_threads = 0;
  embed->add_option("--ckpt", emb_ckpt, "checkpoint file")->required();
  embed->add_option("--data", emb_data, "manifest csv")->required();
  embed->add_option("--out", emb_out, "output embeddings csv")->required();
  embed->add_option("--threads", emb_threads, "worker threads (0 = all)");

  // eval
  auto* eval = app.add_subcommand("eval", "linear-probe biometric evaluation");
  std::string eval_emb, eval_report, eval_task = "viewer-identification";
  i64 eval_folds = 5, eval_iters = 10000;
  double eval_c = 1.0;
  eval->add_option("--embeddings", eval_emb, "embeddings csv")->required();
  eval->add_option("--report", eval_report, "output report json")->required();
  eval->add_option("--task", eval_task, "task name for the report");
  eval->add_option("--folds", eval_folds, "cross-validation folds");
  eval->add_option("--svm-c", eval_c, "SVM regularization C");
  eval->add_option("--iterations", eval_iters, "SVM subgradient iterations");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "crop/transform ablation grid");
  std::string grid_path, ablate_data, ablate_out;
  ablate->add_option("--grid", grid_path, "grid definition file")->required();
  ablate->add_option("--data", ablate_data, "manifest csv")->required();
  ablate->add_option("--out", ablate_out, "output table csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(viewers, per_viewer, duration, seed, out_dir);
    if (train->parsed()) return cmd_train(config_path, data_path, ckpt_path);
    if (embed->parsed())
      return cmd_embed(emb_ckpt, emb_data, emb_out, emb_threads);
    if (eval->parsed())
      return cmd_eval(eval_emb, eval_report, eval_task, eval_folds, eval_c,
                      eval_iters);
    if (ablate->parsed()) return cmd_ablate(grid_path, ablate_data, ablate_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

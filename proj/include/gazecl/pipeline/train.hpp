#pragma once

#include <string>
#include <vector>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/pipeline/checkpoint.hpp"
#include "gazecl/pipeline/config.hpp"

namespace gazecl::pipeline {

struct LossEntry {
  i64 epoch = 0;
  i64 iteration = 0;  // global optimizer step index
  float loss = 0.0f;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossEntry> losses;
  bool aborted = false;
  std::string abort_reason;
};

// Deterministic substream tree: every random choice in a run is a pure
// function of (seed, role, epoch, batch), so a resumed run replays exactly.
numcore::Rng init_rng(std::uint64_t seed);
numcore::Rng epoch_rng(std::uint64_t seed, i64 epoch);
numcore::Rng batch_rng(std::uint64_t seed, i64 epoch, i64 batch);

// Shuffle order of the corpus for one epoch (sampling without replacement;
// batch b reads slots [b*N, (b+1)*N)).
std::vector<i64> epoch_permutation(std::uint64_t seed, i64 epoch, i64 n);

// Dataset filter from the config's `datasets` selection (empty keeps all).
std::vector<ingest::VelocitySignal> select_datasets(
    const TrainConfig& config, const std::vector<ingest::VelocitySignal>& corpus);

// Contrastive training: per iteration, assemble a PairBatch, encode, project,
// evaluate the contrastive loss, backpropagate and step Adam. An epoch runs
// floor(|corpus| / N) batches; the trailing partial batch is dropped. A
// non-finite loss or gradient aborts with the last good state retained.
TrainResult train(const TrainConfig& config,
                  const std::vector<ingest::VelocitySignal>& corpus);

// Continues a checkpoint to its config's epoch target on the same corpus.
TrainResult resume(Checkpoint checkpoint,
                   const std::vector<ingest::VelocitySignal>& corpus);

void write_loss_log(const std::filesystem::path& path,
                    const std::vector<LossEntry>& losses);

}  // namespace gazecl::pipeline

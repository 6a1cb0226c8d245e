#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gazecl/numcore/parallel.hpp"
#include "gazecl/objective/objective.hpp"
#include "gazecl/pipeline/train.hpp"

namespace gazecl::pipeline {

namespace {

// Substream roles under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kBatchStream = 3;

TrainResult run_loop(Checkpoint state,
                     const std::vector<ingest::VelocitySignal>& corpus) {
  const TrainConfig& cfg = state.config;
  cfg.validate();

  const auto signals = select_datasets(cfg, corpus);
  const i64 n = cfg.batch_size;
  if (static_cast<i64>(signals.size()) < n)
    throw numcore::ContractError(
        "train: corpus has " + std::to_string(signals.size()) +
        " signals after dataset selection, batch size is " + std::to_string(n));

  numcore::set_num_threads(static_cast<int>(cfg.threads));
  const i64 batches_per_epoch = static_cast<i64>(signals.size()) / n;

  auto named = state.params.named_parameters();
  std::vector<numcore::Tensor<float>> tensors;
  tensors.reserve(named.size());
  for (auto& [name, t] : named) tensors.push_back(t);

  TrainResult result;
  for (i64 epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const auto perm =
        epoch_permutation(cfg.seed, epoch, static_cast<i64>(signals.size()));
    const i64 start_batch = state.iteration - epoch * batches_per_epoch;
    for (i64 b = start_batch; b < batches_per_epoch; ++b) {
      std::vector<ingest::VelocitySignal> chosen;
      chosen.reserve(n);
      for (i64 j = 0; j < n; ++j) chosen.push_back(signals[perm[b * n + j]]);

      auto rng = batch_rng(cfg.seed, epoch, b);
      auto batch = augment::make_batch(chosen, n, cfg.segment_length,
                                       cfg.crops, cfg.transforms, rng);

      auto x = numcore::Tensor<float>::from(
          {2 * n, 2, cfg.segment_length}, std::move(batch.segments));
      auto h = encoder::forward_features(state.params, x,
                                         numcore::NormMode::Train);
      auto z = encoder::project(state.params, h);
      auto loss = objective::nt_xent_loss(
          z, batch.pair_of, static_cast<float>(cfg.temperature));

      const float loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        result.aborted = true;
        result.abort_reason = "non-finite loss at epoch " +
                              std::to_string(epoch) + " iteration " +
                              std::to_string(state.iteration);
        result.checkpoint = std::move(state);
        return result;
      }

      for (auto& t : tensors) t.zero_grad();
      numcore::backward(loss);
      try {
        numcore::adam_step(tensors, state.adam,
                           static_cast<float>(cfg.learning_rate));
      } catch (const numcore::NumericError& e) {
        result.aborted = true;
        result.abort_reason = std::string(e.what()) + " at epoch " +
                              std::to_string(epoch) + " iteration " +
                              std::to_string(state.iteration);
        result.checkpoint = std::move(state);
        return result;
      }

      result.losses.push_back({epoch, state.iteration, loss_value});
      state.iteration += 1;
    }
    state.epoch = epoch + 1;
  }
  result.checkpoint = std::move(state);
  return result;
}

}  // namespace

numcore::Rng init_rng(std::uint64_t seed) {
  return numcore::Rng(seed).fork(kInitStream);
}

numcore::Rng epoch_rng(std::uint64_t seed, i64 epoch) {
  return numcore::Rng(seed).fork(kShuffleStream).fork(
      static_cast<std::uint64_t>(epoch));
}

numcore::Rng batch_rng(std::uint64_t seed, i64 epoch, i64 batch) {
  return numcore::Rng(seed)
      .fork(kBatchStream)
      .fork(static_cast<std::uint64_t>(epoch))
      .fork(static_cast<std::uint64_t>(batch));
}

std::vector<i64> epoch_permutation(std::uint64_t seed, i64 epoch, i64 n) {
  auto rng = epoch_rng(seed, epoch);
  std::vector<i64> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (i64 i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  return perm;
}

std::vector<ingest::VelocitySignal> select_datasets(
    const TrainConfig& config,
    const std::vector<ingest::VelocitySignal>& corpus) {
  if (config.datasets.empty()) return corpus;
  std::vector<ingest::VelocitySignal> out;
  for (const auto& sig : corpus) {
    if (std::find(config.datasets.begin(), config.datasets.end(),
                  sig.dataset_id) != config.datasets.end())
      out.push_back(sig);
  }
  return out;
}

TrainResult train(const TrainConfig& config,
                  const std::vector<ingest::VelocitySignal>& corpus) {
  Checkpoint state;
  state.config = config;
  state.params = encoder::init_params<float>(config.encoder,
                                             init_rng(config.seed));
  return run_loop(std::move(state), corpus);
}

TrainResult resume(Checkpoint checkpoint,
                   const std::vector<ingest::VelocitySignal>& corpus) {
  return run_loop(std::move(checkpoint), corpus);
}

void write_loss_log(const std::filesystem::path& path,
                    const std::vector<LossEntry>& losses) {
  std::ofstream out(path);
  if (!out)
    throw numcore::ContractError("cannot write loss log " + path.string());
  out << "epoch,iteration,loss\n";
  char buf[64];
  for (const auto& entry : losses) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g",
                  static_cast<long long>(entry.epoch),
                  static_cast<long long>(entry.iteration),
                  static_cast<double>(entry.loss));
    out << buf << "\n";
  }
}

}  // namespace gazecl::pipeline

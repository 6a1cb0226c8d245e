#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gazecl/objective/objective.hpp"
#include "gazecl/pipeline/checkpoint.hpp"
#include "gazecl/pipeline/config.hpp"
#include "gazecl/pipeline/train.hpp"

using namespace gazecl;
using namespace gazecl::pipeline;
using gazecl::ingest::VelocitySignal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gazecl_pipe_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

encoder::EncoderConfig tiny_encoder() {
  encoder::EncoderConfig c;
  c.channel_plan = {4, 4, 4, 4, 4, 8};
  c.dilation_plan = {1, 2, 4, 1, 2, 4};
  c.kernel_size = 3;
  c.stem_kernel = 3;
  c.se_reduction = 2;
  c.d_h = 8;
  c.d_z = 4;
  c.projection_hidden = 8;
  return c;
}

TrainConfig desk_config(i64 corpus_hint = 40) {
  TrainConfig cfg;
  cfg.segment_length = 64;
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.seed = 7;
  cfg.threads = 1;  // strict sequential
  cfg.encoder = tiny_encoder();
  (void)corpus_hint;
  return cfg;
}

std::vector<VelocitySignal> tiny_corpus(i64 count, i64 length,
                                        std::uint64_t seed) {
  ingest::SynthParams sp;
  sp.num_viewers = 4;
  sp.recordings_per_viewer = (count + 3) / 4;
  sp.duration_s = 1.0;
  sp.seed = seed;
  auto recs = ingest::synthesize_corpus(sp);
  recs.resize(count);
  auto signals = ingest::preprocess_all(recs);
  for (auto& sig : signals) {  // trim to the requested length
    std::vector<double> cut(static_cast<std::size_t>(2 * length));
    for (i64 c = 0; c < 2; ++c)
      for (i64 t = 0; t < length; ++t) cut[c * length + t] = sig.at(c, t);
    sig.values = std::move(cut);
    sig.length = length;
  }
  return signals;
}

bool same_logs(const std::vector<LossEntry>& a, const std::vector<LossEntry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].epoch != b[i].epoch || a[i].iteration != b[i].iteration ||
        a[i].loss != b[i].loss)
      return false;
  return true;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults follow the published training protocol") {
  TrainConfig cfg;
  CHECK(cfg.segment_length == 500);
  CHECK(cfg.temperature == 0.3);
  CHECK(cfg.learning_rate == 5e-4);
  CHECK(cfg.batch_size == 1000);
  CHECK(cfg.crops.size() == 3);
  CHECK(cfg.transforms.size() == 9);
  CHECK(cfg.encoder.d_h == 512);
}

TEST_CASE("config text roundtrip is canonical and overrides are reported") {
  TrainConfig cfg = desk_config();
  const std::string text = cfg.to_text();
  auto parsed = TrainConfig::from_text(text);
  CHECK(parsed.to_text() == text);

  std::vector<std::string> overrides;
  auto cfg2 = TrainConfig::from_text(
      "batch_size = 64\ncrops = [\"random\"]\ntemperature = 0.3\n", &overrides);
  CHECK(cfg2.batch_size == 64);
  CHECK(cfg2.crops == std::vector<augment::CropMethod>{augment::CropMethod::Random});
  // temperature matched the default, so only two keys actually changed.
  CHECK(overrides == std::vector<std::string>{"batch_size", "crops"});
}

TEST_CASE("config parser rejects unknown keys and bad values") {
  CHECK_THROWS_AS(TrainConfig::from_text("no_such_key = 5\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("batch_size = banana\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("crops = [\"sideways\"]\n"),
                  numcore::ContractError);
  CHECK_THROWS_AS(TrainConfig::from_text("batch_size\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_text("temperature = -1\n"), ConfigError);
}

TEST_CASE("encoder presets resolve and explicit keys override them") {
  auto cfg = TrainConfig::from_text("encoder = \"desk\"\n");
  CHECK(cfg.encoder.d_h == encoder::EncoderConfig::desk_scale().d_h);
  auto cfg2 = TrainConfig::from_text(
      "encoder = \"desk\"\nencoder_channels = [4, 4, 4, 4, 4, 16]\n"
      "projection_hidden = 8\n");
  CHECK(cfg2.encoder.channel_plan.back() == 16);
  CHECK(cfg2.encoder.d_h == 16);  // follows the plan unless pinned
}

TEST_CASE("five-iteration sequential runs are bit-identical") {
  auto corpus = tiny_corpus(40, 200, 11);
  TrainConfig cfg = desk_config();
  cfg.epochs = 1;  // floor(40/8) = 5 iterations
  auto a = train(cfg, corpus);
  auto b = train(cfg, corpus);
  REQUIRE(a.losses.size() == 5);
  CHECK_FALSE(a.aborted);
  CHECK(same_logs(a.losses, b.losses));
}

TEST_CASE("parallel batch ops reproduce the sequential run exactly") {
  auto corpus = tiny_corpus(24, 200, 13);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;
  cfg.epochs = 1;
  auto seq = train(cfg, corpus);
  cfg.threads = 0;  // all hardware threads
  auto par = train(cfg, corpus);
  numcore::set_num_threads(0);
  CHECK(same_logs(seq.losses, par.losses));
}

TEST_CASE("training loss decreases over epochs on a synthetic corpus") {
  auto corpus = tiny_corpus(40, 300, 17);
  TrainConfig cfg = desk_config();
  cfg.epochs = 20;
  cfg.threads = 0;
  auto result = train(cfg, corpus);
  numcore::set_num_threads(0);
  REQUIRE_FALSE(result.aborted);
  REQUIRE(result.losses.size() == 20u * 5u);
  auto epoch_mean = [&](i64 epoch) {
    double sum = 0;
    i64 n = 0;
    for (const auto& e : result.losses)
      if (e.epoch == epoch) {
        sum += e.loss;
        ++n;
      }
    return sum / n;
  };
  MESSAGE("first epoch mean loss ", epoch_mean(0), ", last ", epoch_mean(19));
  CHECK(epoch_mean(19) < epoch_mean(0));
}

TEST_CASE("epoch accounting drops the partial final batch") {
  auto corpus = tiny_corpus(20, 150, 19);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;  // floor(20/8) = 2 batches per epoch
  cfg.epochs = 3;
  auto result = train(cfg, corpus);
  CHECK(result.losses.size() == 6);
  CHECK(result.checkpoint.iteration == 6);
  CHECK(result.checkpoint.epoch == 3);
  // The documented arithmetic: 2000 signals at N=64 give 31 batches.
  CHECK(2000 / 64 == 31);
}

TEST_CASE("training requires corpus >= batch size and never mutates input") {
  auto corpus = tiny_corpus(6, 150, 23);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;
  CHECK_THROWS_AS(train(cfg, corpus), numcore::ContractError);

  cfg.batch_size = 4;
  cfg.epochs = 1;
  const auto snapshot = corpus;
  (void)train(cfg, corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(corpus[i].values == snapshot[i].values);
}

TEST_CASE("Same+Identity: positive pairs are exactly parallel and the loss "
          "cross-checks against the similarity-matrix route") {
  auto corpus = tiny_corpus(16, 200, 29);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.crops = {augment::CropMethod::Same};
  cfg.transforms = {augment::TransformKind::Identity};
  auto result = train(cfg, corpus);
  REQUIRE_FALSE(result.aborted);

  // Replay the first batch exactly and recompute z through the same params.
  const auto perm = epoch_permutation(cfg.seed, 0, 16);
  std::vector<VelocitySignal> chosen;
  for (i64 j = 0; j < cfg.batch_size; ++j) chosen.push_back(corpus[perm[j]]);
  auto rng = batch_rng(cfg.seed, 0, 0);
  auto batch = augment::make_batch(chosen, cfg.batch_size, cfg.segment_length,
                                   cfg.crops, cfg.transforms, rng);
  auto params = encoder::init_params<float>(cfg.encoder, init_rng(cfg.seed));
  auto x = numcore::Tensor<float>::from({2 * cfg.batch_size, 2, cfg.segment_length},
                                        std::move(batch.segments));
  numcore::NoGradGuard ng;
  auto z = encoder::project(params, encoder::forward_features(
                                        params, x, numcore::NormMode::Train));

  auto sim = objective::cosine_similarity_matrix(z);
  for (i64 i = 0; i < 2 * cfg.batch_size; ++i)
    CHECK(sim.at(i, batch.pair_of[i]) == 1.0f);  // identical segments

  const auto predicted = objective::nt_xent_from_similarity(
      sim, batch.pair_of, static_cast<float>(cfg.temperature));
  CHECK(result.losses[0].loss ==
        doctest::Approx(predicted.total).epsilon(1e-5));
}

TEST_CASE("checkpoint roundtrip restores every array and byte") {
  auto corpus = tiny_corpus(16, 150, 31);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;
  cfg.epochs = 2;
  auto result = train(cfg, corpus);

  TempDir tmp;
  const auto p1 = tmp.path / "a.ckpt";
  const auto p2 = tmp.path / "b.ckpt";
  save_checkpoint(p1, result.checkpoint);
  auto loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  CHECK(file_bytes(p1) == file_bytes(p2));

  CHECK(loaded.epoch == result.checkpoint.epoch);
  CHECK(loaded.iteration == result.checkpoint.iteration);
  CHECK(loaded.adam.step_count == result.checkpoint.adam.step_count);
  CHECK(loaded.config.to_text() == result.checkpoint.config.to_text());

  const auto a = result.checkpoint.params.named_parameters();
  const auto b = loaded.params.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.data() == b[i].second.data());
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(result.checkpoint.adam.first_moment[i] == loaded.adam.first_moment[i]);
    CHECK(result.checkpoint.adam.second_moment[i] == loaded.adam.second_moment[i]);
  }
  auto& pa = result.checkpoint.params;
  auto buf_a = pa.named_buffers();
  auto buf_b = loaded.params.named_buffers();
  for (std::size_t i = 0; i < buf_a.size(); ++i)
    CHECK(*buf_a[i].second == *buf_b[i].second);
}

TEST_CASE("resume reproduces the uninterrupted loss log exactly") {
  auto corpus = tiny_corpus(24, 150, 37);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 8;
  cfg.epochs = 4;
  auto full = train(cfg, corpus);
  REQUIRE_FALSE(full.aborted);

  TrainConfig half = cfg;
  half.epochs = 2;
  auto part1 = train(half, corpus);

  TempDir tmp;
  save_checkpoint(tmp.path / "mid.ckpt", part1.checkpoint);
  auto mid = load_checkpoint(tmp.path / "mid.ckpt");
  mid.config.epochs = 4;
  auto part2 = resume(std::move(mid), corpus);

  std::vector<LossEntry> stitched = part1.losses;
  stitched.insert(stitched.end(), part2.losses.begin(), part2.losses.end());
  CHECK(same_logs(stitched, full.losses));
}

TEST_CASE("corrupted or truncated checkpoints are rejected") {
  auto corpus = tiny_corpus(8, 150, 41);
  TrainConfig cfg = desk_config();
  cfg.batch_size = 4;
  cfg.epochs = 1;
  auto result = train(cfg, corpus);

  TempDir tmp;
  const auto path = tmp.path / "c.ckpt";
  save_checkpoint(path, result.checkpoint);
  const std::string good = file_bytes(path);

  {  // flip one header byte
    std::string bad = good;
    bad[5] = 'X';
    std::ofstream out(tmp.path / "bad1.ckpt", std::ios::binary);
    out << bad;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "bad1.ckpt"), CheckpointError);
  }
  {  // truncate the data section
    std::ofstream out(tmp.path / "bad2.ckpt", std::ios::binary);
    out << good.substr(0, good.size() - 12);
    out.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "bad2.ckpt"), CheckpointError);
  }
  {  // corrupt one data byte: hash must catch it
    std::string bad = good;
    bad[bad.size() - 3] = static_cast<char>(bad[bad.size() - 3] ^ 0x40);
    std::ofstream out(tmp.path / "bad3.ckpt", std::ios::binary);
    out << bad;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "bad3.ckpt"), CheckpointError);
  }
}

TEST_CASE("loss log file is written with stable formatting") {
  TempDir tmp;
  write_loss_log(tmp.path / "losses.csv",
                 {{0, 0, 1.25f}, {0, 1, 0.5f}, {1, 2, 0.125f}});
  CHECK(file_bytes(tmp.path / "losses.csv") ==
        "epoch,iteration,loss\n0,0,1.25\n0,1,0.5\n1,2,0.125\n");
}

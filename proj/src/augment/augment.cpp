#include <algorithm>
#include <cmath>
#include <numeric>

#include "gazecl/augment/augment.hpp"

namespace gazecl::augment {

namespace {

constexpr double kNoiseStd = 0.5;  // additive noise is N(0, std 0.5)
constexpr double kChunkFraction = 0.2;

i64 chunk_len(i64 t_prime) {
  return static_cast<i64>(std::llround(kChunkFraction * t_prime));
}

// Distinct uniformly chosen time indices via partial Fisher-Yates.
std::vector<i64> sample_indices(i64 population, i64 count, Rng& rng) {
  std::vector<i64> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (i64 i = 0; i < count; ++i)
    std::swap(idx[i], idx[rng.uniform_int(i, population - 1)]);
  idx.resize(count);
  return idx;
}

void zero_time_index(Segment& seg, i64 t) {
  seg.at(0, t) = 0.0;
  seg.at(1, t) = 0.0;
}

// Two disjoint chunk starts, uniform among disjoint placements.
std::pair<i64, i64> disjoint_chunks(i64 t_prime, i64 len, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const i64 s1 = rng.uniform_int(0, t_prime - len);
    const i64 s2 = rng.uniform_int(0, t_prime - len);
    if (std::abs(s1 - s2) >= len) return {s1, s2};
  }
  throw ContractError("apply_transform: no disjoint chunk placement found");
}

Segment window(const std::vector<double>& padded, i64 padded_len, i64 t_prime,
               i64 offset) {
  Segment seg;
  seg.length = t_prime;
  seg.values.resize(static_cast<std::size_t>(2 * t_prime));
  for (i64 c = 0; c < 2; ++c)
    for (i64 t = 0; t < t_prime; ++t)
      seg.values[c * t_prime + t] = padded[c * padded_len + offset + t];
  return seg;
}

}  // namespace

const std::vector<CropMethod>& all_crop_methods() {
  static const std::vector<CropMethod> kAll = {
      CropMethod::Same, CropMethod::Consecutive, CropMethod::Random};
  return kAll;
}

const std::vector<TransformKind>& all_transform_kinds() {
  static const std::vector<TransformKind> kAll = {
      TransformKind::Identity,        TransformKind::Dropout,
      TransformKind::ChunkDropout,    TransformKind::AlternateDropout,
      TransformKind::ChannelDropout,  TransformKind::GaussianNoise,
      TransformKind::DropoutAndNoise, TransformKind::ChunkCopy,
      TransformKind::ChunkSwap};
  return kAll;
}

std::string to_string(CropMethod m) {
  switch (m) {
    case CropMethod::Same: return "same";
    case CropMethod::Consecutive: return "consecutive";
    case CropMethod::Random: return "random";
  }
  return "?";
}

std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Identity: return "identity";
    case TransformKind::Dropout: return "dropout";
    case TransformKind::ChunkDropout: return "chunk_dropout";
    case TransformKind::AlternateDropout: return "alternate_dropout";
    case TransformKind::ChannelDropout: return "channel_dropout";
    case TransformKind::GaussianNoise: return "gaussian_noise";
    case TransformKind::DropoutAndNoise: return "dropout_and_noise";
    case TransformKind::ChunkCopy: return "chunk_copy";
    case TransformKind::ChunkSwap: return "chunk_swap";
  }
  return "?";
}

CropMethod crop_from_string(const std::string& name) {
  for (CropMethod m : all_crop_methods())
    if (to_string(m) == name) return m;
  throw ContractError("unknown cropping method \"" + name + "\"");
}

TransformKind transform_from_string(const std::string& name) {
  for (TransformKind k : all_transform_kinds())
    if (to_string(k) == name) return k;
  throw ContractError("unknown transformation \"" + name + "\"");
}

std::pair<Segment, Segment> crop_pair(const ingest::VelocitySignal& signal,
                                      CropMethod method, i64 t_prime,
                                      Rng& rng) {
  if (t_prime <= 0) throw ContractError("crop_pair: T' must be positive");
  if (signal.length < 1) throw ContractError("crop_pair: empty signal");

  // Right-zero-pad short signals so every segment has length T'.
  const i64 padded_len = std::max(signal.length, t_prime);
  std::vector<double> padded(static_cast<std::size_t>(2 * padded_len), 0.0);
  for (i64 c = 0; c < 2; ++c)
    for (i64 t = 0; t < signal.length; ++t)
      padded[c * padded_len + t] = signal.values[c * signal.length + t];

  if (method == CropMethod::Consecutive && padded_len < 2 * t_prime)
    method = CropMethod::Random;

  switch (method) {
    case CropMethod::Same: {
      const i64 off = rng.uniform_int(0, padded_len - t_prime);
      auto seg = window(padded, padded_len, t_prime, off);
      return {seg, seg};
    }
    case CropMethod::Consecutive: {
      const i64 start = rng.uniform_int(0, padded_len - 2 * t_prime);
      const bool a_first = rng.uniform_int(0, 1) == 0;
      auto first = window(padded, padded_len, t_prime, start);
      auto second = window(padded, padded_len, t_prime, start + t_prime);
      if (a_first) return {std::move(first), std::move(second)};
      return {std::move(second), std::move(first)};
    }
    case CropMethod::Random: {
      const i64 off_a = rng.uniform_int(0, padded_len - t_prime);
      const i64 off_b = rng.uniform_int(0, padded_len - t_prime);
      return {window(padded, padded_len, t_prime, off_a),
              window(padded, padded_len, t_prime, off_b)};
    }
  }
  throw ContractError("crop_pair: unreachable");
}

Segment apply_transform(Segment seg, TransformKind kind, Rng& rng) {
  const i64 tp = seg.length;
  if (tp < 10)
    throw ContractError("apply_transform: segment length must be >= 10");
  const i64 len = chunk_len(tp);

  switch (kind) {
    case TransformKind::Identity:
      break;

    case TransformKind::Dropout:
      for (i64 t : sample_indices(tp, len, rng)) zero_time_index(seg, t);
      break;

    case TransformKind::ChunkDropout: {
      const i64 start = rng.uniform_int(0, tp - len);
      for (i64 t = start; t < start + len; ++t) zero_time_index(seg, t);
      break;
    }

    case TransformKind::AlternateDropout:
      for (i64 t = 0; t < tp; t += 2) zero_time_index(seg, t);
      break;

    case TransformKind::ChannelDropout: {
      const i64 channel = rng.uniform_int(0, 1);
      for (i64 t = 0; t < tp; ++t) seg.at(channel, t) = 0.0;
      break;
    }

    case TransformKind::GaussianNoise:
      for (auto& v : seg.values) v += rng.normal(0.0, kNoiseStd);
      break;

    case TransformKind::DropoutAndNoise:
      for (i64 t : sample_indices(tp, len, rng)) zero_time_index(seg, t);
      for (auto& v : seg.values) v += rng.normal(0.0, kNoiseStd);
      break;

    case TransformKind::ChunkCopy: {
      const auto [src, dst] = disjoint_chunks(tp, len, rng);
      for (i64 c = 0; c < 2; ++c)
        for (i64 t = 0; t < len; ++t) seg.at(c, dst + t) = seg.at(c, src + t);
      break;
    }

    case TransformKind::ChunkSwap: {
      const auto [s1, s2] = disjoint_chunks(tp, len, rng);
      for (i64 c = 0; c < 2; ++c)
        for (i64 t = 0; t < len; ++t)
          std::swap(seg.at(c, s1 + t), seg.at(c, s2 + t));
      break;
    }
  }
  return seg;
}

CropMethod choose_crop(const std::vector<CropMethod>& menu, Rng& rng) {
  if (menu.empty()) throw ContractError("choose_crop: empty menu");
  return menu[rng.uniform_int(0, static_cast<i64>(menu.size()) - 1)];
}

TransformKind choose_transform(const std::vector<TransformKind>& menu,
                               Rng& rng) {
  if (menu.empty()) throw ContractError("choose_transform: empty menu");
  return menu[rng.uniform_int(0, static_cast<i64>(menu.size()) - 1)];
}

PairBatch make_batch(const std::vector<ingest::VelocitySignal>& signals,
                     i64 n_pairs, i64 t_prime,
                     const std::vector<CropMethod>& crop_menu,
                     const std::vector<TransformKind>& transform_menu,
                     Rng& rng) {
  if (n_pairs < 1) throw ContractError("make_batch: N must be positive");
  if (static_cast<i64>(signals.size()) < n_pairs)
    throw ContractError("make_batch: need at least " + std::to_string(n_pairs) +
                        " signals, got " + std::to_string(signals.size()));
  if (crop_menu.empty() || transform_menu.empty())
    throw ContractError("make_batch: menus must be non-empty");

  // Sources without replacement.
  const auto sources =
      sample_indices(static_cast<i64>(signals.size()), n_pairs, rng);

  PairBatch batch;
  batch.n_pairs = n_pairs;
  batch.segment_length = t_prime;
  batch.segments.assign(static_cast<std::size_t>(2 * n_pairs * 2 * t_prime),
                        0.0f);
  batch.pair_of.resize(static_cast<std::size_t>(2 * n_pairs));
  batch.source_ids.resize(static_cast<std::size_t>(2 * n_pairs));
  for (i64 i = 0; i < n_pairs; ++i) {
    batch.pair_of[i] = i + n_pairs;
    batch.pair_of[i + n_pairs] = i;
  }

  // One independent substream per slot, derived before any slot work so
  // assembly could run in parallel without changing the result.
  const std::uint64_t batch_key = rng.next_u64();

  for (i64 i = 0; i < n_pairs; ++i) {
    Rng slot_rng(Rng::mix(batch_key, static_cast<std::uint64_t>(i)));
    const auto& signal = signals[sources[i]];
    const CropMethod method = choose_crop(crop_menu, slot_rng);
    auto [seg_a, seg_b] = crop_pair(signal, method, t_prime, slot_rng);
    seg_a = apply_transform(std::move(seg_a),
                            choose_transform(transform_menu, slot_rng), slot_rng);
    seg_b = apply_transform(std::move(seg_b),
                            choose_transform(transform_menu, slot_rng), slot_rng);

    float* a_out = batch.segments.data() + i * 2 * t_prime;
    float* b_out = batch.segments.data() + (i + n_pairs) * 2 * t_prime;
    for (i64 j = 0; j < 2 * t_prime; ++j) {
      a_out[j] = static_cast<float>(seg_a.values[j]);
      b_out[j] = static_cast<float>(seg_b.values[j]);
    }
    batch.source_ids[i] = signal.recording_id;
    batch.source_ids[i + n_pairs] = signal.recording_id;
  }
  return batch;
}

}  // namespace gazecl::augment

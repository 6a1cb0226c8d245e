#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/numcore/rng.hpp"
#include "gazecl/numcore/tensor.hpp"

namespace gazecl::augment {

using i64 = std::int64_t;
using numcore::ContractError;
using numcore::Rng;

enum class CropMethod { Same, Consecutive, Random };

enum class TransformKind {
  Identity,
  Dropout,
  ChunkDropout,
  AlternateDropout,
  ChannelDropout,
  GaussianNoise,
  DropoutAndNoise,
  ChunkCopy,
  ChunkSwap,
};

const std::vector<CropMethod>& all_crop_methods();
const std::vector<TransformKind>& all_transform_kinds();

std::string to_string(CropMethod m);
std::string to_string(TransformKind k);
CropMethod crop_from_string(const std::string& name);
TransformKind transform_from_string(const std::string& name);

// One cropped two-channel window, row-major [2][T'].
struct Segment {
  i64 length = 0;
  std::vector<double> values;

  double& at(i64 channel, i64 t) { return values[channel * length + t]; }
  double at(i64 channel, i64 t) const { return values[channel * length + t]; }
};

// Contrastive mini-batch: slots [0,N) hold a-segments, [N,2N) b-segments,
// slot i pairs with slot i+N and both come from the same source signal.
struct PairBatch {
  i64 n_pairs = 0;
  i64 segment_length = 0;
  std::vector<float> segments;  // [2N][2][T']
  std::vector<i64> pair_of;
  std::vector<std::string> source_ids;

  const float* slot(i64 s) const {
    return segments.data() + s * 2 * segment_length;
  }
};

// Two windows of length t_prime from one signal. Signals shorter than
// t_prime are right-zero-padded first; Consecutive falls back to Random when
// the signal cannot hold two disjoint windows.
std::pair<Segment, Segment> crop_pair(const ingest::VelocitySignal& signal,
                                      CropMethod method, i64 t_prime,
                                      Rng& rng);

// Applies one stochastic transformation. All "20%" counts are
// round(0.2 * T'); the dropout family zeroes the same time indices in both
// channels. Requires T' >= 10 so chunks are non-empty.
Segment apply_transform(Segment segment, TransformKind kind, Rng& rng);

CropMethod choose_crop(const std::vector<CropMethod>& menu, Rng& rng);
TransformKind choose_transform(const std::vector<TransformKind>& menu,
                               Rng& rng);

PairBatch make_batch(const std::vector<ingest::VelocitySignal>& signals,
                     i64 n_pairs, i64 t_prime,
                     const std::vector<CropMethod>& crop_menu,
                     const std::vector<TransformKind>& transform_menu,
                     Rng& rng);

}  // namespace gazecl::augment

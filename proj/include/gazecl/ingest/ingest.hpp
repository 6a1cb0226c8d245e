#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazecl::ingest {

using i64 = std::int64_t;

// Input files that fail to parse or validate raise this with file/row context.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GazeRecording {
  std::string recording_id;
  std::string viewer_id;
  std::string dataset_id;
  double sampling_hz = 500.0;
  double px_per_dva = 35.0;
  std::vector<std::array<double, 2>> positions;  // (x_px, y_px)
};

// Per-sample gaze velocity in dva at 500 Hz, two channels (x then y),
// row-major [2][T].
struct VelocitySignal {
  std::string recording_id;
  std::string viewer_id;
  std::string dataset_id;
  i64 length = 0;
  std::vector<double> values;

  double at(i64 channel, i64 t) const { return values[channel * length + t]; }
};

// Manifest: CSV with header
//   recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path
// where path points at a UTF-8 file with one "x<TAB>y" pair per line,
// resolved relative to the manifest's directory.
std::vector<GazeRecording> load_manifest(const std::filesystem::path& path);

// Writes manifest.csv plus one recordings/<recording_id>.tsv per recording.
void write_corpus(const std::filesystem::path& dir,
                  const std::vector<GazeRecording>& recordings);

// Rate normalization to the working 500 Hz grid: integer multiples of 500 Hz
// are decimated (1000 Hz keeps every other sample); anything else is
// resampled by not-a-knot cubic interpolation against timestamps onto a
// uniform 2 ms grid.
std::vector<std::array<double, 2>> resample_to_500hz(
    const std::vector<std::array<double, 2>>& positions, double sampling_hz);

// First differences scaled to dva per sample; element 0 is zero, length is
// preserved. Input must already be at 500 Hz.
std::vector<double> to_velocity(
    const std::vector<std::array<double, 2>>& positions_500hz,
    double px_per_dva);

// Full path from raw recording to model input.
VelocitySignal preprocess(const GazeRecording& rec);
std::vector<VelocitySignal> preprocess_all(
    const std::vector<GazeRecording>& recordings);

// Not-a-knot cubic spline through (xs, ys), evaluated at ascending queries.
// Reproduces polynomials up to degree 3 exactly; needs at least 4 knots.
std::vector<double> cubic_interpolate(const std::vector<double>& xs,
                                      const std::vector<double>& ys,
                                      const std::vector<double>& queries);

struct SynthParams {
  i64 num_viewers = 10;
  i64 recordings_per_viewer = 200;
  double duration_s = 3.0;
  std::uint64_t seed = 1;
  double px_per_dva = 35.0;
  double velocity_cap_dva = 2.0;  // per sample at 500 Hz
  double screen_w_px = 1680.0;
  double screen_h_px = 1050.0;
  std::string dataset_id = "synth";
};

// Labeled gaze corpus with persistent per-viewer idiosyncrasies: each viewer
// draws fixation-duration, saccade-amplitude/velocity, and drift-noise
// parameters once, then every recording alternates fixations and smooth
// saccades at 500 Hz. Deterministic per (seed, viewer, recording).
std::vector<GazeRecording> synthesize_corpus(const SynthParams& params);

}  // namespace gazecl::ingest

#include <algorithm>
#include <cmath>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/numcore/rng.hpp"

namespace gazecl::ingest {

namespace {

using numcore::Rng;

constexpr double kPi = 3.14159265358979323846;

// Persistent idiosyncrasies of one synthetic viewer.
struct ViewerProfile {
  double fix_ms_mean;     // mean fixation duration
  double fix_ms_cv;       // spread of fixation durations
  double sacc_amp_dva;    // mean saccade amplitude
  double vel_scale;       // peak-velocity multiplier (shortens saccades)
  double drift_sigma_dva; // fixation jitter per sample
  double drift_bias_dx;   // slow drift direction, dva per sample
  double drift_bias_dy;
  double dur_base_ms;     // saccade duration intercept
  double dur_slope_ms;    // saccade duration per dva
};

ViewerProfile draw_profile(Rng rng) {
  ViewerProfile p;
  p.fix_ms_mean = rng.uniform(150.0, 450.0);
  p.fix_ms_cv = rng.uniform(0.2, 0.5);
  p.sacc_amp_dva = rng.uniform(2.0, 9.0);
  p.vel_scale = rng.uniform(0.75, 1.3);
  p.drift_sigma_dva = rng.uniform(0.004, 0.04);
  const double bias_mag = rng.uniform(0.0, 0.008);
  const double bias_dir = rng.uniform(0.0, 2.0 * kPi);
  p.drift_bias_dx = bias_mag * std::cos(bias_dir);
  p.drift_bias_dy = bias_mag * std::sin(bias_dir);
  p.dur_base_ms = rng.uniform(18.0, 26.0);
  p.dur_slope_ms = rng.uniform(1.8, 2.8);
  return p;
}

// Minimum-jerk displacement profile on [0,1].
double min_jerk(double tau) {
  const double t3 = tau * tau * tau;
  return 10.0 * t3 - 15.0 * t3 * tau + 6.0 * t3 * tau * tau;
}

std::vector<std::array<double, 2>> trace_recording(const ViewerProfile& vp,
                                                   const SynthParams& sp,
                                                   Rng& rng) {
  const i64 total = static_cast<i64>(std::llround(sp.duration_s * 500.0));
  const double cap_px = sp.velocity_cap_dva * sp.px_per_dva;

  std::vector<std::array<double, 2>> pos;
  pos.reserve(static_cast<std::size_t>(total));

  auto clamp_screen = [&](std::array<double, 2> p) {
    p[0] = std::clamp(p[0], 0.0, sp.screen_w_px);
    p[1] = std::clamp(p[1], 0.0, sp.screen_h_px);
    return p;
  };
  auto push = [&](std::array<double, 2> p) {
    p = clamp_screen(p);
    if (!pos.empty()) {
      // Physical cap on per-sample displacement.
      const double dx = p[0] - pos.back()[0], dy = p[1] - pos.back()[1];
      const double d = std::hypot(dx, dy);
      if (d > cap_px) {
        p[0] = pos.back()[0] + dx * cap_px / d;
        p[1] = pos.back()[1] + dy * cap_px / d;
      }
    }
    pos.push_back(p);
  };

  std::array<double, 2> cur = {
      rng.uniform(0.2 * sp.screen_w_px, 0.8 * sp.screen_w_px),
      rng.uniform(0.2 * sp.screen_h_px, 0.8 * sp.screen_h_px)};
  push(cur);

  while (static_cast<i64>(pos.size()) < total) {
    // Fixation: jitter plus slow drift around the current point.
    const double fix_ms =
        std::max(40.0, rng.normal(vp.fix_ms_mean, vp.fix_ms_mean * vp.fix_ms_cv));
    const i64 fix_samples = std::max<i64>(20, std::llround(fix_ms / 2.0));
    for (i64 i = 0; i < fix_samples && static_cast<i64>(pos.size()) < total; ++i) {
      cur[0] += (vp.drift_bias_dx + rng.normal(0.0, vp.drift_sigma_dva)) *
                sp.px_per_dva;
      cur[1] += (vp.drift_bias_dy + rng.normal(0.0, vp.drift_sigma_dva)) *
                sp.px_per_dva;
      cur = clamp_screen(cur);
      push(cur);
    }
    if (static_cast<i64>(pos.size()) >= total) break;

    // Saccade to a new target, smooth minimum-jerk trajectory.
    const double amp_dva =
        std::max(0.5, rng.normal(vp.sacc_amp_dva, vp.sacc_amp_dva * 0.35));
    std::array<double, 2> target = cur;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double angle = rng.uniform(0.0, 2.0 * kPi);
      target = {cur[0] + amp_dva * sp.px_per_dva * std::cos(angle),
                cur[1] + amp_dva * sp.px_per_dva * std::sin(angle)};
      if (target[0] >= 0 && target[0] <= sp.screen_w_px && target[1] >= 0 &&
          target[1] <= sp.screen_h_px)
        break;
      target = {0.5 * (cur[0] + 0.5 * sp.screen_w_px),
                0.5 * (cur[1] + 0.5 * sp.screen_h_px)};
    }

    const double dur_ms =
        (vp.dur_base_ms + vp.dur_slope_ms * amp_dva) / vp.vel_scale;
    // Keep the minimum-jerk peak velocity (1.875 A / dur) under the cap.
    const i64 min_dur =
        static_cast<i64>(std::ceil(1.875 * amp_dva / sp.velocity_cap_dva));
    const i64 dur_samples = std::max<i64>({6, min_dur, std::llround(dur_ms / 2.0)});
    const std::array<double, 2> from = cur;
    for (i64 i = 1; i <= dur_samples && static_cast<i64>(pos.size()) < total;
         ++i) {
      const double s = min_jerk(static_cast<double>(i) /
                                static_cast<double>(dur_samples));
      cur = {from[0] + (target[0] - from[0]) * s,
             from[1] + (target[1] - from[1]) * s};
      push(cur);
    }
    cur = pos.back();
  }
  return pos;
}

}  // namespace

std::vector<GazeRecording> synthesize_corpus(const SynthParams& sp) {
  if (sp.num_viewers < 2)
    throw ParseError("synthesize_corpus: need at least 2 viewers");
  if (!(sp.duration_s >= 1.0))
    throw ParseError("synthesize_corpus: duration must be at least 1 s");
  if (sp.recordings_per_viewer < 1)
    throw ParseError("synthesize_corpus: need at least 1 recording per viewer");

  Rng corpus_rng(sp.seed);
  std::vector<GazeRecording> out;
  out.reserve(static_cast<std::size_t>(sp.num_viewers * sp.recordings_per_viewer));
  for (i64 v = 0; v < sp.num_viewers; ++v) {
    const Rng viewer_rng = corpus_rng.fork(static_cast<std::uint64_t>(v));
    const ViewerProfile profile = draw_profile(viewer_rng);
    for (i64 r = 0; r < sp.recordings_per_viewer; ++r) {
      Rng rec_rng = viewer_rng.fork(static_cast<std::uint64_t>(r) + 1);
      GazeRecording rec;
      rec.recording_id = "v" + std::to_string(v) + "_r" + std::to_string(r);
      rec.viewer_id = "viewer" + std::to_string(v);
      rec.dataset_id = sp.dataset_id;
      rec.sampling_hz = 500.0;
      rec.px_per_dva = sp.px_per_dva;
      rec.positions = trace_recording(profile, sp, rec_rng);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace gazecl::ingest

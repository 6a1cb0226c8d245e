#include <algorithm>
#include <cmath>

#include "gazecl/ingest/ingest.hpp"

namespace gazecl::ingest {

std::vector<double> cubic_interpolate(const std::vector<double>& xs,
                                      const std::vector<double>& ys,
                                      const std::vector<double>& queries) {
  const i64 n = static_cast<i64>(xs.size());
  if (n < 4)
    throw ParseError("cubic interpolation needs at least 4 samples, got " +
                     std::to_string(n));
  if (ys.size() != xs.size())
    throw ParseError("cubic interpolation: xs/ys length mismatch");

  std::vector<double> h(n - 1);
  for (i64 i = 0; i + 1 < n; ++i) {
    h[i] = xs[i + 1] - xs[i];
    if (!(h[i] > 0)) throw ParseError("cubic interpolation: knots must ascend");
  }

  // Second derivatives M_i of the not-a-knot spline. The two end conditions
  // (third derivative continuous across the first and last interior knots)
  // are eliminated into the first and last interior rows, leaving a
  // tridiagonal system in M_1..M_{n-2}.
  const i64 m = n - 2;
  std::vector<double> lower(m, 0), diag(m, 0), upper(m, 0), rhs(m, 0);
  for (i64 i = 1; i <= n - 2; ++i)
    rhs[i - 1] = (ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1];
  for (i64 i = 2; i <= n - 3; ++i) {
    lower[i - 1] = h[i - 1] / 6.0;
    diag[i - 1] = (h[i - 1] + h[i]) / 3.0;
    upper[i - 1] = h[i] / 6.0;
  }
  // Row for M_1 after substituting M_0 = ((h0+h1) M_1 - h0 M_2) / h1.
  diag[0] = h[0] * (h[0] + h[1]) / (6.0 * h[1]) + (h[0] + h[1]) / 3.0;
  upper[0] = h[1] / 6.0 - h[0] * h[0] / (6.0 * h[1]);
  // Row for M_{n-2} after substituting the mirrored end condition.
  const double ha = h[n - 3], hb = h[n - 2];
  lower[m - 1] = ha / 6.0 - hb * hb / (6.0 * ha);
  diag[m - 1] = (ha + hb) / 3.0 + hb * (ha + hb) / (6.0 * ha);

  // Thomas sweep.
  std::vector<double> mm(n, 0);
  for (i64 i = 1; i < m; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  mm[n - 2] = rhs[m - 1] / diag[m - 1];
  for (i64 i = m - 2; i >= 0; --i)
    mm[i + 1] = (rhs[i] - upper[i] * mm[i + 2]) / diag[i];
  mm[0] = ((h[0] + h[1]) * mm[1] - h[0] * mm[2]) / h[1];
  mm[n - 1] = ((ha + hb) * mm[n - 2] - hb * mm[n - 3]) / ha;

  std::vector<double> out;
  out.reserve(queries.size());
  i64 seg = 0;
  for (double q : queries) {
    // Queries slightly past the last knot continue the final segment's cubic.
    const double t = std::max(q, xs.front());
    while (seg + 2 < n && xs[seg + 1] < t) ++seg;
    const double hi = h[seg];
    const double a = xs[seg + 1] - t, b = t - xs[seg];
    out.push_back(mm[seg] * a * a * a / (6.0 * hi) +
                  mm[seg + 1] * b * b * b / (6.0 * hi) +
                  (ys[seg] / hi - mm[seg] * hi / 6.0) * a +
                  (ys[seg + 1] / hi - mm[seg + 1] * hi / 6.0) * b);
  }
  return out;
}

std::vector<std::array<double, 2>> resample_to_500hz(
    const std::vector<std::array<double, 2>>& positions, double sampling_hz) {
  if (!(sampling_hz > 0))
    throw ParseError("resample: sampling_hz must be > 0");
  if (positions.size() < 2)
    throw ParseError("resample: need at least 2 samples");

  if (sampling_hz == 500.0) return positions;

  // Integer multiples of 500 Hz drop samples; 1000 Hz keeps every other one.
  const double factor = sampling_hz / 500.0;
  if (factor > 1 && factor == std::floor(factor)) {
    const i64 step = static_cast<i64>(factor);
    std::vector<std::array<double, 2>> out;
    out.reserve(positions.size() / step + 1);
    for (std::size_t i = 0; i < positions.size(); i += step)
      out.push_back(positions[i]);
    return out;
  }

  const i64 n = static_cast<i64>(positions.size());
  if (n < 4)
    throw ParseError("resample: cubic interpolation from " +
                     std::to_string(sampling_hz) +
                     " Hz needs at least 4 samples, got " + std::to_string(n));

  std::vector<double> ts(n), xvals(n), yvals(n);
  for (i64 i = 0; i < n; ++i) {
    ts[i] = static_cast<double>(i) / sampling_hz;
    xvals[i] = positions[i][0];
    yvals[i] = positions[i][1];
  }
  // Each input sample covers a 1/r interval, so a length-L recording spans
  // L/r seconds and maps to floor(L * 500 / r) output samples on the 2 ms
  // grid; the last few queries extend the final spline segment.
  const i64 out_len = static_cast<i64>(
      std::floor(static_cast<double>(n) * 500.0 / sampling_hz));
  std::vector<double> grid(out_len);
  for (i64 j = 0; j < out_len; ++j) grid[j] = static_cast<double>(j) / 500.0;

  const auto xi = cubic_interpolate(ts, xvals, grid);
  const auto yi = cubic_interpolate(ts, yvals, grid);
  std::vector<std::array<double, 2>> out(out_len);
  for (i64 j = 0; j < out_len; ++j) out[j] = {xi[j], yi[j]};
  return out;
}

std::vector<double> to_velocity(
    const std::vector<std::array<double, 2>>& positions_500hz,
    double px_per_dva) {
  if (!(px_per_dva > 0)) throw ParseError("to_velocity: px_per_dva must be > 0");
  const i64 n = static_cast<i64>(positions_500hz.size());
  if (n < 2) throw ParseError("to_velocity: need at least 2 samples");
  std::vector<double> v(static_cast<std::size_t>(2 * n), 0.0);
  for (i64 t = 1; t < n; ++t) {
    v[t] = (positions_500hz[t][0] - positions_500hz[t - 1][0]) / px_per_dva;
    v[n + t] = (positions_500hz[t][1] - positions_500hz[t - 1][1]) / px_per_dva;
  }
  return v;
}

VelocitySignal preprocess(const GazeRecording& rec) {
  VelocitySignal sig;
  sig.recording_id = rec.recording_id;
  sig.viewer_id = rec.viewer_id;
  sig.dataset_id = rec.dataset_id;
  const auto resampled = resample_to_500hz(rec.positions, rec.sampling_hz);
  sig.values = to_velocity(resampled, rec.px_per_dva);
  sig.length = static_cast<i64>(resampled.size());
  return sig;
}

std::vector<VelocitySignal> preprocess_all(
    const std::vector<GazeRecording>& recordings) {
  std::vector<VelocitySignal> out;
  out.reserve(recordings.size());
  for (const auto& rec : recordings) out.push_back(preprocess(rec));
  return out;
}

}  // namespace gazecl::ingest

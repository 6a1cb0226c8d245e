#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gazecl/ingest/ingest.hpp"
#include "gazecl/numcore/rng.hpp"

using namespace gazecl::ingest;
using gazecl::numcore::Rng;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gazecl_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("load_manifest: minimal one-row manifest") {
  TempDir tmp;
  write_file(tmp.path / "rec.tsv", "10\t20\n11\t21\n12\t22\n");
  write_file(tmp.path / "manifest.csv",
             "recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path\n"
             "r1,v1,d1,500,35,rec.tsv\n");
  auto recs = load_manifest(tmp.path / "manifest.csv");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].recording_id == "r1");
  CHECK(recs[0].positions.size() == 3);
  CHECK(recs[0].positions[2][1] == 22.0);
}

TEST_CASE("load_manifest: missing column is named in the error") {
  TempDir tmp;
  write_file(tmp.path / "manifest.csv",
             "recording_id,viewer_id,dataset_id,sampling_hz,path\n");
  CHECK_THROWS_WITH_AS(load_manifest(tmp.path / "manifest.csv"),
                       doctest::Contains("px_per_dva"), ParseError);
}

TEST_CASE("load_manifest: duplicated recording_id is listed") {
  TempDir tmp;
  write_file(tmp.path / "rec.tsv", "1\t1\n2\t2\n");
  write_file(tmp.path / "manifest.csv",
             "recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path\n"
             "dup,v1,d1,500,35,rec.tsv\n"
             "dup,v2,d1,500,35,rec.tsv\n");
  CHECK_THROWS_WITH_AS(load_manifest(tmp.path / "manifest.csv"),
                       doctest::Contains("dup"), ParseError);
}

TEST_CASE("load_manifest: non-numeric coordinate reports the row") {
  TempDir tmp;
  write_file(tmp.path / "rec.tsv", "1\t1\n2\tbogus\n");
  write_file(tmp.path / "manifest.csv",
             "recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path\n"
             "r1,v1,d1,500,35,rec.tsv\n");
  CHECK_THROWS_WITH_AS(load_manifest(tmp.path / "manifest.csv"),
                       doctest::Contains("row 2"), ParseError);
}

TEST_CASE("load_manifest: empty files are rejected") {
  TempDir tmp;
  write_file(tmp.path / "manifest.csv", "");
  CHECK_THROWS_AS(load_manifest(tmp.path / "manifest.csv"), ParseError);

  write_file(tmp.path / "rec.tsv", "");
  write_file(tmp.path / "manifest.csv",
             "recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path\n"
             "r1,v1,d1,500,35,rec.tsv\n");
  CHECK_THROWS_AS(load_manifest(tmp.path / "manifest.csv"), ParseError);
}

TEST_CASE("resample: 1000 Hz drops every other time point") {
  std::vector<std::array<double, 2>> pos = {{0, 0}, {1, 10}, {2, 20}, {3, 30}};
  auto out = resample_to_500hz(pos, 1000.0);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == pos[0]);
  CHECK(out[1] == pos[2]);
}

TEST_CASE("resample: 500 Hz input is returned unchanged") {
  std::vector<std::array<double, 2>> pos = {{5, 6}, {7, 8}, {9, 10}};
  CHECK(resample_to_500hz(pos, 500.0) == pos);
}

TEST_CASE("resample: cubic upsampling reproduces cubic polynomials to 1e-9") {
  // 250 Hz -> 500 Hz and the non-integer 240 Hz -> 500 Hz path.
  for (double hz : {250.0, 240.0}) {
    const int n = 32;
    std::vector<std::array<double, 2>> pos(n);
    auto poly = [](double t) { return ((2.0 * t - 3.0) * t + 0.5) * t + 7.0; };
    auto ramp = [](double t) { return 4.0 * t + 1.0; };
    for (int i = 0; i < n; ++i) {
      const double t = i / hz;
      pos[i] = {ramp(t), poly(t)};
    }
    auto out = resample_to_500hz(pos, hz);
    const std::size_t expect_len =
        static_cast<std::size_t>(std::floor(n * 500.0 / hz));
    REQUIRE(out.size() == expect_len);
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double t = j / 500.0;
      CHECK(std::abs(out[j][0] - ramp(t)) < 1e-9);
      CHECK(std::abs(out[j][1] - poly(t)) < 1e-9);
    }
  }
}

TEST_CASE("resample: output length is floor(L*500/r) +- 1") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const double hz = rng.uniform(60.0, 499.0);
    const i64 L = rng.uniform_int(4, 300);
    std::vector<std::array<double, 2>> pos(L);
    for (i64 i = 0; i < L; ++i)
      pos[i] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const auto out = resample_to_500hz(pos, hz);
    const double ideal = static_cast<double>(L) * 500.0 / hz;
    CHECK(std::abs(static_cast<double>(out.size()) - std::floor(ideal)) <= 1.0);
  }
}

TEST_CASE("resample: too-short input for interpolation is rejected") {
  std::vector<std::array<double, 2>> pos = {{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(resample_to_500hz(pos, 250.0), ParseError);
}

TEST_CASE("to_velocity: stationary gaze and constant ramp") {
  std::vector<std::array<double, 2>> still(5, {100.0, 200.0});
  auto v = to_velocity(still, 35.0);
  for (double x : v) CHECK(x == 0.0);

  std::vector<std::array<double, 2>> ramp(6);
  for (int i = 0; i < 6; ++i) ramp[i] = {35.0 * i, 0.0};
  auto vr = to_velocity(ramp, 35.0);
  CHECK(vr[0] == 0.0);
  for (int t = 1; t < 6; ++t) CHECK(vr[t] == doctest::Approx(1.0));
  for (int t = 0; t < 6; ++t) CHECK(vr[6 + t] == 0.0);
}

TEST_CASE("to_velocity: cumulative sum recovers positions up to the offset") {
  Rng rng(2);
  const i64 n = 400;
  std::vector<std::array<double, 2>> pos(n);
  pos[0] = {500, 500};
  for (i64 i = 1; i < n; ++i)
    pos[i] = {pos[i - 1][0] + rng.uniform(-30, 30),
              pos[i - 1][1] + rng.uniform(-30, 30)};
  const double ppd = 35.0;
  auto v = to_velocity(pos, ppd);
  double cx = 0, cy = 0;
  for (i64 t = 1; t < n; ++t) {
    cx += v[t] * ppd;
    cy += v[n + t] * ppd;
    CHECK(std::abs(cx - (pos[t][0] - pos[0][0])) < 1e-6);
    CHECK(std::abs(cy - (pos[t][1] - pos[0][1])) < 1e-6);
  }
}

TEST_CASE("preprocess carries identity fields through") {
  GazeRecording rec;
  rec.recording_id = "ridX";
  rec.viewer_id = "vY";
  rec.dataset_id = "dZ";
  rec.sampling_hz = 1000.0;
  rec.px_per_dva = 35.0;
  for (int i = 0; i < 8; ++i)
    rec.positions.push_back({static_cast<double>(i), 0.0});
  auto sig = preprocess(rec);
  CHECK(sig.recording_id == "ridX");
  CHECK(sig.viewer_id == "vY");
  CHECK(sig.dataset_id == "dZ");
  CHECK(sig.length == 4);
  CHECK(sig.values.size() == 8);
}

TEST_CASE("synthesize_corpus: same seed gives bit-identical corpora") {
  SynthParams sp;
  sp.num_viewers = 3;
  sp.recordings_per_viewer = 4;
  sp.duration_s = 1.0;
  sp.seed = 99;
  auto a = synthesize_corpus(sp);
  auto b = synthesize_corpus(sp);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].recording_id == b[i].recording_id);
    CHECK(a[i].positions == b[i].positions);
  }
}

TEST_CASE("synthesize_corpus: counts and distinct viewers") {
  SynthParams sp;
  sp.num_viewers = 10;
  sp.recordings_per_viewer = 200;
  sp.duration_s = 1.0;
  sp.seed = 5;
  auto corpus = synthesize_corpus(sp);
  CHECK(corpus.size() == 2000);
  std::set<std::string> viewers;
  for (const auto& rec : corpus) {
    viewers.insert(rec.viewer_id);
    CHECK(rec.positions.size() == 500);
  }
  CHECK(viewers.size() == 10);
}

TEST_CASE("synthesize_corpus: viewers differ in mean absolute velocity") {
  SynthParams sp;
  sp.num_viewers = 10;
  sp.recordings_per_viewer = 20;
  sp.duration_s = 2.0;
  sp.seed = 7;
  auto corpus = synthesize_corpus(sp);

  std::map<std::string, std::pair<double, i64>> agg;
  for (const auto& rec : corpus) {
    auto sig = preprocess(rec);
    double sum = 0;
    for (double v : sig.values) sum += std::abs(v);
    auto& [s, n] = agg[rec.viewer_id];
    s += sum / static_cast<double>(sig.values.size());
    n += 1;
  }
  std::vector<double> means;
  for (auto& [viewer, sn] : agg) means.push_back(sn.first / sn.second);
  double m = 0;
  for (double v : means) m += v;
  m /= means.size();
  double var = 0;
  for (double v : means) var += (v - m) * (v - m);
  var /= means.size();
  const double cv = std::sqrt(var) / m;
  MESSAGE("viewer mean |v| coefficient of variation: ", cv);
  CHECK(cv > 0.1);
}

TEST_CASE("synthesize_corpus: velocities finite and under the physical cap") {
  SynthParams sp;
  sp.num_viewers = 4;
  sp.recordings_per_viewer = 5;
  sp.duration_s = 2.0;
  sp.seed = 11;
  auto corpus = synthesize_corpus(sp);
  for (const auto& rec : corpus) {
    auto sig = preprocess(rec);
    for (i64 t = 0; t < sig.length; ++t) {
      const double vx = sig.at(0, t), vy = sig.at(1, t);
      CHECK(std::isfinite(vx));
      CHECK(std::isfinite(vy));
      CHECK(std::hypot(vx, vy) <= sp.velocity_cap_dva + 1e-9);
    }
  }
}

TEST_CASE("synthesize_corpus: contract violations") {
  SynthParams sp;
  sp.num_viewers = 1;
  CHECK_THROWS_AS(synthesize_corpus(sp), ParseError);
  sp.num_viewers = 2;
  sp.duration_s = 0.5;
  CHECK_THROWS_AS(synthesize_corpus(sp), ParseError);
}

TEST_CASE("write_corpus then load_manifest roundtrips positions exactly") {
  SynthParams sp;
  sp.num_viewers = 2;
  sp.recordings_per_viewer = 2;
  sp.duration_s = 1.0;
  sp.seed = 13;
  auto corpus = synthesize_corpus(sp);

  TempDir tmp;
  write_corpus(tmp.path, corpus);
  auto loaded = load_manifest(tmp.path / "manifest.csv");
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].recording_id == corpus[i].recording_id);
    CHECK(loaded[i].viewer_id == corpus[i].viewer_id);
    CHECK(loaded[i].sampling_hz == corpus[i].sampling_hz);
    CHECK(loaded[i].positions == corpus[i].positions);
  }
}

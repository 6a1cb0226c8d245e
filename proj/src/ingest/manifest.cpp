#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_set>

#include "gazecl/ingest/ingest.hpp"

namespace gazecl::ingest {

namespace {

const char* kColumns[] = {"recording_id", "viewer_id",  "dataset_id",
                          "sampling_hz",  "px_per_dva", "path"};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  double v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw ParseError(context + ": expected a number, got \"" + s + "\"");
  return v;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::array<double, 2>> load_positions(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open recording file " + path.string());
  std::vector<std::array<double, 2>> out;
  std::string line;
  i64 row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string() + " row " + std::to_string(row) +
                       ": expected \"x<TAB>y\"");
    const std::string ctx = path.string() + " row " + std::to_string(row);
    out.push_back({parse_number(line.substr(0, tab), ctx),
                   parse_number(line.substr(tab + 1), ctx)});
  }
  if (out.empty())
    throw ParseError("recording file " + path.string() + " is empty");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::vector<GazeRecording> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());

  std::string header;
  if (!std::getline(in, header))
    throw ParseError("manifest " + path.string() + " is empty");
  const auto cols = split(strip_cr(header), ',');
  for (std::size_t i = 0; i < std::size(kColumns); ++i) {
    if (i >= cols.size() || cols[i] != kColumns[i])
      throw ParseError("manifest " + path.string() +
                       ": missing or misplaced column \"" + kColumns[i] +
                       "\" in header");
  }

  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  std::vector<GazeRecording> out;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  i64 row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string ctx = path.string() + " row " + std::to_string(row);
    if (fields.size() != std::size(kColumns))
      throw ParseError(ctx + ": expected " +
                       std::to_string(std::size(kColumns)) + " fields, got " +
                       std::to_string(fields.size()));

    GazeRecording rec;
    rec.recording_id = fields[0];
    rec.viewer_id = fields[1];
    rec.dataset_id = fields[2];
    rec.sampling_hz = parse_number(fields[3], ctx + " (sampling_hz)");
    rec.px_per_dva = parse_number(fields[4], ctx + " (px_per_dva)");

    if (rec.recording_id.empty()) throw ParseError(ctx + ": empty recording_id");
    if (rec.viewer_id.empty()) throw ParseError(ctx + ": empty viewer_id");
    if (!(rec.sampling_hz > 0)) throw ParseError(ctx + ": sampling_hz must be > 0");
    if (!(rec.px_per_dva > 0)) throw ParseError(ctx + ": px_per_dva must be > 0");
    if (!seen_ids.insert(rec.recording_id).second)
      throw ParseError("manifest " + path.string() +
                       ": duplicated recording_id \"" + rec.recording_id +
                       "\"");

    rec.positions = load_positions(base / fields[5]);
    if (rec.positions.size() < 2)
      throw ParseError(ctx + ": recording needs at least 2 samples");
    out.push_back(std::move(rec));
  }
  if (out.empty())
    throw ParseError("manifest " + path.string() + " lists no recordings");
  return out;
}

void write_corpus(const std::filesystem::path& dir,
                  const std::vector<GazeRecording>& recordings) {
  std::filesystem::create_directories(dir / "recordings");
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest)
    throw ParseError("cannot write manifest under " + dir.string());
  manifest << "recording_id,viewer_id,dataset_id,sampling_hz,px_per_dva,path\n";
  for (const auto& rec : recordings) {
    const std::string rel = "recordings/" + rec.recording_id + ".tsv";
    manifest << rec.recording_id << ',' << rec.viewer_id << ','
             << rec.dataset_id << ',' << format_double(rec.sampling_hz) << ','
             << format_double(rec.px_per_dva) << ',' << rel << '\n';
    std::ofstream tsv(dir / rel);
    if (!tsv) throw ParseError("cannot write " + (dir / rel).string());
    for (const auto& p : rec.positions)
      tsv << format_double(p[0]) << '\t' << format_double(p[1]) << '\n';
  }
}

}  // namespace gazecl::ingest

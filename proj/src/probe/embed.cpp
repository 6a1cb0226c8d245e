#include <charconv>
#include <fstream>
#include <sstream>

#include "gazecl/probe/probe.hpp"

namespace gazecl::probe {

EmbeddingSet embed_corpus(pipeline::Checkpoint& checkpoint,
                          const std::vector<ingest::VelocitySignal>& corpus) {
  if (corpus.empty())
    throw numcore::ContractError("embed_corpus: empty corpus");
  EmbeddingSet out;
  out.dim = checkpoint.config.encoder.d_h;
  out.rows.reserve(corpus.size());
  for (const auto& sig : corpus) {
    std::vector<float> values(sig.values.size());
    for (std::size_t i = 0; i < sig.values.size(); ++i)
      values[i] = static_cast<float>(sig.values[i]);
    EmbeddingRow row;
    row.recording_id = sig.recording_id;
    row.viewer_id = sig.viewer_id;
    row.dataset_id = sig.dataset_id;
    row.h = encoder::encode(checkpoint.params, values, sig.length);
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings) {
  std::ofstream out(path);
  if (!out)
    throw numcore::ContractError("cannot write embeddings " + path.string());
  out << "recording_id,viewer_id,dataset_id";
  for (i64 i = 0; i < embeddings.dim; ++i) out << ",h_" << i;
  out << "\n";
  char buf[32];
  for (const auto& row : embeddings.rows) {
    out << row.recording_id << ',' << row.viewer_id << ',' << row.dataset_id;
    for (float v : row.h) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      out << ',' << buf;
    }
    out << "\n";
  }
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ingest::ParseError("cannot open embeddings " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw ingest::ParseError("embeddings " + path.string() + " is empty");

  i64 dim = 0;
  {
    std::istringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.size() < 4 || cols[0] != "recording_id" || cols[1] != "viewer_id" ||
        cols[2] != "dataset_id")
      throw ingest::ParseError("embeddings " + path.string() + ": bad header");
    dim = static_cast<i64>(cols.size()) - 3;
    for (i64 i = 0; i < dim; ++i)
      if (cols[3 + i] != "h_" + std::to_string(i))
        throw ingest::ParseError("embeddings " + path.string() +
                                 ": bad header column " + cols[3 + i]);
  }

  EmbeddingSet out;
  out.dim = dim;
  i64 lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    EmbeddingRow row;
    std::getline(ls, row.recording_id, ',');
    std::getline(ls, row.viewer_id, ',');
    std::getline(ls, row.dataset_id, ',');
    row.h.reserve(dim);
    while (std::getline(ls, field, ',')) {
      float v = 0;
      const char* begin = field.data();
      auto [p, ec] = std::from_chars(begin, begin + field.size(), v);
      if (ec != std::errc{} || p != begin + field.size())
        throw ingest::ParseError("embeddings " + path.string() + " row " +
                                 std::to_string(lineno) + ": bad float \"" +
                                 field + "\"");
      row.h.push_back(v);
    }
    if (static_cast<i64>(row.h.size()) != dim)
      throw ingest::ParseError("embeddings " + path.string() + " row " +
                               std::to_string(lineno) + ": expected " +
                               std::to_string(dim) + " values");
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty())
    throw ingest::ParseError("embeddings " + path.string() + " has no rows");
  return out;
}

}  // namespace gazecl::probe

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gazecl/numcore/hash.hpp"
#include "gazecl/pipeline/checkpoint.hpp"

namespace gazecl::pipeline {

namespace {

constexpr const char* kMagic = "gazecl-checkpoint";

struct TensorRef {
  std::string name;
  std::vector<i64> shape;
  const std::vector<float>* values;
};

// Parameters, Adam moments (when initialized), then normalization buffers.
std::vector<TensorRef> tensor_table(const Checkpoint& ckpt) {
  std::vector<TensorRef> out;
  auto& params = const_cast<encoder::EncoderParams<float>&>(ckpt.params);
  const auto named = params.named_parameters();
  for (const auto& [name, t] : named)
    out.push_back({name, t.shape(), &t.data()});
  if (!ckpt.adam.first_moment.empty()) {
    if (ckpt.adam.first_moment.size() != named.size())
      throw CheckpointError("checkpoint: optimizer state does not match parameters");
    for (std::size_t i = 0; i < named.size(); ++i)
      out.push_back({"adam.m." + named[i].first,
                     {static_cast<i64>(ckpt.adam.first_moment[i].size())},
                     &ckpt.adam.first_moment[i]});
    for (std::size_t i = 0; i < named.size(); ++i)
      out.push_back({"adam.v." + named[i].first,
                     {static_cast<i64>(ckpt.adam.second_moment[i].size())},
                     &ckpt.adam.second_moment[i]});
  }
  for (const auto& [name, buf] : params.named_buffers())
    out.push_back({name, {static_cast<i64>(buf->size())}, buf});
  return out;
}

void write_le32(std::string& out, const std::vector<float>& values) {
  static_assert(sizeof(float) == 4);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
  }
}

std::vector<float> read_le32(const std::string& data, std::size_t offset,
                             std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p =
        reinterpret_cast<const unsigned char*>(data.data() + offset + 4 * i);
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  const auto table = tensor_table(ckpt);

  std::string data;
  for (const auto& ref : table) write_le32(data, *ref.values);
  const std::uint64_t hash = numcore::fnv1a64(data.data(), data.size());

  std::ostringstream header;
  header << kMagic << " v" << Checkpoint::kFormatVersion << "\n";
  header << "[config]\n" << ckpt.config.to_text();
  header << "[state]\n";
  header << "epoch = " << ckpt.epoch << "\n";
  header << "iteration = " << ckpt.iteration << "\n";
  header << "adam_step = " << ckpt.adam.step_count << "\n";
  header << "[tensors]\n";
  for (const auto& ref : table) {
    header << ref.name;
    for (i64 d : ref.shape) header << " " << d;
    header << "\n";
  }
  char hashbuf[17];
  std::snprintf(hashbuf, sizeof(hashbuf), "%016llx",
                static_cast<unsigned long long>(hash));
  header << "[data] " << data.size() << " " << hashbuf << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string file = ss.str();

  const auto data_tag = file.find("\n[data] ");
  if (data_tag == std::string::npos)
    throw CheckpointError("checkpoint " + path.string() + ": no data section");
  const auto data_line_end = file.find('\n', data_tag + 1);
  if (data_line_end == std::string::npos)
    throw CheckpointError("checkpoint " + path.string() + ": truncated header");

  const std::string header = file.substr(0, data_tag + 1);
  const std::string data_line =
      file.substr(data_tag + 1, data_line_end - data_tag - 1);
  std::size_t declared_bytes = 0;
  char declared_hash[17] = {0};
  if (std::sscanf(data_line.c_str(), "[data] %zu %16s", &declared_bytes,
                  declared_hash) != 2)
    throw CheckpointError("checkpoint " + path.string() + ": bad data header");

  const std::size_t data_begin = data_line_end + 1;
  if (file.size() - data_begin != declared_bytes)
    throw CheckpointError("checkpoint " + path.string() +
                          ": truncated or padded data (expected " +
                          std::to_string(declared_bytes) + " bytes, have " +
                          std::to_string(file.size() - data_begin) + ")");
  const std::uint64_t hash =
      numcore::fnv1a64(file.data() + data_begin, declared_bytes);
  char hashbuf[17];
  std::snprintf(hashbuf, sizeof(hashbuf), "%016llx",
                static_cast<unsigned long long>(hash));
  if (std::string(hashbuf) != declared_hash)
    throw CheckpointError("checkpoint " + path.string() + ": data hash mismatch");

  // Header sections.
  std::istringstream hs(header);
  std::string line;
  if (!std::getline(hs, line) ||
      line != std::string(kMagic) + " v" +
                  std::to_string(Checkpoint::kFormatVersion))
    throw CheckpointError("checkpoint " + path.string() +
                          ": unsupported magic/version line \"" + line + "\"");

  std::string config_text, state_text;
  std::vector<std::pair<std::string, std::vector<i64>>> manifest;
  enum class Section { None, Config, State, Tensors } section = Section::None;
  while (std::getline(hs, line)) {
    if (line == "[config]") { section = Section::Config; continue; }
    if (line == "[state]") { section = Section::State; continue; }
    if (line == "[tensors]") { section = Section::Tensors; continue; }
    switch (section) {
      case Section::Config: config_text += line + "\n"; break;
      case Section::State: state_text += line + "\n"; break;
      case Section::Tensors: {
        std::istringstream ls(line);
        std::string name;
        ls >> name;
        if (name.empty())
          throw CheckpointError("checkpoint: empty tensor manifest line");
        std::vector<i64> shape;
        i64 d;
        while (ls >> d) shape.push_back(d);
        manifest.emplace_back(name, shape);
        break;
      }
      case Section::None:
        throw CheckpointError("checkpoint " + path.string() +
                              ": content before first section");
    }
  }

  Checkpoint ckpt;
  ckpt.config = TrainConfig::from_text(config_text);

  i64 adam_step = 0;
  for (const auto& [key, value] : parse_flat(state_text, "checkpoint state")) {
    const std::string ctx = "checkpoint state " + key;
    if (value.kind != ConfigValue::Kind::Number)
      throw CheckpointError(ctx + ": expected a number");
    i64 parsed = 0;
    auto [p, ec] = std::from_chars(value.text.data(),
                                   value.text.data() + value.text.size(), parsed);
    if (ec != std::errc{} || p != value.text.data() + value.text.size())
      throw CheckpointError(ctx + ": expected an integer");
    if (key == "epoch") ckpt.epoch = parsed;
    else if (key == "iteration") ckpt.iteration = parsed;
    else if (key == "adam_step") adam_step = parsed;
    else throw CheckpointError(ctx + ": unknown key");
  }

  // Rebuild parameter storage with the right shapes, then fill from data in
  // manifest order, verifying names and sizes as we go.
  ckpt.params = encoder::init_params<float>(ckpt.config.encoder,
                                            numcore::Rng(0));
  ckpt.adam.step_count = adam_step;

  const auto named = ckpt.params.named_parameters();
  const bool has_adam =
      manifest.size() > named.size() &&
      manifest[named.size()].first.rfind("adam.m.", 0) == 0;
  if (has_adam) {
    ckpt.adam.first_moment.resize(named.size());
    ckpt.adam.second_moment.resize(named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      ckpt.adam.first_moment[i].assign(named[i].second.data().size(), 0.0f);
      ckpt.adam.second_moment[i].assign(named[i].second.data().size(), 0.0f);
    }
  } else if (adam_step != 0) {
    throw CheckpointError("checkpoint: adam_step set but no moment tensors");
  }

  const auto expected = tensor_table(ckpt);
  if (expected.size() != manifest.size())
    throw CheckpointError("checkpoint: manifest lists " +
                          std::to_string(manifest.size()) + " tensors, config implies " +
                          std::to_string(expected.size()));

  std::size_t offset = data_begin;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (manifest[i].first != expected[i].name)
      throw CheckpointError("checkpoint: tensor " + std::to_string(i) +
                            " is \"" + manifest[i].first + "\", expected \"" +
                            expected[i].name + "\"");
    i64 numel = 1;
    for (i64 d : manifest[i].second) numel *= d;
    auto* dst = const_cast<std::vector<float>*>(expected[i].values);
    if (manifest[i].second != expected[i].shape)
      throw CheckpointError("checkpoint: tensor " + manifest[i].first +
                            " shape mismatch");
    if (offset + 4 * numel > file.size())
      throw CheckpointError("checkpoint: data section too short for " +
                            manifest[i].first);
    *dst = read_le32(file, offset, static_cast<std::size_t>(numel));
    offset += 4 * static_cast<std::size_t>(numel);
  }
  if (offset != file.size())
    throw CheckpointError("checkpoint: trailing bytes after tensor data");
  return ckpt;
}

}  // namespace gazecl::pipeline

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gazecl/pipeline/config.hpp"

namespace gazecl::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

bool parse_number(const std::string& s, double* out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc{} && ptr == end;
}

std::string unquote(const std::string& token, const std::string& ctx) {
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"')
    return token.substr(1, token.size() - 2);
  if (token.find('"') != std::string::npos)
    throw ConfigError(ctx + ": malformed quoted string " + token);
  return token;
}

ConfigValue parse_value(const std::string& raw, const std::string& ctx) {
  ConfigValue v;
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError(ctx + ": unterminated list");
    v.kind = ConfigValue::Kind::List;
    std::string inner = raw.substr(1, raw.size() - 2);
    std::string item;
    std::istringstream ss(inner);
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(ctx + ": empty list entry");
      v.items.push_back(unquote(item, ctx));
    }
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::Bool;
    v.boolean = raw == "true";
    v.text = raw;
    return v;
  }
  double num;
  if (parse_number(raw, &num)) {
    v.kind = ConfigValue::Kind::Number;
    v.number = num;
    v.text = raw;
    return v;
  }
  v.kind = ConfigValue::Kind::String;
  v.text = unquote(raw, ctx);
  return v;
}

i64 as_int(const ConfigValue& v, const std::string& ctx) {
  if (v.kind != ConfigValue::Kind::Number)
    throw ConfigError(ctx + ": expected an integer");
  i64 out = 0;
  const char* begin = v.text.data();
  auto [ptr, ec] = std::from_chars(begin, begin + v.text.size(), out);
  if (ec != std::errc{} || ptr != begin + v.text.size())
    throw ConfigError(ctx + ": expected an integer, got " + v.text);
  return out;
}

std::uint64_t as_uint(const ConfigValue& v, const std::string& ctx) {
  if (v.kind != ConfigValue::Kind::Number)
    throw ConfigError(ctx + ": expected a nonnegative integer");
  std::uint64_t out = 0;
  const char* begin = v.text.data();
  auto [ptr, ec] = std::from_chars(begin, begin + v.text.size(), out);
  if (ec != std::errc{} || ptr != begin + v.text.size())
    throw ConfigError(ctx + ": expected a nonnegative integer, got " + v.text);
  return out;
}

double as_number(const ConfigValue& v, const std::string& ctx) {
  if (v.kind != ConfigValue::Kind::Number)
    throw ConfigError(ctx + ": expected a number");
  return v.number;
}

std::vector<i64> as_int_list(const ConfigValue& v, const std::string& ctx) {
  if (v.kind != ConfigValue::Kind::List)
    throw ConfigError(ctx + ": expected a list");
  std::vector<i64> out;
  for (const auto& item : v.items) {
    i64 x = 0;
    const char* begin = item.data();
    auto [ptr, ec] = std::from_chars(begin, begin + item.size(), x);
    if (ec != std::errc{} || ptr != begin + item.size())
      throw ConfigError(ctx + ": expected integer list entries, got " + item);
    out.push_back(x);
  }
  return out;
}

std::string quote_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += "\"" + items[i] + "\"";
  }
  return out + "]";
}

std::string int_list(const std::vector<i64>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(items[i]);
  }
  return out + "]";
}

}  // namespace

std::vector<std::pair<std::string, KeyValues>> parse_sections(
    const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, KeyValues>> out;
  out.emplace_back("", KeyValues{});
  std::istringstream ss(text);
  std::string line;
  i64 lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string ctx = origin + ":" + std::to_string(lineno);
    if (line.front() == '[' && line.back() == ']' &&
        line.find('=') == std::string::npos) {
      out.emplace_back(trim(line.substr(1, line.size() - 2)), KeyValues{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(ctx + ": expected \"key = value\"");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(ctx + ": empty key");
    if (raw.empty()) throw ConfigError(ctx + ": empty value for " + key);
    out.back().second.emplace_back(key, parse_value(raw, ctx));
  }
  return out;
}

KeyValues parse_flat(const std::string& text, const std::string& origin) {
  auto sections = parse_sections(text, origin);
  if (sections.size() != 1)
    throw ConfigError(origin + ": unexpected [section] header in flat config");
  return std::move(sections[0].second);
}

void TrainConfig::validate() const {
  if (segment_length < 10)
    throw ConfigError("config: segment_length must be at least 10");
  if (!(temperature > 0)) throw ConfigError("config: temperature must be > 0");
  if (!(learning_rate > 0)) throw ConfigError("config: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be positive");
  if (epochs < 0) throw ConfigError("config: epochs must be nonnegative");
  if (crops.empty()) throw ConfigError("config: crops must be non-empty");
  if (transforms.empty()) throw ConfigError("config: transforms must be non-empty");
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
  encoder.validate();
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "segment_length = " << segment_length << "\n";
  out << "temperature = " << format_number(temperature) << "\n";
  out << "learning_rate = " << format_number(learning_rate) << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "epochs = " << epochs << "\n";
  out << "seed = " << seed << "\n";
  std::vector<std::string> crop_names, transform_names;
  for (auto m : crops) crop_names.push_back(augment::to_string(m));
  for (auto k : transforms) transform_names.push_back(augment::to_string(k));
  out << "crops = " << quote_list(crop_names) << "\n";
  out << "transforms = " << quote_list(transform_names) << "\n";
  out << "datasets = " << quote_list(datasets) << "\n";
  out << "threads = " << threads << "\n";
  out << "encoder_channels = " << int_list(encoder.channel_plan) << "\n";
  out << "encoder_kernel = " << encoder.kernel_size << "\n";
  out << "encoder_stem_kernel = " << encoder.stem_kernel << "\n";
  out << "encoder_dilations = " << int_list(encoder.dilation_plan) << "\n";
  out << "se_reduction = " << encoder.se_reduction << "\n";
  out << "representation_dim = " << encoder.d_h << "\n";
  out << "projection_hidden = " << encoder.projection_hidden << "\n";
  out << "projection_dim = " << encoder.d_z << "\n";
  return out.str();
}

void TrainConfig::apply(const KeyValues& kv,
                        std::vector<std::string>* overrides) {
  bool channels_set = false, dh_set = false;
  for (const auto& [key, value] : kv) {
    const std::string ctx = "config key \"" + key + "\"";
    const std::string before = to_text();
    if (key == "segment_length") {
      segment_length = as_int(value, ctx);
    } else if (key == "temperature") {
      temperature = as_number(value, ctx);
    } else if (key == "learning_rate") {
      learning_rate = as_number(value, ctx);
    } else if (key == "batch_size") {
      batch_size = as_int(value, ctx);
    } else if (key == "epochs") {
      epochs = as_int(value, ctx);
    } else if (key == "seed") {
      seed = as_uint(value, ctx);
    } else if (key == "crops") {
      if (value.kind != ConfigValue::Kind::List)
        throw ConfigError(ctx + ": expected a list of method names");
      crops.clear();
      for (const auto& name : value.items)
        crops.push_back(augment::crop_from_string(name));
    } else if (key == "transforms") {
      if (value.kind != ConfigValue::Kind::List)
        throw ConfigError(ctx + ": expected a list of transformation names");
      transforms.clear();
      for (const auto& name : value.items)
        transforms.push_back(augment::transform_from_string(name));
    } else if (key == "datasets") {
      if (value.kind != ConfigValue::Kind::List)
        throw ConfigError(ctx + ": expected a list of dataset ids");
      datasets = value.items;
    } else if (key == "threads") {
      threads = as_int(value, ctx);
    } else if (key == "encoder") {
      if (value.text == "paper") {
        encoder = encoder::EncoderConfig::paper_scale();
      } else if (value.text == "desk") {
        encoder = encoder::EncoderConfig::desk_scale();
      } else {
        throw ConfigError(ctx + ": unknown preset \"" + value.text +
                          "\" (expected paper or desk)");
      }
    } else if (key == "encoder_channels") {
      encoder.channel_plan = as_int_list(value, ctx);
      channels_set = true;
    } else if (key == "encoder_kernel") {
      encoder.kernel_size = as_int(value, ctx);
    } else if (key == "encoder_stem_kernel") {
      encoder.stem_kernel = as_int(value, ctx);
    } else if (key == "encoder_dilations") {
      encoder.dilation_plan = as_int_list(value, ctx);
    } else if (key == "se_reduction") {
      encoder.se_reduction = as_int(value, ctx);
    } else if (key == "representation_dim") {
      encoder.d_h = as_int(value, ctx);
      dh_set = true;
    } else if (key == "projection_hidden") {
      encoder.projection_hidden = as_int(value, ctx);
    } else if (key == "projection_dim") {
      encoder.d_z = as_int(value, ctx);
    } else {
      throw ConfigError(ctx + ": unknown key");
    }
    if (overrides) {
      const std::string after = to_text();
      if (before != after) overrides->push_back(key);
    }
  }
  // A new channel plan moves d_h with it unless d_h was pinned explicitly.
  if (channels_set && !dh_set && !encoder.channel_plan.empty())
    encoder.d_h = encoder.channel_plan.back();
  validate();
}

TrainConfig TrainConfig::from_text(const std::string& text,
                                   std::vector<std::string>* overrides) {
  TrainConfig cfg;
  cfg.apply(parse_flat(text, "config"), overrides);
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path,
                              std::vector<std::string>* overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg;
  cfg.apply(parse_flat(ss.str(), path.string()), overrides);
  return cfg;
}

}  // namespace gazecl::pipeline

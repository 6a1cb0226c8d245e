#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gazecl/augment/augment.hpp"
#include "gazecl/encoder/encoder.hpp"

namespace gazecl::pipeline {

using i64 = std::int64_t;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One parsed "key = value" right-hand side: a number, string, bool, or a
// bracketed list of numbers/strings.
struct ConfigValue {
  enum class Kind { Number, String, Bool, List };
  Kind kind = Kind::String;
  double number = 0;
  bool boolean = false;
  std::string text;
  std::vector<std::string> items;  // list entries, unquoted
};

using KeyValues = std::vector<std::pair<std::string, ConfigValue>>;

// Flat "key = value" text with '#' comments. Optional "[section]" headers
// split the file; pairs before the first header land in the "" section.
std::vector<std::pair<std::string, KeyValues>> parse_sections(
    const std::string& text, const std::string& origin);
KeyValues parse_flat(const std::string& text, const std::string& origin);

// Training configuration. Defaults follow the published protocol: 1-second
// segments at 500 Hz, tau 0.3, learning rate 5e-4, batch size 1000, every
// cropping method and transformation enabled.
struct TrainConfig {
  i64 segment_length = 500;
  double temperature = 0.3;
  double learning_rate = 5e-4;
  i64 batch_size = 1000;
  i64 epochs = 100;
  std::uint64_t seed = 1;
  std::vector<augment::CropMethod> crops = augment::all_crop_methods();
  std::vector<augment::TransformKind> transforms =
      augment::all_transform_kinds();
  std::vector<std::string> datasets;  // empty selects every dataset
  i64 threads = 0;                    // 0 = hardware threads, 1 = sequential
  encoder::EncoderConfig encoder = encoder::EncoderConfig::paper_scale();

  void validate() const;

  // Canonical text form: every field explicit, fixed order and number
  // formatting, so identical configs serialize to identical bytes.
  std::string to_text() const;

  // Applies key/value pairs on top of *this. Records "key old -> new" lines
  // for every value that changed when `overrides` is given.
  void apply(const KeyValues& kv, std::vector<std::string>* overrides = nullptr);

  static TrainConfig from_text(const std::string& text,
                               std::vector<std::string>* overrides = nullptr);
  static TrainConfig load(const std::filesystem::path& path,
                          std::vector<std::string>* overrides = nullptr);
};

}  // namespace gazecl::pipeline

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sscl/hsi.hpp"
#include "sscl/model.hpp"
#include "sscl/optimizer.hpp"

namespace sscl {

// Paper-protocol learning rates per architecture.
double default_learning_rate(ModelName name);

// Everything a training run needs, read from a JSON config. Validation errors
// name the offending field.
struct RunConfig {
  // dataset: either file paths or an inline synthetic scene
  std::string cube_path;
  std::string labels_path;
  std::optional<SynthSpec> synth;

  ModelName model = ModelName::sscl2dnn;
  int components = 0;  // 0 = per-model default (1 spatial, 10 spectral)
  int window = 27;
  bool use_peepholes = true;
  bool normalize = true;

  std::string manifest_path;  // optional pre-computed split
  std::optional<SplitPolicy> split;
  uint64_t split_seed = 1;

  TrainSchedule schedule;
  int repetitions = 1;
  bool deterministic = true;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json() const;  // effective config after defaults
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

}  // namespace sscl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sscl {

struct PreprocessArgs {
  std::string cube;
  std::string labels;  // optional, validated against the cube when given
  int components = 10;
  bool normalize = true;
  std::string out;
};

struct SplitArgs {
  std::string labels;
  double fraction = 0.0;  // one of fraction/per_class must be set
  int per_class = 0;
  uint64_t seed = 1;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string out_dir;
};

struct EvaluateArgs {
  std::vector<std::string> checkpoints;
  std::string cube;
  std::string labels;
  std::string manifest;
  bool normalize = true;
  std::string out_dir;
};

struct PredictMapArgs {
  std::string checkpoint;
  std::string cube;
  bool normalize = true;
  std::string out_dir;
};

struct GradcheckArgs {
  std::string model = "sscl2dnn";
  uint64_t seed = 7;
  int window = 9;
  int components = 3;
  int classes = 3;
  int samples_per_param = 6;
  double tolerance = 1e-4;
};

struct SynthArgs {
  std::string spec;  // JSON file
  std::string out_dir;
};

int cmd_preprocess(const PreprocessArgs& a);
int cmd_split(const SplitArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_evaluate(const EvaluateArgs& a);
int cmd_predict_map(const PredictMapArgs& a);
int cmd_gradcheck(const GradcheckArgs& a);
int cmd_synth(const SynthArgs& a);

}  // namespace sscl

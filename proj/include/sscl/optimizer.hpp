#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sscl/model.hpp"
#include "sscl/tensor.hpp"

namespace sscl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  int64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState init(const AdamConfig& cfg, const std::vector<std::pair<std::string, Tensor*>>& params);
};

// One ADAM update over every parameter. Throws a numeric error on non-finite
// gradients before touching any state.
void adam_step(AdamState& state, const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<Tensor>& grads);

struct TrainSchedule {
  int epochs = 1;
  double lr = 1e-3;
  int batch_size = 16;
  uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  bool aborted = false;       // loss went non-finite; params hold the last good epoch
  int last_good_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Shuffled mini-batch training with ADAM. Deterministic given the schedule
// seed: sample order, dropout draws, and batch reduction order are all fixed.
TrainResult train_model(Model& model, const std::vector<Tensor>& patches,
                        const std::vector<int>& labels, const TrainSchedule& schedule,
                        AdamState* state = nullptr, const EpochCallback& on_epoch = nullptr);

// Inference-mode accuracy of the model on a labeled set.
double evaluate_accuracy(const Model& model, const std::vector<Tensor>& patches,
                         const std::vector<int>& labels);

// Inference-mode argmax class (0-based) per patch.
std::vector<int> predict_classes(const Model& model, const std::vector<Tensor>& patches);

}  // namespace sscl

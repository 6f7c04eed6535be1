#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sscl/cells.hpp"
#include "sscl/conv.hpp"
#include "sscl/layers.hpp"
#include "sscl/rng.hpp"
#include "sscl/tensor.hpp"

namespace sscl {

enum class ModelName { cnn2d, cnn3d, sacl2dnn, sscl2dnn, sscl3dnn };

std::string to_string(ModelName name);
ModelName model_name_from_string(const std::string& s);

enum class LayerKind { conv2d, conv3d, convlstm2d, convlstm3d, maxpool, dropout, flatten, dense };

struct LayerSpec {
  LayerKind kind;
  std::string name;
  std::vector<int> kernel;   // conv / convlstm
  int channels = 0;          // conv out channels, convlstm hidden channels, dense units
  std::vector<int> window;   // maxpool
  std::vector<int> stride;   // maxpool
  std::vector<PadMode> pad;  // maxpool: one mode or one per spatial axis
  double rate = 0.0;         // dropout
  ReturnMode ret = ReturnMode::all_steps;
  bool relu_after = false;
};

// One of the five fixed stacks plus its extent parameters. The layer list is
// a pure function of (name, components, window, num_classes, use_peepholes).
struct ModelSpec {
  ModelName name = ModelName::sscl2dnn;
  int window = 0;      // s
  int components = 0;  // K
  int num_classes = 0;
  int time_steps = 1;  // unroll length of the recurrent layers
  bool use_peepholes = true;
  std::vector<LayerSpec> layers;

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
};

ModelSpec build_model_spec(ModelName name, int components, int window, int num_classes,
                           bool use_peepholes = true);

struct LayerShape {
  int seq_len = 1;
  std::vector<int> shape;
};

// Per-layer output shapes, including the input as entry 0.
std::vector<LayerShape> infer_shapes(const ModelSpec& spec);

struct ConvParams {
  Tensor w;
  Tensor b;
};

class Model {
 public:
  static Model init(const ModelSpec& spec, uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // Stable (name, tensor) views over every trainable parameter; the order
  // defines optimizer slots and checkpoint layout.
  std::vector<std::pair<std::string, Tensor*>> param_refs();
  std::vector<std::pair<std::string, const Tensor*>> param_refs() const;

  // Splits an s*s*K patch into the per-model input sequence.
  std::vector<Tensor> prepare_input(const Tensor& patch) const;

  struct LayerTrace {
    std::vector<Tensor> inputs;                 // sequence entering the layer
    std::vector<Tensor> pre_act;                // pre-ReLU outputs where relu_after
    std::vector<std::vector<int64_t>> argmax;   // maxpool
    std::vector<std::vector<uint8_t>> masks;    // dropout
    UnrollCache unroll;                         // convlstm
  };

  struct Cache {
    std::vector<LayerTrace> layers;
    Tensor logits;  // [1,N]
    Tensor probs;   // [1,N]
  };

  // Runs the stack on one patch; returns class probabilities [1,N].
  // training=true draws dropout masks from rng (required if any rate > 0).
  Tensor forward(const Tensor& patch, bool training, Rng* rng, Cache* cache) const;

  // Accumulates parameter gradients for one sample into grads (aligned with
  // param_refs). grad_logits is the loss gradient at the output dense layer.
  void backward(const Cache& cache, const Tensor& grad_logits, std::vector<Tensor>& grads) const;

  std::vector<Tensor> zero_grads() const;

 private:
  struct LayerParams {
    std::optional<ConvParams> conv;
    std::optional<ConvLstmParams> cell;
    std::optional<DenseParams> dense;
  };

  ModelSpec spec_;
  std::vector<LayerParams> params_;
  std::vector<int> grad_base_;  // first grad slot per layer
  int n_params_ = 0;

  void index_params();
};

// Serialized model + optimizer state. Round-trips bit-exactly.
struct Checkpoint {
  ModelSpec spec;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, Tensor>> params;

  bool has_optimizer = false;
  double opt_lr = 0.0, opt_beta1 = 0.0, opt_beta2 = 0.0, opt_epsilon = 0.0;
  int64_t opt_t = 0;
  std::vector<std::pair<std::string, Tensor>> opt_m;
  std::vector<std::pair<std::string, Tensor>> opt_v;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_model(Model& model, uint64_t seed);
Model model_from_checkpoint(const Checkpoint& c);

}  // namespace sscl

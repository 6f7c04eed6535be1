#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sscl/conv.hpp"
#include "sscl/tensor.hpp"

namespace sscl {

struct CellState {
  Tensor h;
  Tensor c;
};

// Plain peephole LSTM over vectors. Serves as the reference cell that the
// convolutional cells must reproduce when all spatial extents are singletons.
struct LstmParams {
  int input_size = 0;
  int hidden_units = 0;
  bool use_peepholes = true;
  // input-to-state [in,u] and state-to-state [u,u] weights
  Tensor w_xi, w_hi, w_xf, w_hf, w_xc, w_hc, w_xo, w_ho;
  // per-unit peephole vectors [u]
  Tensor w_ci, w_cf, w_co;
  // biases [u]
  Tensor b_i, b_f, b_c, b_o;
};

LstmParams make_lstm_params(int input_size, int hidden_units, uint64_t seed,
                            bool use_peepholes = true);

CellState lstm_zero_state(const LstmParams& p);
CellState lstm_step(const Tensor& x, const CellState& prev, const LstmParams& p);

// ConvLSTM cell: input-to-state and state-to-state transitions are
// convolutions (SAME padding, stride 1, so hidden states keep their spatial
// extents); peepholes are per-channel Hadamard gains.
struct ConvLstmParams {
  int spatial_dims = 2;          // 2 or 3
  std::vector<int> kernel;       // spatial kernel extents
  int in_channels = 0;
  int hidden_channels = 0;
  bool use_peepholes = true;
  // input-to-state kernels [*kernel, Cin, Ch] and state-to-state [*kernel, Ch, Ch]
  Tensor w_xi, w_hi, w_xf, w_hf, w_xc, w_hc, w_xo, w_ho;
  // per-channel peepholes [Ch]
  Tensor w_ci, w_cf, w_co;
  // biases [Ch]
  Tensor b_i, b_f, b_c, b_o;

  // Stable iteration order shared by the optimizer and checkpoints.
  void visit(const std::function<void(const std::string&, Tensor&)>& fn);
};

ConvLstmParams make_convlstm_params(int spatial_dims, std::vector<int> kernel, int in_channels,
                                    int hidden_channels, uint64_t seed, bool use_peepholes = true);

CellState convlstm_zero_state(const ConvLstmParams& p, const std::vector<int>& input_spatial);
CellState convlstm_step(const Tensor& x, const CellState& prev, const ConvLstmParams& p);

enum class ReturnMode { all_steps, last_step };

struct CellStepCache {
  Tensor x, h_prev, c_prev;
  Tensor i, f, g, o, c, tanh_c;
};

struct UnrollCache {
  std::vector<CellStepCache> steps;
};

// Feeds the sequence through the shared-parameter cell. all_steps yields every
// hidden tensor; last_step yields only the final one.
std::vector<Tensor> unroll_sequence(const std::vector<Tensor>& inputs, const CellState& init,
                                    const ConvLstmParams& p, ReturnMode mode,
                                    UnrollCache* cache = nullptr);

struct ConvLstmGrads {
  Tensor w_xi, w_hi, w_xf, w_hf, w_xc, w_hc, w_xo, w_ho;
  Tensor w_ci, w_cf, w_co;
  Tensor b_i, b_f, b_c, b_o;
  std::vector<Tensor> inputs;
  CellState init_state;
};

// BPTT over the cached unroll. grad_h[t] carries the loss gradient reaching
// each step's hidden output (zero tensors where a step is unused).
ConvLstmGrads convlstm_backward(const UnrollCache& cache, const ConvLstmParams& p,
                                const std::vector<Tensor>& grad_h);

}  // namespace sscl

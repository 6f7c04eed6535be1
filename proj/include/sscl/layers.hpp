#pragma once

#include <cstdint>
#include <vector>

#include "sscl/rng.hpp"
#include "sscl/tensor.hpp"

namespace sscl {

struct DenseParams {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

DenseParams make_dense_params(int in, int out, uint64_t seed);

// x [B,in] -> [B,out], rows mapped through xW + b.
Tensor dense_forward(const Tensor& x, const DenseParams& p);

struct DenseGrads {
  Tensor input;
  Tensor w;
  Tensor b;
};

DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& grad_out);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// Numerically stabilized row softmax, z [B,N] -> probabilities [B,N].
Tensor softmax(const Tensor& z);

// Mean over the batch of -log(p[label]), probabilities floored at 1e-12.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

// Gradient of cross_entropy(softmax(z)) wrt z: (probs - onehot) / batch.
Tensor softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels);

struct DropoutResult {
  Tensor output;
  std::vector<uint8_t> mask;  // 1 = kept
};

// Inverted dropout: zero with probability rate, survivors scaled by 1/(1-rate).
// Inference mode is the identity (mask left empty).
DropoutResult dropout_forward(const Tensor& x, double rate, bool training, Rng& rng);
Tensor dropout_apply_mask(const Tensor& x, const std::vector<uint8_t>& mask, double rate);
Tensor dropout_backward(const Tensor& grad_out, const std::vector<uint8_t>& mask, double rate);

}  // namespace sscl

#pragma once

#include <cstdint>
#include <vector>

#include "sscl/tensor.hpp"

namespace sscl {

// SAME keeps output extent at ceil(in/stride) with zero fill split
// floor(pad/2) before / ceil(pad/2) after; VALID takes only full windows.
enum class PadMode { same_ceil, valid_floor };

struct ConvGeometry {
  std::vector<int> kernel;  // spatial kernel extents, matching the input's spatial axes
  std::vector<int> stride;  // per spatial axis
  PadMode pad = PadMode::same_ceil;
  int out_channels = 0;
};

int conv_out_extent(int in, int kernel, int stride, PadMode mode);
int pad_before(int in, int kernel, int stride, PadMode mode);

// input [H,W,Cin], weights [kh,kw,Cin,Cout], bias [Cout] -> [H',W',Cout].
// Cross-correlation plus broadcast bias; no activation.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom);

// input [D,H,W,Cin], weights [kd,kh,kw,Cin,Cout], bias [Cout] -> [D',H',W',Cout].
Tensor conv3d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom);

struct ConvGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          const ConvGeometry& geom);
ConvGrads conv3d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          const ConvGeometry& geom);

// Max pooling over the leading spatial axes of a channels-last tensor.
// Padding mode is per spatial axis; cells outside the input never win.
// Ties break toward the smallest flat input index.
struct PoolResult {
  Tensor output;
  std::vector<int64_t> argmax;  // flat input index feeding each output cell
};

PoolResult maxpool_forward(const Tensor& input, const std::vector<int>& window,
                           const std::vector<int>& stride, const std::vector<PadMode>& modes);

Tensor maxpool_backward(const std::vector<int64_t>& argmax, const Tensor& grad_out,
                        const std::vector<int>& input_shape);

}  // namespace sscl

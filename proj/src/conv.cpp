#include "sscl/conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sscl {

int conv_out_extent(int in, int kernel, int stride, PadMode mode) {
  if (in <= 0 || kernel <= 0 || stride <= 0) {
    throw std::invalid_argument("conv geometry: extents and strides must be positive");
  }
  if (mode == PadMode::same_ceil) return (in + stride - 1) / stride;
  if (kernel > in) {
    throw std::invalid_argument("conv geometry: kernel " + std::to_string(kernel) +
                                " exceeds input extent " + std::to_string(in) + " (valid padding)");
  }
  return (in - kernel) / stride + 1;
}

int pad_before(int in, int kernel, int stride, PadMode mode) {
  if (mode == PadMode::valid_floor) return 0;
  int out = conv_out_extent(in, kernel, stride, mode);
  int total = std::max(0, (out - 1) * stride + kernel - in);
  return total / 2;
}

namespace {

void check_geom_axes(const ConvGeometry& geom, int spatial_dims, const char* op) {
  if (static_cast<int>(geom.kernel.size()) != spatial_dims ||
      static_cast<int>(geom.stride.size()) != spatial_dims) {
    throw std::invalid_argument(std::string(op) + ": geometry needs " + std::to_string(spatial_dims) +
                                " kernel/stride entries");
  }
}

void check_conv2d_args(const Tensor& input, const Tensor& weights, const ConvGeometry& geom) {
  check_geom_axes(geom, 2, "conv2d");
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be [H,W,Cin], got " + shape_str(input.shape()));
  if (weights.rank() != 4) throw std::invalid_argument("conv2d: weights must be [kh,kw,Cin,Cout], got " + shape_str(weights.shape()));
  if (weights.extent(0) != geom.kernel[0] || weights.extent(1) != geom.kernel[1]) {
    throw std::invalid_argument("conv2d: weight kernel " + shape_str(weights.shape()) +
                                " does not match geometry");
  }
  if (weights.extent(2) != input.extent(2)) {
    throw std::invalid_argument("conv2d: axis 2 (Cin) mismatch, input " + shape_str(input.shape()) +
                                " vs weights " + shape_str(weights.shape()));
  }
}

void check_conv3d_args(const Tensor& input, const Tensor& weights, const ConvGeometry& geom) {
  check_geom_axes(geom, 3, "conv3d");
  if (input.rank() != 4) throw std::invalid_argument("conv3d: input must be [D,H,W,Cin], got " + shape_str(input.shape()));
  if (weights.rank() != 5) throw std::invalid_argument("conv3d: weights must be [kd,kh,kw,Cin,Cout], got " + shape_str(weights.shape()));
  for (int a = 0; a < 3; ++a) {
    if (weights.extent(a) != geom.kernel[a]) {
      throw std::invalid_argument("conv3d: weight kernel " + shape_str(weights.shape()) +
                                  " does not match geometry");
    }
  }
  if (weights.extent(3) != input.extent(3)) {
    throw std::invalid_argument("conv3d: axis 3 (Cin) mismatch, input " + shape_str(input.shape()) +
                                " vs weights " + shape_str(weights.shape()));
  }
}

void check_bias(const Tensor& bias, int cout, const char* op) {
  if (bias.rank() != 1 || bias.extent(0) != cout) {
    throw std::invalid_argument(std::string(op) + ": bias must be [" + std::to_string(cout) + "], got " +
                                shape_str(bias.shape()));
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom) {
  check_conv2d_args(input, weights, geom);
  const int ih = input.extent(0), iw = input.extent(1), cin = input.extent(2);
  const int kh = geom.kernel[0], kw = geom.kernel[1];
  const int cout = weights.extent(3);
  check_bias(bias, cout, "conv2d");
  const int oh = conv_out_extent(ih, kh, geom.stride[0], geom.pad);
  const int ow = conv_out_extent(iw, kw, geom.stride[1], geom.pad);
  const int py = pad_before(ih, kh, geom.stride[0], geom.pad);
  const int px = pad_before(iw, kw, geom.stride[1], geom.pad);

  Tensor out({oh, ow, cout});
  const double* in = input.data();
  const double* w = weights.data();
  double* o = out.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* orow = o + (static_cast<int64_t>(oy) * ow + ox) * cout;
      for (int c = 0; c < cout; ++c) orow[c] = bias[c];
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * geom.stride[0] + ky - py;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * geom.stride[1] + kx - px;
          if (ix < 0 || ix >= iw) continue;
          const double* irow = in + (static_cast<int64_t>(iy) * iw + ix) * cin;
          const double* wrow = w + (static_cast<int64_t>(ky) * kw + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = irow[ci];
            const double* wc = wrow + static_cast<int64_t>(ci) * cout;
            for (int c = 0; c < cout; ++c) orow[c] += v * wc[c];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv3d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom) {
  check_conv3d_args(input, weights, geom);
  const int id = input.extent(0), ih = input.extent(1), iw = input.extent(2), cin = input.extent(3);
  const int kd = geom.kernel[0], kh = geom.kernel[1], kw = geom.kernel[2];
  const int cout = weights.extent(4);
  check_bias(bias, cout, "conv3d");
  const int od = conv_out_extent(id, kd, geom.stride[0], geom.pad);
  const int oh = conv_out_extent(ih, kh, geom.stride[1], geom.pad);
  const int ow = conv_out_extent(iw, kw, geom.stride[2], geom.pad);
  const int pz = pad_before(id, kd, geom.stride[0], geom.pad);
  const int py = pad_before(ih, kh, geom.stride[1], geom.pad);
  const int px = pad_before(iw, kw, geom.stride[2], geom.pad);

  Tensor out({od, oh, ow, cout});
  const double* in = input.data();
  const double* w = weights.data();
  double* o = out.data();
  for (int oz = 0; oz < od; ++oz) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double* orow = o + ((static_cast<int64_t>(oz) * oh + oy) * ow + ox) * cout;
        for (int c = 0; c < cout; ++c) orow[c] = bias[c];
        for (int kz = 0; kz < kd; ++kz) {
          int iz = oz * geom.stride[0] + kz - pz;
          if (iz < 0 || iz >= id) continue;
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * geom.stride[1] + ky - py;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * geom.stride[2] + kx - px;
              if (ix < 0 || ix >= iw) continue;
              const double* irow = in + ((static_cast<int64_t>(iz) * ih + iy) * iw + ix) * cin;
              const double* wrow = w + ((static_cast<int64_t>(kz) * kh + ky) * kw + kx) * cin * cout;
              for (int ci = 0; ci < cin; ++ci) {
                const double v = irow[ci];
                const double* wc = wrow + static_cast<int64_t>(ci) * cout;
                for (int c = 0; c < cout; ++c) orow[c] += v * wc[c];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          const ConvGeometry& geom) {
  check_conv2d_args(input, weights, geom);
  const int ih = input.extent(0), iw = input.extent(1), cin = input.extent(2);
  const int kh = geom.kernel[0], kw = geom.kernel[1];
  const int cout = weights.extent(3);
  const int oh = conv_out_extent(ih, kh, geom.stride[0], geom.pad);
  const int ow = conv_out_extent(iw, kw, geom.stride[1], geom.pad);
  if (grad_out.shape() != std::vector<int>{oh, ow, cout}) {
    throw std::invalid_argument("conv2d_backward: grad_out " + shape_str(grad_out.shape()) +
                                " does not match forward output [" + std::to_string(oh) + "x" +
                                std::to_string(ow) + "x" + std::to_string(cout) + "]");
  }
  const int py = pad_before(ih, kh, geom.stride[0], geom.pad);
  const int px = pad_before(iw, kw, geom.stride[1], geom.pad);

  ConvGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({cout})};
  const double* in = input.data();
  const double* w = weights.data();
  const double* go = grad_out.data();
  double* gi = g.input.data();
  double* gw = g.weights.data();
  double* gb = g.bias.data();

  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* gorow = go + (static_cast<int64_t>(oy) * ow + ox) * cout;
      for (int c = 0; c < cout; ++c) gb[c] += gorow[c];
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * geom.stride[0] + ky - py;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * geom.stride[1] + kx - px;
          if (ix < 0 || ix >= iw) continue;
          const int64_t ibase = (static_cast<int64_t>(iy) * iw + ix) * cin;
          const int64_t wbase = (static_cast<int64_t>(ky) * kw + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = in[ibase + ci];
            const double* wc = w + wbase + static_cast<int64_t>(ci) * cout;
            double* gwc = gw + wbase + static_cast<int64_t>(ci) * cout;
            double acc = 0.0;
            for (int c = 0; c < cout; ++c) {
              const double gv = gorow[c];
              gwc[c] += v * gv;
              acc += wc[c] * gv;
            }
            gi[ibase + ci] += acc;
          }
        }
      }
    }
  }
  return g;
}

ConvGrads conv3d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          const ConvGeometry& geom) {
  check_conv3d_args(input, weights, geom);
  const int id = input.extent(0), ih = input.extent(1), iw = input.extent(2), cin = input.extent(3);
  const int kd = geom.kernel[0], kh = geom.kernel[1], kw = geom.kernel[2];
  const int cout = weights.extent(4);
  const int od = conv_out_extent(id, kd, geom.stride[0], geom.pad);
  const int oh = conv_out_extent(ih, kh, geom.stride[1], geom.pad);
  const int ow = conv_out_extent(iw, kw, geom.stride[2], geom.pad);
  if (grad_out.shape() != std::vector<int>{od, oh, ow, cout}) {
    throw std::invalid_argument("conv3d_backward: grad_out " + shape_str(grad_out.shape()) +
                                " does not match forward output shape");
  }
  const int pz = pad_before(id, kd, geom.stride[0], geom.pad);
  const int py = pad_before(ih, kh, geom.stride[1], geom.pad);
  const int px = pad_before(iw, kw, geom.stride[2], geom.pad);

  ConvGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({cout})};
  const double* in = input.data();
  const double* w = weights.data();
  const double* go = grad_out.data();
  double* gi = g.input.data();
  double* gw = g.weights.data();
  double* gb = g.bias.data();

  for (int oz = 0; oz < od; ++oz) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* gorow = go + ((static_cast<int64_t>(oz) * oh + oy) * ow + ox) * cout;
        for (int c = 0; c < cout; ++c) gb[c] += gorow[c];
        for (int kz = 0; kz < kd; ++kz) {
          int iz = oz * geom.stride[0] + kz - pz;
          if (iz < 0 || iz >= id) continue;
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * geom.stride[1] + ky - py;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * geom.stride[2] + kx - px;
              if (ix < 0 || ix >= iw) continue;
              const int64_t ibase = ((static_cast<int64_t>(iz) * ih + iy) * iw + ix) * cin;
              const int64_t wbase = ((static_cast<int64_t>(kz) * kh + ky) * kw + kx) * cin * cout;
              for (int ci = 0; ci < cin; ++ci) {
                const double v = in[ibase + ci];
                const double* wc = w + wbase + static_cast<int64_t>(ci) * cout;
                double* gwc = gw + wbase + static_cast<int64_t>(ci) * cout;
                double acc = 0.0;
                for (int c = 0; c < cout; ++c) {
                  const double gv = gorow[c];
                  gwc[c] += v * gv;
                  acc += wc[c] * gv;
                }
                gi[ibase + ci] += acc;
              }
            }
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_forward(const Tensor& input, const std::vector<int>& window,
                           const std::vector<int>& stride, const std::vector<PadMode>& modes) {
  const int spatial = input.rank() - 1;
  if (spatial < 1) throw std::invalid_argument("maxpool: input must have spatial axes plus channels");
  if (static_cast<int>(window.size()) != spatial || static_cast<int>(stride.size()) != spatial) {
    throw std::invalid_argument("maxpool: window/stride must cover " + std::to_string(spatial) + " axes");
  }
  std::vector<PadMode> pad = modes;
  if (pad.size() == 1) pad.assign(spatial, modes[0]);
  if (static_cast<int>(pad.size()) != spatial) {
    throw std::invalid_argument("maxpool: need one padding mode or one per spatial axis");
  }
  for (int a = 0; a < spatial; ++a) {
    if (window[a] <= 0) throw std::invalid_argument("maxpool: empty window on axis " + std::to_string(a));
  }

  const int channels = input.extent(spatial);
  std::vector<int> out_shape(spatial + 1);
  std::vector<int> before(spatial);
  for (int a = 0; a < spatial; ++a) {
    out_shape[a] = conv_out_extent(input.extent(a), window[a], stride[a], pad[a]);
    before[a] = pad_before(input.extent(a), window[a], stride[a], pad[a]);
  }
  out_shape[spatial] = channels;

  // Row-major strides of the input's spatial axes, in channel units.
  std::vector<int64_t> in_stride(spatial);
  int64_t acc = 1;
  for (int a = spatial - 1; a >= 0; --a) {
    in_stride[a] = acc;
    acc *= input.extent(a);
  }

  PoolResult res{Tensor(out_shape), {}};
  res.argmax.assign(static_cast<size_t>(res.output.size()), -1);
  const double* in = input.data();
  double* out = res.output.data();
  int64_t* arg = res.argmax.data();

  std::vector<int> ocoord(spatial, 0);
  std::vector<int> wcoord(spatial, 0);
  int64_t ocells = res.output.size() / channels;
  for (int64_t oc = 0; oc < ocells; ++oc) {
    for (int c = 0; c < channels; ++c) {
      double best = 0.0;
      int64_t best_idx = -1;
      // walk the window in ascending flat order so ties keep the first index
      std::fill(wcoord.begin(), wcoord.end(), 0);
      bool done = false;
      while (!done) {
        bool inside = true;
        int64_t cell = 0;
        for (int a = 0; a < spatial; ++a) {
          int p = ocoord[a] * stride[a] + wcoord[a] - before[a];
          if (p < 0 || p >= input.extent(a)) {
            inside = false;
            break;
          }
          cell += p * in_stride[a];
        }
        if (inside) {
          int64_t idx = cell * channels + c;
          double v = in[idx];
          if (best_idx < 0 || v > best) {
            best = v;
            best_idx = idx;
          }
        }
        for (int a = spatial - 1; a >= 0; --a) {
          if (++wcoord[a] < window[a]) break;
          wcoord[a] = 0;
          if (a == 0) done = true;
        }
      }
      if (best_idx < 0) {
        throw std::invalid_argument("maxpool: window holds no input cells (axis extents too small)");
      }
      out[oc * channels + c] = best;
      arg[oc * channels + c] = best_idx;
    }
    for (int a = spatial - 1; a >= 0; --a) {
      if (++ocoord[a] < out_shape[a]) break;
      ocoord[a] = 0;
    }
  }
  return res;
}

Tensor maxpool_backward(const std::vector<int64_t>& argmax, const Tensor& grad_out,
                        const std::vector<int>& input_shape) {
  if (static_cast<int64_t>(argmax.size()) != grad_out.size()) {
    throw std::invalid_argument("maxpool_backward: argmax map does not match grad_out");
  }
  Tensor grad_in(input_shape);
  for (size_t i = 0; i < argmax.size(); ++i) {
    grad_in[argmax[i]] += grad_out[static_cast<int64_t>(i)];
  }
  return grad_in;
}

}  // namespace sscl

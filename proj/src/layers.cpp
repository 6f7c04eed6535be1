#include "sscl/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace sscl {

namespace {
constexpr double kProbFloor = 1e-12;

void check_dense(const Tensor& x, const DenseParams& p) {
  if (x.rank() != 2) throw std::invalid_argument("dense: input must be [B,in], got " + shape_str(x.shape()));
  if (p.w.rank() != 2 || p.b.rank() != 1 || p.b.extent(0) != p.w.extent(1)) {
    throw std::invalid_argument("dense: inconsistent parameters " + shape_str(p.w.shape()) + " / " +
                                shape_str(p.b.shape()));
  }
  if (x.extent(1) != p.w.extent(0)) {
    throw std::invalid_argument("dense: axis 1 mismatch, input " + shape_str(x.shape()) +
                                " vs weights " + shape_str(p.w.shape()));
  }
}
}  // namespace

DenseParams make_dense_params(int in, int out, uint64_t seed) {
  if (in <= 0 || out <= 0) throw std::invalid_argument("dense params: sizes must be positive");
  Rng rng(seed);
  DenseParams p{Tensor({in, out}), Tensor({out})};
  double bound = std::sqrt(6.0 / (in + out));
  for (int64_t i = 0; i < p.w.size(); ++i) p.w[i] = rng.uniform(-bound, bound);
  return p;
}

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
  check_dense(x, p);
  const int batch = x.extent(0), in = x.extent(1), out = p.w.extent(1);
  Tensor y({batch, out});
  for (int b = 0; b < batch; ++b) {
    double* yrow = y.data() + static_cast<int64_t>(b) * out;
    for (int j = 0; j < out; ++j) yrow[j] = p.b[j];
    const double* xrow = x.data() + static_cast<int64_t>(b) * in;
    for (int i = 0; i < in; ++i) {
      const double v = xrow[i];
      const double* wrow = p.w.data() + static_cast<int64_t>(i) * out;
      for (int j = 0; j < out; ++j) yrow[j] += v * wrow[j];
    }
  }
  return y;
}

DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& grad_out) {
  check_dense(x, p);
  const int batch = x.extent(0), in = x.extent(1), out = p.w.extent(1);
  if (grad_out.shape() != std::vector<int>{batch, out}) {
    throw std::invalid_argument("dense_backward: grad_out " + shape_str(grad_out.shape()) +
                                " does not match output");
  }
  DenseGrads g{Tensor({batch, in}), Tensor({in, out}), Tensor({out})};
  for (int b = 0; b < batch; ++b) {
    const double* xrow = x.data() + static_cast<int64_t>(b) * in;
    const double* grow = grad_out.data() + static_cast<int64_t>(b) * out;
    double* girow = g.input.data() + static_cast<int64_t>(b) * in;
    for (int j = 0; j < out; ++j) g.b[j] += grow[j];
    for (int i = 0; i < in; ++i) {
      const double* wrow = p.w.data() + static_cast<int64_t>(i) * out;
      double* gwrow = g.w.data() + static_cast<int64_t>(i) * out;
      double acc = 0.0;
      for (int j = 0; j < out; ++j) {
        gwrow[j] += xrow[i] * grow[j];
        acc += wrow[j] * grow[j];
      }
      girow[i] = acc;
    }
  }
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor g(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

Tensor softmax(const Tensor& z) {
  if (z.rank() != 2 || z.extent(1) < 2) {
    throw std::invalid_argument("softmax: input must be [B,N] with N >= 2, got " + shape_str(z.shape()));
  }
  const int batch = z.extent(0), n = z.extent(1);
  Tensor p({batch, n});
  for (int b = 0; b < batch; ++b) {
    const double* zrow = z.data() + static_cast<int64_t>(b) * n;
    double* prow = p.data() + static_cast<int64_t>(b) * n;
    double zmax = zrow[0];
    for (int j = 1; j < n; ++j) zmax = std::max(zmax, zrow[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      prow[j] = std::exp(zrow[j] - zmax);
      denom += prow[j];
    }
    for (int j = 0; j < n; ++j) prow[j] /= denom;
  }
  return p;
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  const int batch = probs.extent(0), n = probs.extent(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("cross_entropy: label count does not match batch");
  }
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    int y = labels[b];
    if (y < 0 || y >= n) throw std::invalid_argument("cross_entropy: label out of range");
    loss -= std::log(std::max(probs[static_cast<int64_t>(b) * n + y], kProbFloor));
  }
  return loss / batch;
}

Tensor softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels) {
  const int batch = probs.extent(0), n = probs.extent(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("softmax_xent_backward: label count does not match batch");
  }
  Tensor g = scale(probs, 1.0 / batch);
  for (int b = 0; b < batch; ++b) {
    g[static_cast<int64_t>(b) * n + labels[b]] -= 1.0 / batch;
  }
  return g;
}

DropoutResult dropout_forward(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return DropoutResult{x, {}};
  std::vector<uint8_t> mask(static_cast<size_t>(x.size()));
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() >= rate ? 1 : 0;
  return DropoutResult{dropout_apply_mask(x, mask, rate), std::move(mask)};
}

Tensor dropout_apply_mask(const Tensor& x, const std::vector<uint8_t>& mask, double rate) {
  if (mask.empty()) return x;
  if (static_cast<int64_t>(mask.size()) != x.size()) {
    throw std::invalid_argument("dropout: mask does not match input size");
  }
  const double keep = 1.0 / (1.0 - rate);
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = mask[i] ? x[i] * keep : 0.0;
  return y;
}

Tensor dropout_backward(const Tensor& grad_out, const std::vector<uint8_t>& mask, double rate) {
  return dropout_apply_mask(grad_out, mask, rate);
}

}  // namespace sscl

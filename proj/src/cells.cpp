#include "sscl/cells.hpp"

#include <cmath>
#include <stdexcept>

#include "sscl/rng.hpp"

namespace sscl {

namespace {

void fill_glorot(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

// out[j] = sum_i x[i] * w[i][j]
Tensor matvec(const Tensor& x, const Tensor& w) {
  const int in = w.extent(0), out = w.extent(1);
  if (x.rank() != 1 || x.extent(0) != in) {
    throw std::invalid_argument("lstm: input " + shape_str(x.shape()) + " does not match weight " +
                                shape_str(w.shape()));
  }
  Tensor y({out});
  for (int i = 0; i < in; ++i) {
    const double v = x[i];
    const double* wrow = w.data() + static_cast<int64_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += v * wrow[j];
  }
  return y;
}

// state [.., C] scaled per channel by gain [C]
Tensor per_channel(const Tensor& state, const Tensor& gain) {
  const int channels = state.extent(state.rank() - 1);
  if (gain.rank() != 1 || gain.extent(0) != channels) {
    throw std::invalid_argument("peephole gain " + shape_str(gain.shape()) +
                                " does not match state channels");
  }
  Tensor out(state.shape());
  const int64_t cells = state.size() / channels;
  for (int64_t p = 0; p < cells; ++p) {
    for (int c = 0; c < channels; ++c) {
      out[p * channels + c] = state[p * channels + c] * gain[c];
    }
  }
  return out;
}

// grad wrt gain: reduce g*state over all positions per channel
void per_channel_gain_grad(const Tensor& grad, const Tensor& state, Tensor& gain_grad) {
  const int channels = state.extent(state.rank() - 1);
  const int64_t cells = state.size() / channels;
  for (int64_t p = 0; p < cells; ++p) {
    for (int c = 0; c < channels; ++c) {
      gain_grad[c] += grad[p * channels + c] * state[p * channels + c];
    }
  }
}

ConvGeometry cell_geom(const ConvLstmParams& p) {
  ConvGeometry g;
  g.kernel = p.kernel;
  g.stride.assign(p.kernel.size(), 1);
  g.pad = PadMode::same_ceil;
  g.out_channels = p.hidden_channels;
  return g;
}

Tensor cell_conv(const Tensor& in, const Tensor& w, const Tensor& bias, const ConvLstmParams& p) {
  const ConvGeometry geom = cell_geom(p);
  return p.spatial_dims == 2 ? conv2d_forward(in, w, bias, geom) : conv3d_forward(in, w, bias, geom);
}

ConvGrads cell_conv_backward(const Tensor& in, const Tensor& w, const Tensor& grad_out,
                             const ConvLstmParams& p) {
  const ConvGeometry geom = cell_geom(p);
  return p.spatial_dims == 2 ? conv2d_backward(in, w, grad_out, geom)
                             : conv3d_backward(in, w, grad_out, geom);
}

}  // namespace

LstmParams make_lstm_params(int input_size, int hidden_units, uint64_t seed, bool use_peepholes) {
  if (input_size <= 0 || hidden_units <= 0) {
    throw std::invalid_argument("lstm params: sizes must be positive");
  }
  Rng rng(seed);
  LstmParams p;
  p.input_size = input_size;
  p.hidden_units = hidden_units;
  p.use_peepholes = use_peepholes;
  for (Tensor* w : {&p.w_xi, &p.w_xf, &p.w_xc, &p.w_xo}) {
    *w = Tensor({input_size, hidden_units});
    fill_glorot(*w, input_size, hidden_units, rng);
  }
  for (Tensor* w : {&p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho}) {
    *w = Tensor({hidden_units, hidden_units});
    fill_glorot(*w, hidden_units, hidden_units, rng);
  }
  p.w_ci = Tensor({hidden_units});
  p.w_cf = Tensor({hidden_units});
  p.w_co = Tensor({hidden_units});
  p.b_i = Tensor({hidden_units});
  p.b_f = Tensor({hidden_units});
  p.b_f.fill(1.0);
  p.b_c = Tensor({hidden_units});
  p.b_o = Tensor({hidden_units});
  return p;
}

CellState lstm_zero_state(const LstmParams& p) {
  return CellState{Tensor({p.hidden_units}), Tensor({p.hidden_units})};
}

CellState lstm_step(const Tensor& x, const CellState& prev, const LstmParams& p) {
  Tensor a_i = add(add(matvec(x, p.w_xi), matvec(prev.h, p.w_hi)), p.b_i);
  Tensor a_f = add(add(matvec(x, p.w_xf), matvec(prev.h, p.w_hf)), p.b_f);
  if (p.use_peepholes) {
    add_in_place(a_i, hadamard(p.w_ci, prev.c));
    add_in_place(a_f, hadamard(p.w_cf, prev.c));
  }
  Tensor i = sigmoid(a_i);
  Tensor f = sigmoid(a_f);
  Tensor g = tanh(add(add(matvec(x, p.w_xc), matvec(prev.h, p.w_hc)), p.b_c));
  Tensor c = add(hadamard(f, prev.c), hadamard(i, g));
  Tensor a_o = add(add(matvec(x, p.w_xo), matvec(prev.h, p.w_ho)), p.b_o);
  if (p.use_peepholes) add_in_place(a_o, hadamard(p.w_co, c));
  Tensor o = sigmoid(a_o);
  Tensor h = hadamard(o, tanh(c));
  return CellState{std::move(h), std::move(c)};
}

void ConvLstmParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("w_xi", w_xi);
  fn("w_hi", w_hi);
  fn("w_xf", w_xf);
  fn("w_hf", w_hf);
  fn("w_xc", w_xc);
  fn("w_hc", w_hc);
  fn("w_xo", w_xo);
  fn("w_ho", w_ho);
  fn("w_ci", w_ci);
  fn("w_cf", w_cf);
  fn("w_co", w_co);
  fn("b_i", b_i);
  fn("b_f", b_f);
  fn("b_c", b_c);
  fn("b_o", b_o);
}

ConvLstmParams make_convlstm_params(int spatial_dims, std::vector<int> kernel, int in_channels,
                                    int hidden_channels, uint64_t seed, bool use_peepholes) {
  if (spatial_dims != 2 && spatial_dims != 3) {
    throw std::invalid_argument("convlstm: spatial_dims must be 2 or 3");
  }
  if (static_cast<int>(kernel.size()) != spatial_dims) {
    throw std::invalid_argument("convlstm: kernel must have one extent per spatial axis");
  }
  Rng rng(seed);
  ConvLstmParams p;
  p.spatial_dims = spatial_dims;
  p.kernel = std::move(kernel);
  p.in_channels = in_channels;
  p.hidden_channels = hidden_channels;
  p.use_peepholes = use_peepholes;

  int64_t taps = 1;
  for (int k : p.kernel) taps *= k;
  std::vector<int> xshape(p.kernel.begin(), p.kernel.end());
  xshape.push_back(in_channels);
  xshape.push_back(hidden_channels);
  std::vector<int> hshape(p.kernel.begin(), p.kernel.end());
  hshape.push_back(hidden_channels);
  hshape.push_back(hidden_channels);

  for (Tensor* w : {&p.w_xi, &p.w_xf, &p.w_xc, &p.w_xo}) {
    *w = Tensor(xshape);
    fill_glorot(*w, static_cast<int>(taps) * in_channels, static_cast<int>(taps) * hidden_channels, rng);
  }
  for (Tensor* w : {&p.w_hi, &p.w_hf, &p.w_hc, &p.w_ho}) {
    *w = Tensor(hshape);
    fill_glorot(*w, static_cast<int>(taps) * hidden_channels, static_cast<int>(taps) * hidden_channels, rng);
  }
  // Peepholes start at zero: they are per-channel gains, not fan-shaped weights.
  p.w_ci = Tensor({hidden_channels});
  p.w_cf = Tensor({hidden_channels});
  p.w_co = Tensor({hidden_channels});
  p.b_i = Tensor({hidden_channels});
  p.b_f = Tensor({hidden_channels});
  p.b_f.fill(1.0);
  p.b_c = Tensor({hidden_channels});
  p.b_o = Tensor({hidden_channels});
  return p;
}

CellState convlstm_zero_state(const ConvLstmParams& p, const std::vector<int>& input_spatial) {
  if (static_cast<int>(input_spatial.size()) != p.spatial_dims) {
    throw std::invalid_argument("convlstm: state needs one extent per spatial axis");
  }
  std::vector<int> shape(input_spatial);
  shape.push_back(p.hidden_channels);
  return CellState{Tensor(shape), Tensor(shape)};
}

namespace {

CellState convlstm_step_cached(const Tensor& x, const CellState& prev, const ConvLstmParams& p,
                               CellStepCache* cache) {
  if (x.rank() != p.spatial_dims + 1) {
    throw std::invalid_argument("convlstm: input rank " + std::to_string(x.rank()) +
                                " does not match spatial_dims " + std::to_string(p.spatial_dims));
  }
  if (x.extent(x.rank() - 1) != p.in_channels) {
    throw std::invalid_argument("convlstm: input channels " + std::to_string(x.extent(x.rank() - 1)) +
                                " != " + std::to_string(p.in_channels));
  }
  require_same_shape(prev.h, prev.c, "convlstm state");

  Tensor a_i = add(cell_conv(x, p.w_xi, p.b_i, p), cell_conv(prev.h, p.w_hi, Tensor({p.hidden_channels}), p));
  Tensor a_f = add(cell_conv(x, p.w_xf, p.b_f, p), cell_conv(prev.h, p.w_hf, Tensor({p.hidden_channels}), p));
  if (p.use_peepholes) {
    add_in_place(a_i, per_channel(prev.c, p.w_ci));
    add_in_place(a_f, per_channel(prev.c, p.w_cf));
  }
  Tensor i = sigmoid(a_i);
  Tensor f = sigmoid(a_f);
  Tensor g = tanh(add(cell_conv(x, p.w_xc, p.b_c, p), cell_conv(prev.h, p.w_hc, Tensor({p.hidden_channels}), p)));
  Tensor c = add(hadamard(f, prev.c), hadamard(i, g));
  Tensor a_o = add(cell_conv(x, p.w_xo, p.b_o, p), cell_conv(prev.h, p.w_ho, Tensor({p.hidden_channels}), p));
  if (p.use_peepholes) add_in_place(a_o, per_channel(c, p.w_co));
  Tensor o = sigmoid(a_o);
  Tensor tc = tanh(c);
  Tensor h = hadamard(o, tc);

  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = i;
    cache->f = f;
    cache->g = g;
    cache->o = o;
    cache->c = c;
    cache->tanh_c = tc;
  }
  return CellState{std::move(h), std::move(c)};
}

}  // namespace

CellState convlstm_step(const Tensor& x, const CellState& prev, const ConvLstmParams& p) {
  return convlstm_step_cached(x, prev, p, nullptr);
}

std::vector<Tensor> unroll_sequence(const std::vector<Tensor>& inputs, const CellState& init,
                                    const ConvLstmParams& p, ReturnMode mode, UnrollCache* cache) {
  if (inputs.empty()) throw std::invalid_argument("unroll_sequence: empty input sequence");
  for (size_t t = 1; t < inputs.size(); ++t) {
    require_same_shape(inputs[0], inputs[t], "unroll_sequence inputs");
  }
  if (cache) cache->steps.resize(inputs.size());

  CellState state = init;
  std::vector<Tensor> hs;
  hs.reserve(inputs.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    state = convlstm_step_cached(inputs[t], state, p, cache ? &cache->steps[t] : nullptr);
    hs.push_back(state.h);
  }
  if (mode == ReturnMode::last_step) return {hs.back()};
  return hs;
}

ConvLstmGrads convlstm_backward(const UnrollCache& cache, const ConvLstmParams& p,
                                const std::vector<Tensor>& grad_h) {
  const size_t steps = cache.steps.size();
  if (steps == 0) throw std::invalid_argument("convlstm_backward: empty cache");
  if (grad_h.size() != steps) {
    throw std::invalid_argument("convlstm_backward: need one hidden gradient per step");
  }

  ConvLstmGrads g;
  g.w_xi = Tensor(p.w_xi.shape());
  g.w_hi = Tensor(p.w_hi.shape());
  g.w_xf = Tensor(p.w_xf.shape());
  g.w_hf = Tensor(p.w_hf.shape());
  g.w_xc = Tensor(p.w_xc.shape());
  g.w_hc = Tensor(p.w_hc.shape());
  g.w_xo = Tensor(p.w_xo.shape());
  g.w_ho = Tensor(p.w_ho.shape());
  g.w_ci = Tensor(p.w_ci.shape());
  g.w_cf = Tensor(p.w_cf.shape());
  g.w_co = Tensor(p.w_co.shape());
  g.b_i = Tensor(p.b_i.shape());
  g.b_f = Tensor(p.b_f.shape());
  g.b_c = Tensor(p.b_c.shape());
  g.b_o = Tensor(p.b_o.shape());
  g.inputs.resize(steps);

  Tensor dh_next;  // gradient flowing into h_{t} from step t+1
  Tensor dc_next;  // gradient flowing into c_{t} from step t+1
  for (size_t st = steps; st-- > 0;) {
    const CellStepCache& s = cache.steps[st];
    require_same_shape(grad_h[st], s.tanh_c, "convlstm_backward grad_h");

    Tensor dh = grad_h[st];
    if (dh_next.size() > 0) add_in_place(dh, dh_next);

    // h = o . tanh(c)
    Tensor do_ = hadamard(dh, s.tanh_c);
    Tensor dc(s.c.shape());
    for (int64_t k = 0; k < dc.size(); ++k) {
      dc[k] = dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
    }
    if (dc_next.size() > 0) add_in_place(dc, dc_next);

    // o = sigmoid(a_o), a_o depends on c through the output peephole
    Tensor da_o(do_.shape());
    for (int64_t k = 0; k < da_o.size(); ++k) da_o[k] = do_[k] * s.o[k] * (1.0 - s.o[k]);
    if (p.use_peepholes) {
      add_in_place(dc, per_channel(da_o, p.w_co));
      per_channel_gain_grad(da_o, s.c, g.w_co);
    }

    // c = f . c_prev + i . g
    Tensor da_i(dc.shape()), da_f(dc.shape()), da_g(dc.shape());
    for (int64_t k = 0; k < dc.size(); ++k) {
      const double d = dc[k];
      da_i[k] = d * s.g[k] * s.i[k] * (1.0 - s.i[k]);
      da_f[k] = d * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
      da_g[k] = d * s.i[k] * (1.0 - s.g[k] * s.g[k]);
    }
    Tensor dc_prev = hadamard(dc, s.f);
    if (p.use_peepholes) {
      add_in_place(dc_prev, per_channel(da_i, p.w_ci));
      add_in_place(dc_prev, per_channel(da_f, p.w_cf));
      per_channel_gain_grad(da_i, s.c_prev, g.w_ci);
      per_channel_gain_grad(da_f, s.c_prev, g.w_cf);
    }

    Tensor dx(s.x.shape());
    Tensor dh_prev(s.h_prev.shape());
    struct GateWiring {
      const Tensor* da;
      const Tensor* wx;
      const Tensor* wh;
      Tensor* gwx;
      Tensor* gwh;
      Tensor* gb;
    };
    const GateWiring gates[4] = {
        {&da_i, &p.w_xi, &p.w_hi, &g.w_xi, &g.w_hi, &g.b_i},
        {&da_f, &p.w_xf, &p.w_hf, &g.w_xf, &g.w_hf, &g.b_f},
        {&da_g, &p.w_xc, &p.w_hc, &g.w_xc, &g.w_hc, &g.b_c},
        {&da_o, &p.w_xo, &p.w_ho, &g.w_xo, &g.w_ho, &g.b_o},
    };
    for (const GateWiring& gate : gates) {
      ConvGrads gx = cell_conv_backward(s.x, *gate.wx, *gate.da, p);
      add_in_place(dx, gx.input);
      add_in_place(*gate.gwx, gx.weights);
      add_in_place(*gate.gb, gx.bias);
      ConvGrads gh = cell_conv_backward(s.h_prev, *gate.wh, *gate.da, p);
      add_in_place(dh_prev, gh.input);
      add_in_place(*gate.gwh, gh.weights);
    }

    g.inputs[st] = std::move(dx);
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
  g.init_state.h = std::move(dh_next);
  g.init_state.c = std::move(dc_next);
  return g;
}

}  // namespace sscl

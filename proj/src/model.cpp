#include "sscl/model.hpp"

#include <json.hpp>
#include <cstring>
#include <stdexcept>

#include "sscl/binio.hpp"

namespace sscl {

using nlohmann::json;

std::string to_string(ModelName name) {
  switch (name) {
    case ModelName::cnn2d: return "cnn2d";
    case ModelName::cnn3d: return "cnn3d";
    case ModelName::sacl2dnn: return "sacl2dnn";
    case ModelName::sscl2dnn: return "sscl2dnn";
    case ModelName::sscl3dnn: return "sscl3dnn";
  }
  return "?";
}

ModelName model_name_from_string(const std::string& s) {
  if (s == "cnn2d") return ModelName::cnn2d;
  if (s == "cnn3d") return ModelName::cnn3d;
  if (s == "sacl2dnn") return ModelName::sacl2dnn;
  if (s == "sscl2dnn") return ModelName::sscl2dnn;
  if (s == "sscl3dnn") return ModelName::sscl3dnn;
  throw std::invalid_argument("unknown model name: " + s);
}

namespace {

LayerSpec conv_layer(const std::string& name, LayerKind kind, std::vector<int> kernel, int channels) {
  LayerSpec l;
  l.kind = kind;
  l.name = name;
  l.kernel = std::move(kernel);
  l.channels = channels;
  l.relu_after = true;  // CNN baselines activate after every convolution
  return l;
}

LayerSpec convlstm_layer(const std::string& name, LayerKind kind, std::vector<int> kernel,
                         int channels, ReturnMode ret) {
  LayerSpec l;
  l.kind = kind;
  l.name = name;
  l.kernel = std::move(kernel);
  l.channels = channels;
  l.ret = ret;
  return l;
}

LayerSpec pool_layer(const std::string& name, int spatial_dims, std::vector<PadMode> pad) {
  LayerSpec l;
  l.kind = LayerKind::maxpool;
  l.name = name;
  l.window.assign(spatial_dims, 2);
  l.stride.assign(spatial_dims, 2);
  l.pad = std::move(pad);
  return l;
}

LayerSpec dropout_layer(const std::string& name, double rate) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.name = name;
  l.rate = rate;
  return l;
}

LayerSpec flatten_layer() {
  LayerSpec l;
  l.kind = LayerKind::flatten;
  l.name = "flatten";
  return l;
}

LayerSpec dense_layer(const std::string& name, int units, bool relu_after) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.name = name;
  l.channels = units;
  l.relu_after = relu_after;
  return l;
}

}  // namespace

ModelSpec build_model_spec(ModelName name, int components, int window, int num_classes,
                           bool use_peepholes) {
  if (components <= 0 || window <= 0) throw std::invalid_argument("build: window and components must be positive");
  if (num_classes < 2) throw std::invalid_argument("build: need at least 2 classes");
  if ((name == ModelName::cnn2d || name == ModelName::sacl2dnn) && components != 1) {
    throw std::invalid_argument("build: " + to_string(name) + " takes a single component (K=1), got K=" +
                                std::to_string(components));
  }

  ModelSpec spec;
  spec.name = name;
  spec.window = window;
  spec.components = components;
  spec.num_classes = num_classes;
  spec.use_peepholes = use_peepholes;

  const PadMode same = PadMode::same_ceil;
  const PadMode valid = PadMode::valid_floor;

  switch (name) {
    case ModelName::cnn2d:
      spec.time_steps = 1;
      spec.layers = {
          conv_layer("conv_1", LayerKind::conv2d, {4, 4}, 32),
          pool_layer("pool_1", 2, {valid}),
          conv_layer("conv_2", LayerKind::conv2d, {5, 5}, 64),
          pool_layer("pool_2", 2, {valid}),
          dropout_layer("drop_1", 0.5),
          conv_layer("conv_3", LayerKind::conv2d, {4, 4}, 128),
          dropout_layer("drop_2", 0.5),
          flatten_layer(),
          dense_layer("dense_1", 128, true),
          dense_layer("output", num_classes, false),
      };
      break;
    case ModelName::cnn3d:
      spec.time_steps = 1;
      spec.layers = {
          conv_layer("conv_1", LayerKind::conv3d, {4, 4, 4}, 32),
          pool_layer("pool_1", 3, {valid}),
          conv_layer("conv_2", LayerKind::conv3d, {5, 5, 5}, 64),
          // The printed output column pools the leading axis ceil-wise and the
          // spatial axes floor-wise (5x13x13 -> 3x6x6), so the modes differ
          // per axis here.
          pool_layer("pool_2", 3, {same, valid, valid}),
          dropout_layer("drop_1", 0.5),
          conv_layer("conv_3", LayerKind::conv3d, {4, 4, 4}, 128),
          dropout_layer("drop_2", 0.5),
          flatten_layer(),
          dense_layer("dense_1", 128, true),
          dense_layer("output", num_classes, false),
      };
      break;
    case ModelName::sacl2dnn:
      spec.time_steps = 1;
      spec.layers = {
          convlstm_layer("convlstm_1", LayerKind::convlstm2d, {3, 3}, 32, ReturnMode::all_steps),
          pool_layer("pool_1", 2, {same}),
          convlstm_layer("convlstm_2", LayerKind::convlstm2d, {5, 5}, 64, ReturnMode::last_step),
          pool_layer("pool_2", 2, {same}),
          dropout_layer("drop_1", 0.25),
          flatten_layer(),
          dense_layer("dense_1", 128, true),
          dense_layer("output", num_classes, false),
      };
      break;
    case ModelName::sscl2dnn:
      spec.time_steps = components;
      spec.layers = {
          convlstm_layer("convlstm_1", LayerKind::convlstm2d, {4, 4}, 32, ReturnMode::all_steps),
          pool_layer("pool_1", 2, {same}),
          convlstm_layer("convlstm_2", LayerKind::convlstm2d, {3, 3}, 64, ReturnMode::last_step),
          pool_layer("pool_2", 2, {same}),
          dropout_layer("drop_1", 0.25),
          flatten_layer(),
          dense_layer("dense_1", 128, true),
          dense_layer("output", num_classes, false),
      };
      break;
    case ModelName::sscl3dnn:
      spec.time_steps = 1;
      spec.layers = {
          convlstm_layer("convlstm_1", LayerKind::convlstm3d, {4, 4, 4}, 32, ReturnMode::all_steps),
          pool_layer("pool_1", 3, {same}),
          convlstm_layer("convlstm_2", LayerKind::convlstm3d, {3, 3, 3}, 64, ReturnMode::last_step),
          pool_layer("pool_2", 3, {same}),
          dropout_layer("drop_1", 0.25),
          flatten_layer(),
          dense_layer("dense_1", 128, true),
          dropout_layer("drop_2", 0.5),
          dense_layer("output", num_classes, false),
      };
      break;
  }
  return spec;
}

std::string ModelSpec::to_json() const {
  json j;
  j["model"] = sscl::to_string(name);
  j["window"] = window;
  j["components"] = components;
  j["num_classes"] = num_classes;
  j["use_peepholes"] = use_peepholes;
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  json j = json::parse(text);
  return build_model_spec(model_name_from_string(j.at("model").get<std::string>()),
                          j.at("components").get<int>(), j.at("window").get<int>(),
                          j.at("num_classes").get<int>(), j.value("use_peepholes", true));
}

namespace {

std::vector<int> input_tensor_shape(const ModelSpec& spec) {
  switch (spec.name) {
    case ModelName::cnn2d:
    case ModelName::sacl2dnn:
    case ModelName::sscl2dnn:
      return {spec.window, spec.window, 1};
    case ModelName::cnn3d:
    case ModelName::sscl3dnn:
      return {spec.components, spec.window, spec.window, 1};
  }
  return {};
}

}  // namespace

std::vector<LayerShape> infer_shapes(const ModelSpec& spec) {
  std::vector<LayerShape> out;
  LayerShape cur{spec.time_steps, input_tensor_shape(spec)};
  out.push_back(cur);
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d:
      case LayerKind::convlstm2d:
      case LayerKind::convlstm3d: {
        const int spatial = static_cast<int>(l.kernel.size());
        if (static_cast<int>(cur.shape.size()) != spatial + 1) {
          throw std::invalid_argument(l.name + ": input rank " + shape_str(cur.shape) +
                                      " does not fit a " + std::to_string(spatial) + "-d kernel");
        }
        std::vector<int> next(spatial + 1);
        const bool recurrent = l.kind == LayerKind::convlstm2d || l.kind == LayerKind::convlstm3d;
        for (int a = 0; a < spatial; ++a) {
          PadMode mode = recurrent ? PadMode::same_ceil : (l.pad.empty() ? PadMode::same_ceil : l.pad[0]);
          next[a] = conv_out_extent(cur.shape[a], l.kernel[a], 1, mode);
        }
        next[spatial] = l.channels;
        cur.shape = next;
        if (recurrent && l.ret == ReturnMode::last_step) cur.seq_len = 1;
        break;
      }
      case LayerKind::maxpool: {
        const int spatial = static_cast<int>(cur.shape.size()) - 1;
        std::vector<PadMode> pad = l.pad;
        if (pad.size() == 1) pad.assign(spatial, l.pad[0]);
        for (int a = 0; a < spatial; ++a) {
          cur.shape[a] = conv_out_extent(cur.shape[a], l.window[a], l.stride[a], pad[a]);
        }
        break;
      }
      case LayerKind::dropout:
        break;
      case LayerKind::flatten: {
        int64_t n = cur.seq_len * shape_size(cur.shape);
        cur.shape = {static_cast<int>(n)};
        cur.seq_len = 1;
        break;
      }
      case LayerKind::dense: {
        if (cur.shape.size() != 1) {
          throw std::invalid_argument(l.name + ": dense needs flat input, got " + shape_str(cur.shape));
        }
        cur.shape = {l.channels};
        break;
      }
    }
    out.push_back(cur);
  }
  return out;
}

void Model::index_params() {
  grad_base_.assign(params_.size(), -1);
  int idx = 0;
  for (size_t li = 0; li < params_.size(); ++li) {
    grad_base_[li] = idx;
    LayerParams& p = params_[li];
    if (p.conv) idx += 2;
    if (p.dense) idx += 2;
    if (p.cell) {
      p.cell->visit([&](const std::string&, Tensor&) { ++idx; });
    }
  }
  n_params_ = idx;
}

Model Model::init(const ModelSpec& spec, uint64_t seed) {
  Model m;
  m.spec_ = spec;
  std::vector<LayerShape> shapes = infer_shapes(spec);
  m.params_.resize(spec.layers.size());

  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    const LayerShape& in = shapes[li];
    const uint64_t lseed = derive_seed(seed, li);
    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d: {
        const int spatial = static_cast<int>(l.kernel.size());
        const int cin = in.shape[spatial];
        std::vector<int> wshape(l.kernel.begin(), l.kernel.end());
        wshape.push_back(cin);
        wshape.push_back(l.channels);
        ConvParams cp{Tensor(wshape), Tensor({l.channels})};
        int64_t taps = 1;
        for (int k : l.kernel) taps *= k;
        Rng rng(lseed);
        double bound = std::sqrt(6.0 / (taps * cin + taps * l.channels));
        for (int64_t i = 0; i < cp.w.size(); ++i) cp.w[i] = rng.uniform(-bound, bound);
        m.params_[li].conv = std::move(cp);
        break;
      }
      case LayerKind::convlstm2d:
      case LayerKind::convlstm3d: {
        const int spatial = static_cast<int>(l.kernel.size());
        const int cin = in.shape[spatial];
        m.params_[li].cell = make_convlstm_params(spatial, l.kernel, cin, l.channels, lseed,
                                                  spec.use_peepholes);
        break;
      }
      case LayerKind::dense: {
        m.params_[li].dense = make_dense_params(in.shape[0], l.channels, lseed);
        break;
      }
      default:
        break;
    }
  }
  m.index_params();
  return m;
}

std::vector<std::pair<std::string, Tensor*>> Model::param_refs() {
  std::vector<std::pair<std::string, Tensor*>> refs;
  for (size_t li = 0; li < params_.size(); ++li) {
    const std::string& lname = spec_.layers[li].name;
    LayerParams& p = params_[li];
    if (p.conv) {
      refs.emplace_back(lname + ".w", &p.conv->w);
      refs.emplace_back(lname + ".b", &p.conv->b);
    }
    if (p.dense) {
      refs.emplace_back(lname + ".w", &p.dense->w);
      refs.emplace_back(lname + ".b", &p.dense->b);
    }
    if (p.cell) {
      p.cell->visit([&](const std::string& n, Tensor& t) { refs.emplace_back(lname + "." + n, &t); });
    }
  }
  return refs;
}

std::vector<std::pair<std::string, const Tensor*>> Model::param_refs() const {
  auto refs = const_cast<Model*>(this)->param_refs();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(refs.size());
  for (auto& [n, t] : refs) out.emplace_back(n, t);
  return out;
}

std::vector<Tensor> Model::prepare_input(const Tensor& patch) const {
  const int s = spec_.window;
  const int k = spec_.components;
  if (patch.shape() != std::vector<int>{s, s, k}) {
    throw std::invalid_argument("patch " + shape_str(patch.shape()) + " does not match model input " +
                                shape_str({s, s, k}));
  }
  switch (spec_.name) {
    case ModelName::cnn2d:
    case ModelName::sacl2dnn:
      return {patch};  // K == 1, already [s,s,1]
    case ModelName::sscl2dnn: {
      // one band per time step
      std::vector<Tensor> seq;
      seq.reserve(k);
      for (int band = 0; band < k; ++band) {
        Tensor t({s, s, 1});
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            t[static_cast<int64_t>(y) * s + x] = patch[(static_cast<int64_t>(y) * s + x) * k + band];
          }
        }
        seq.push_back(std::move(t));
      }
      return seq;
    }
    case ModelName::cnn3d:
    case ModelName::sscl3dnn: {
      // whole cube, bands leading: [K,s,s,1]
      Tensor t({k, s, s, 1});
      for (int band = 0; band < k; ++band) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            t[(static_cast<int64_t>(band) * s + y) * s + x] =
                patch[(static_cast<int64_t>(y) * s + x) * k + band];
          }
        }
      }
      return {t};
    }
  }
  throw std::logic_error("unreachable");
}

Tensor Model::forward(const Tensor& patch, bool training, Rng* rng, Cache* cache) const {
  std::vector<Tensor> act = prepare_input(patch);
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(spec_.layers.size());
  }

  for (size_t li = 0; li < spec_.layers.size(); ++li) {
    const LayerSpec& l = spec_.layers[li];
    const LayerParams& p = params_[li];
    LayerTrace* trace = cache ? &cache->layers[li] : nullptr;
    if (trace) trace->inputs = act;

    switch (l.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d: {
        ConvGeometry geom{l.kernel, std::vector<int>(l.kernel.size(), 1), PadMode::same_ceil, l.channels};
        for (Tensor& t : act) {
          Tensor y = l.kind == LayerKind::conv2d ? conv2d_forward(t, p.conv->w, p.conv->b, geom)
                                                 : conv3d_forward(t, p.conv->w, p.conv->b, geom);
          if (l.relu_after) {
            if (trace) trace->pre_act.push_back(y);
            y = relu(y);
          }
          t = std::move(y);
        }
        break;
      }
      case LayerKind::convlstm2d:
      case LayerKind::convlstm3d: {
        std::vector<int> spatial(act[0].shape().begin(), act[0].shape().end() - 1);
        CellState init = convlstm_zero_state(*p.cell, spatial);
        act = unroll_sequence(act, init, *p.cell, l.ret, trace ? &trace->unroll : nullptr);
        break;
      }
      case LayerKind::maxpool: {
        for (Tensor& t : act) {
          PoolResult r = maxpool_forward(t, l.window, l.stride, l.pad);
          if (trace) trace->argmax.push_back(std::move(r.argmax));
          t = std::move(r.output);
        }
        break;
      }
      case LayerKind::dropout: {
        if (training && l.rate > 0.0) {
          if (!rng) throw std::invalid_argument("dropout in training mode needs an rng");
          for (Tensor& t : act) {
            DropoutResult r = dropout_forward(t, l.rate, true, *rng);
            if (trace) trace->masks.push_back(std::move(r.mask));
            t = std::move(r.output);
          }
        } else if (trace) {
          trace->masks.assign(act.size(), {});
        }
        break;
      }
      case LayerKind::flatten: {
        int64_t total = 0;
        for (const Tensor& t : act) total += t.size();
        Tensor flat({1, static_cast<int>(total)});
        int64_t off = 0;
        for (const Tensor& t : act) {
          for (int64_t i = 0; i < t.size(); ++i) flat[off + i] = t[i];
          off += t.size();
        }
        act = {std::move(flat)};
        break;
      }
      case LayerKind::dense: {
        Tensor y = dense_forward(act[0], *p.dense);
        if (l.relu_after) {
          if (trace) trace->pre_act.push_back(y);
          y = relu(y);
        }
        act = {std::move(y)};
        break;
      }
    }
  }

  Tensor probs = softmax(act[0]);
  require_finite(probs, "model output");
  if (cache) {
    cache->logits = act[0];
    cache->probs = probs;
  }
  return probs;
}

void Model::backward(const Cache& cache, const Tensor& grad_logits, std::vector<Tensor>& grads) const {
  if (static_cast<int>(grads.size()) != n_params_) {
    throw std::invalid_argument("backward: gradient buffer does not match parameter count");
  }
  std::vector<Tensor> grad = {grad_logits};

  for (size_t li = spec_.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec_.layers[li];
    const LayerParams& p = params_[li];
    const LayerTrace& trace = cache.layers[li];
    const int base = grad_base_[li];

    switch (l.kind) {
      case LayerKind::dense: {
        Tensor g = grad[0];
        if (l.relu_after) g = relu_backward(trace.pre_act[0], g);
        DenseGrads dg = dense_backward(trace.inputs[0], *p.dense, g);
        add_in_place(grads[base], dg.w);
        add_in_place(grads[base + 1], dg.b);
        grad = {std::move(dg.input)};
        break;
      }
      case LayerKind::flatten: {
        std::vector<Tensor> parts;
        parts.reserve(trace.inputs.size());
        int64_t off = 0;
        for (const Tensor& in : trace.inputs) {
          Tensor g(in.shape());
          for (int64_t i = 0; i < in.size(); ++i) g[i] = grad[0][off + i];
          off += in.size();
          parts.push_back(std::move(g));
        }
        grad = std::move(parts);
        break;
      }
      case LayerKind::dropout: {
        for (size_t t = 0; t < grad.size(); ++t) {
          if (!trace.masks.empty() && !trace.masks[t].empty()) {
            grad[t] = dropout_backward(grad[t], trace.masks[t], l.rate);
          }
        }
        break;
      }
      case LayerKind::maxpool: {
        for (size_t t = 0; t < grad.size(); ++t) {
          grad[t] = maxpool_backward(trace.argmax[t], grad[t], trace.inputs[t].shape());
        }
        break;
      }
      case LayerKind::convlstm2d:
      case LayerKind::convlstm3d: {
        const size_t steps = trace.unroll.steps.size();
        std::vector<Tensor> grad_h(steps);
        if (l.ret == ReturnMode::last_step) {
          for (size_t t = 0; t + 1 < steps; ++t) grad_h[t] = Tensor(trace.unroll.steps[t].tanh_c.shape());
          grad_h[steps - 1] = grad[0];
        } else {
          grad_h = grad;
        }
        ConvLstmGrads cg = convlstm_backward(trace.unroll, *p.cell, grad_h);
        int idx = base;
        // mirror ConvLstmParams::visit order
        for (Tensor* gt : {&cg.w_xi, &cg.w_hi, &cg.w_xf, &cg.w_hf, &cg.w_xc, &cg.w_hc, &cg.w_xo,
                           &cg.w_ho, &cg.w_ci, &cg.w_cf, &cg.w_co, &cg.b_i, &cg.b_f, &cg.b_c, &cg.b_o}) {
          add_in_place(grads[idx++], *gt);
        }
        grad = std::move(cg.inputs);
        break;
      }
      case LayerKind::conv2d:
      case LayerKind::conv3d: {
        ConvGeometry geom{l.kernel, std::vector<int>(l.kernel.size(), 1), PadMode::same_ceil, l.channels};
        for (size_t t = 0; t < grad.size(); ++t) {
          Tensor g = grad[t];
          if (l.relu_after) g = relu_backward(trace.pre_act[t], g);
          ConvGrads cg = l.kind == LayerKind::conv2d
                             ? conv2d_backward(trace.inputs[t], p.conv->w, g, geom)
                             : conv3d_backward(trace.inputs[t], p.conv->w, g, geom);
          add_in_place(grads[base], cg.weights);
          add_in_place(grads[base + 1], cg.bias);
          grad[t] = std::move(cg.input);
        }
        break;
      }
    }
  }
}

std::vector<Tensor> Model::zero_grads() const {
  std::vector<Tensor> grads;
  grads.reserve(n_params_);
  for (auto& [name, t] : param_refs()) {
    (void)name;
    grads.emplace_back(t->shape());
  }
  return grads;
}

namespace {
constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'P'};
constexpr uint32_t kCheckpointVersion = 1;

void write_tensor_blob(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u8(1);
  w.u32(static_cast<uint32_t>(t.rank()));
  for (int a = 0; a < t.rank(); ++a) w.u32(static_cast<uint32_t>(t.extent(a)));
  for (int64_t i = 0; i < t.size(); ++i) w.f64(t[i]);
}

void write_bytes_blob(ByteWriter& w, const std::string& name, const std::string& payload) {
  w.str(name);
  w.u8(0);
  w.u64(payload.size());
  w.raw(payload.data(), payload.size());
}
}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);

  json meta;
  meta["seed"] = c.seed;
  if (c.has_optimizer) {
    meta["optimizer"] = {{"lr", c.opt_lr},
                         {"beta1", c.opt_beta1},
                         {"beta2", c.opt_beta2},
                         {"epsilon", c.opt_epsilon},
                         {"t", c.opt_t}};
  }

  uint32_t blobs = 2 + static_cast<uint32_t>(c.params.size() + c.opt_m.size() + c.opt_v.size());
  w.u32(blobs);
  write_bytes_blob(w, "spec", c.spec.to_json());
  write_bytes_blob(w, "meta", meta.dump());
  for (const auto& [name, t] : c.params) write_tensor_blob(w, "param/" + name, t);
  for (const auto& [name, t] : c.opt_m) write_tensor_blob(w, "adam.m/" + name, t);
  for (const auto& [name, t] : c.opt_v) write_tensor_blob(w, "adam.v/" + name, t);

  w.u32(crc32(w.bytes.data() + 4, w.bytes.size() - 4));
  write_file_atomic(path, w.bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("checkpoint " + path + ": bad magic");
  }
  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  if (crc32(bytes.data() + 4, bytes.size() - 8) != stored_crc) {
    throw std::runtime_error("checkpoint " + path + ": checksum mismatch");
  }

  ByteReader r(bytes.data() + 4, bytes.size() - 8);
  uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  uint32_t blobs = r.u32();

  Checkpoint c;
  std::string spec_json, meta_json;
  for (uint32_t i = 0; i < blobs; ++i) {
    std::string name = r.str();
    uint8_t type = r.u8();
    if (type == 0) {
      uint64_t n = r.u64();
      std::string payload(n, '\0');
      r.raw(payload.data(), n);
      if (name == "spec") spec_json = payload;
      else if (name == "meta") meta_json = payload;
    } else if (type == 1) {
      uint32_t rank = r.u32();
      std::vector<int> shape(rank);
      for (uint32_t a = 0; a < rank; ++a) shape[a] = static_cast<int>(r.u32());
      Tensor t(shape);
      for (int64_t k = 0; k < t.size(); ++k) t[k] = r.f64();
      if (name.rfind("param/", 0) == 0) c.params.emplace_back(name.substr(6), std::move(t));
      else if (name.rfind("adam.m/", 0) == 0) c.opt_m.emplace_back(name.substr(7), std::move(t));
      else if (name.rfind("adam.v/", 0) == 0) c.opt_v.emplace_back(name.substr(7), std::move(t));
      else throw std::runtime_error("checkpoint " + path + ": unknown blob " + name);
    } else {
      throw std::runtime_error("checkpoint " + path + ": unknown blob type");
    }
  }
  if (spec_json.empty() || meta_json.empty()) {
    throw std::runtime_error("checkpoint " + path + ": missing spec/meta blob");
  }
  c.spec = ModelSpec::from_json(spec_json);
  json meta = json::parse(meta_json);
  c.seed = meta.at("seed").get<uint64_t>();
  if (meta.contains("optimizer")) {
    c.has_optimizer = true;
    c.opt_lr = meta["optimizer"].at("lr").get<double>();
    c.opt_beta1 = meta["optimizer"].at("beta1").get<double>();
    c.opt_beta2 = meta["optimizer"].at("beta2").get<double>();
    c.opt_epsilon = meta["optimizer"].at("epsilon").get<double>();
    c.opt_t = meta["optimizer"].at("t").get<int64_t>();
  }
  return c;
}

Checkpoint checkpoint_from_model(Model& model, uint64_t seed) {
  Checkpoint c;
  c.spec = model.spec();
  c.seed = seed;
  for (auto& [name, t] : model.param_refs()) c.params.emplace_back(name, *t);
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  Model m = Model::init(c.spec, c.seed);
  auto refs = m.param_refs();
  if (refs.size() != c.params.size()) {
    throw std::runtime_error("checkpoint: parameter count does not match model spec");
  }
  for (size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].first != c.params[i].first) {
      throw std::runtime_error("checkpoint: missing blob " + refs[i].first);
    }
    if (refs[i].second->shape() != c.params[i].second.shape()) {
      throw std::runtime_error("checkpoint: blob " + refs[i].first + " shape mismatch");
    }
    *refs[i].second = c.params[i].second;
  }
  return m;
}

}  // namespace sscl

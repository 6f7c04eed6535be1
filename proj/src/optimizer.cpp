#include "sscl/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sscl/layers.hpp"
#include "sscl/rng.hpp"

namespace sscl {

AdamState AdamState::init(const AdamConfig& cfg,
                          const std::vector<std::pair<std::string, Tensor*>>& params) {
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& [name, t] : params) {
    (void)name;
    st.m.emplace_back(t->shape());
    st.v.emplace_back(t->shape());
  }
  return st;
}

void adam_step(AdamState& state, const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<Tensor>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state counts differ");
  }
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].all_finite()) {
      throw std::runtime_error("numeric error: non-finite gradient for " + params[i].first);
    }
  }

  state.t += 1;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].second;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (int64_t k = 0; k < theta.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      theta[k] -= c.lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

std::vector<int> predict_classes(const Model& model, const std::vector<Tensor>& patches) {
  std::vector<int> out;
  out.reserve(patches.size());
  for (const Tensor& patch : patches) {
    Tensor probs = model.forward(patch, false, nullptr, nullptr);
    int best = 0;
    for (int j = 1; j < probs.extent(1); ++j) {
      if (probs[j] > probs[best]) best = j;
    }
    out.push_back(best);
  }
  return out;
}

double evaluate_accuracy(const Model& model, const std::vector<Tensor>& patches,
                         const std::vector<int>& labels) {
  if (patches.empty()) return 0.0;
  std::vector<int> pred = predict_classes(model, patches);
  int correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

TrainResult train_model(Model& model, const std::vector<Tensor>& patches,
                        const std::vector<int>& labels, const TrainSchedule& schedule,
                        AdamState* state, const EpochCallback& on_epoch) {
  if (patches.empty()) throw std::invalid_argument("train: dataset is empty");
  if (patches.size() != labels.size()) throw std::invalid_argument("train: patch/label counts differ");
  if (schedule.epochs < 1 || schedule.batch_size < 1 || schedule.lr <= 0.0) {
    throw std::invalid_argument("train: schedule must have epochs >= 1, batch_size >= 1, lr > 0");
  }

  auto params = model.param_refs();
  AdamState local;
  if (!state) {
    local = AdamState::init(AdamConfig{schedule.lr, 0.9, 0.999, 1e-8}, params);
    state = &local;
  }

  TrainResult result;
  const int n = static_cast<int>(patches.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  // snapshot for divergence recovery
  auto snapshot = [&]() {
    std::vector<Tensor> copy;
    copy.reserve(params.size());
    for (auto& [name, t] : params) {
      (void)name;
      copy.push_back(*t);
    }
    return copy;
  };
  auto restore = [&](const std::vector<Tensor>& copy) {
    for (size_t i = 0; i < params.size(); ++i) *params[i].second = copy[i];
  };
  std::vector<Tensor> last_good = snapshot();

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng perm_rng(derive_seed(schedule.seed, static_cast<uint64_t>(epoch), 0xA11CE));
    perm_rng.shuffle(order);

    double loss_sum = 0.0;
    bool diverged = false;
    try {
      for (int start = 0; start < n && !diverged; start += schedule.batch_size) {
        const int count = std::min(schedule.batch_size, n - start);
        std::vector<Tensor> grads = model.zero_grads();
        for (int s = 0; s < count; ++s) {
          const int idx = order[start + s];
          Rng sample_rng(derive_seed(schedule.seed, static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(start + s)));
          Model::Cache cache;
          Tensor probs = model.forward(patches[idx], true, &sample_rng, &cache);
          double loss = cross_entropy(probs, {labels[idx]});
          if (!std::isfinite(loss)) {
            diverged = true;
            break;
          }
          loss_sum += loss;
          Tensor dlogits = scale(softmax_xent_backward(probs, {labels[idx]}), 1.0 / count);
          model.backward(cache, dlogits, grads);
        }
        if (!diverged) adam_step(*state, params, grads);
      }
    } catch (const std::runtime_error&) {
      diverged = true;
    }

    if (diverged) {
      restore(last_good);
      result.aborted = true;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / n;
    rec.accuracy = evaluate_accuracy(model, patches, labels);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(rec);
    result.last_good_epoch = epoch;
    last_good = snapshot();
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace sscl

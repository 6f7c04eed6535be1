#include "sscl/gradcheck.hpp"

#include <cmath>

#include "sscl/layers.hpp"
#include "sscl/rng.hpp"

namespace sscl {

double relative_error(double analytic, double numeric, double floor) {
  double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport gradcheck_model(Model& model, const Tensor& patch, int label,
                                int samples_per_param, double step, uint64_t seed) {
  auto params = model.param_refs();

  auto loss_at = [&]() {
    Tensor probs = model.forward(patch, false, nullptr, nullptr);
    return cross_entropy(probs, {label});
  };

  Model::Cache cache;
  Tensor probs = model.forward(patch, false, nullptr, &cache);
  Tensor dlogits = softmax_xent_backward(probs, {label});
  std::vector<Tensor> grads = model.zero_grads();
  model.backward(cache, dlogits, grads);

  GradCheckReport report;
  Rng rng(seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& theta = *params[pi].second;
    ParamCheck pc;
    pc.name = params[pi].first;
    const int64_t n = theta.size();
    const int64_t want = std::min<int64_t>(n, samples_per_param);
    for (int64_t s = 0; s < want; ++s) {
      const int64_t k = n <= samples_per_param ? s : static_cast<int64_t>(rng.below(n));
      const double saved = theta[k];
      theta[k] = saved + step;
      const double lp = loss_at();
      theta[k] = saved - step;
      const double lm = loss_at();
      theta[k] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double rel = relative_error(grads[pi][k], numeric);
      if (rel > pc.max_rel_err) pc.max_rel_err = rel;
      ++pc.checked;
    }
    if (pc.max_rel_err > report.max_rel_err) {
      report.max_rel_err = pc.max_rel_err;
      report.worst_param = pc.name;
    }
    report.checked += pc.checked;
    report.per_param.push_back(std::move(pc));
  }
  return report;
}

}  // namespace sscl

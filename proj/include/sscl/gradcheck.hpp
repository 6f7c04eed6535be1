#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sscl/model.hpp"

namespace sscl {

struct ParamCheck {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int checked = 0;
  std::vector<ParamCheck> per_param;

  bool pass(double tol) const { return checked > 0 && max_rel_err < tol; }
};

// rel = |a - n| / max(|a|, |n|, floor); floor keeps finite-difference noise on
// near-zero coordinates from registering as error.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Central finite differences of the cross-entropy loss against the analytic
// backward pass, on up to samples_per_param coordinates of every parameter.
GradCheckReport gradcheck_model(Model& model, const Tensor& patch, int label,
                                int samples_per_param, double step, uint64_t seed);

}  // namespace sscl

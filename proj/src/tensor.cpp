#include "sscl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sscl {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor shape has non-positive extent " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != static_cast<int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (shape_size(shape) != size()) {
    throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                " changes element count");
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return;
  if (a.rank() != b.rank()) {
    throw std::invalid_argument(std::string(op) + ": rank mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
  for (int axis = 0; axis < a.rank(); ++axis) {
    if (a.extent(axis) != b.extent(axis)) {
      throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                  " mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
  }
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw std::runtime_error(std::string("numeric error: non-finite values in ") + what);
}

namespace {
template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return map2(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map2(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return map2(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  return out;
}

void add_in_place(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "add_in_place");
  double* pd = dst.data();
  const double* ps = src.data();
  for (int64_t i = 0; i < dst.size(); ++i) pd[i] += ps[i];
}

void axpy_in_place(Tensor& dst, double factor, const Tensor& src) {
  require_same_shape(dst, src, "axpy_in_place");
  double* pd = dst.data();
  const double* ps = src.data();
  for (int64_t i = 0; i < dst.size(); ++i) pd[i] += factor * ps[i];
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

}  // namespace sscl

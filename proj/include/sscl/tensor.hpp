#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sscl {

// Dense N-dimensional array of doubles, row-major (last axis fastest).
// The single numeric currency of every layer in this library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_[axis]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Reinterprets the flat data under a new shape of equal element count.
  Tensor reshaped(std::vector<int> shape) const;

  void fill(double v);
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws std::invalid_argument naming the first offending axis.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);
// Throws std::runtime_error if the tensor holds NaN/Inf.
void require_finite(const Tensor& t, const char* what);

// Elementwise suite.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

void add_in_place(Tensor& dst, const Tensor& src);
void axpy_in_place(Tensor& dst, double factor, const Tensor& src);

double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);

}  // namespace sscl

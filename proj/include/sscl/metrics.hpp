#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sscl/hsi.hpp"

namespace sscl {

// N x N counts, rows = ground truth class, columns = predicted class (1..N).
struct ConfusionMatrix {
  int n = 0;
  std::vector<int64_t> counts;

  int64_t at(int truth, int pred) const {
    return counts[static_cast<size_t>(truth - 1) * n + (pred - 1)];
  }
  int64_t& at(int truth, int pred) {
    return counts[static_cast<size_t>(truth - 1) * n + (pred - 1)];
  }
  int64_t total() const;
  int64_t row_sum(int truth) const;
  int64_t col_sum(int pred) const;
};

// Background (truth 0) pixels are excluded by contract; truth labels must be
// nonzero and both label vectors equally long.
ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth, int n);

double overall_accuracy(const ConfusionMatrix& cm);
double average_accuracy(const ConfusionMatrix& cm);
double kappa(const ConfusionMatrix& cm);

struct ClassPalette {
  std::vector<std::array<uint8_t, 3>> colors;  // colors[c] for class c+1
  std::array<uint8_t, 3> background{0, 0, 0};

  static ClassPalette make_default(int num_classes);
};

// Binary PPM (P6) image of a predicted label raster, one pixel per cell.
std::vector<uint8_t> render_map(const LabelMap& pred, const ClassPalette& palette);

}  // namespace sscl

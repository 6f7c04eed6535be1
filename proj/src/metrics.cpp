#include "sscl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sscl {

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts) t += c;
  return t;
}

int64_t ConfusionMatrix::row_sum(int truth) const {
  int64_t s = 0;
  for (int p = 1; p <= n; ++p) s += at(truth, p);
  return s;
}

int64_t ConfusionMatrix::col_sum(int pred) const {
  int64_t s = 0;
  for (int t = 1; t <= n; ++t) s += at(t, pred);
  return s;
}

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth, int n) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("confusion: prediction/truth lengths differ");
  }
  if (n < 1) throw std::invalid_argument("confusion: need at least one class");
  ConfusionMatrix cm;
  cm.n = n;
  cm.counts.assign(static_cast<size_t>(n) * n, 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 1 || truth[i] > n) {
      throw std::invalid_argument("confusion: truth label " + std::to_string(truth[i]) +
                                  " outside 1.." + std::to_string(n));
    }
    if (pred[i] < 1 || pred[i] > n) {
      throw std::invalid_argument("confusion: predicted label " + std::to_string(pred[i]) +
                                  " outside 1.." + std::to_string(n));
    }
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  int64_t diag = 0;
  for (int c = 1; c <= cm.n; ++c) diag += cm.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(total);
}

double average_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  double acc = 0.0;
  for (int c = 1; c <= cm.n; ++c) {
    int64_t row = cm.row_sum(c);
    if (row == 0) {
      throw std::invalid_argument("metrics: class " + std::to_string(c) + " has no samples (AA undefined)");
    }
    acc += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
  }
  return acc / cm.n;
}

double kappa(const ConfusionMatrix& cm) {
  int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  double po = overall_accuracy(cm);
  double pe = 0.0;
  for (int c = 1; c <= cm.n; ++c) {
    pe += static_cast<double>(cm.row_sum(c)) * static_cast<double>(cm.col_sum(c));
  }
  pe /= static_cast<double>(total) * static_cast<double>(total);
  if (pe == 1.0) throw std::invalid_argument("metrics: chance agreement is 1, kappa undefined");
  return (po - pe) / (1.0 - pe);
}

ClassPalette ClassPalette::make_default(int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("palette: need at least one class");
  ClassPalette p;
  p.colors.reserve(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    // golden-ratio hue walk keeps neighbors far apart
    double h = std::fmod(0.61803398875 * c, 1.0) * 6.0;
    double s = 0.75, v = 0.95;
    double f = h - std::floor(h);
    double pch = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (static_cast<int>(h) % 6) {
      case 0: r = v; g = t; b = pch; break;
      case 1: r = q; g = v; b = pch; break;
      case 2: r = pch; g = v; b = t; break;
      case 3: r = pch; g = q; b = v; break;
      case 4: r = t; g = pch; b = v; break;
      default: r = v; g = pch; b = q; break;
    }
    p.colors.push_back({static_cast<uint8_t>(r * 255.0 + 0.5), static_cast<uint8_t>(g * 255.0 + 0.5),
                        static_cast<uint8_t>(b * 255.0 + 0.5)});
  }
  // nudge any duplicate until all classes render distinctly
  for (size_t i = 0; i < p.colors.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (p.colors[i] == p.colors[j]) p.colors[i][2] = static_cast<uint8_t>(p.colors[i][2] + i);
    }
  }
  return p;
}

std::vector<uint8_t> render_map(const LabelMap& pred, const ClassPalette& palette) {
  int max_label = pred.max_label();
  if (max_label > static_cast<int>(palette.colors.size())) {
    throw std::invalid_argument("render_map: palette has " + std::to_string(palette.colors.size()) +
                                " colors, raster needs " + std::to_string(max_label));
  }
  std::string header = "P6\n" + std::to_string(pred.width) + " " + std::to_string(pred.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + pred.labels.size() * 3);
  for (int row = 0; row < pred.height; ++row) {
    for (int col = 0; col < pred.width; ++col) {
      uint16_t l = pred.at(row, col);
      const std::array<uint8_t, 3>& c = l == 0 ? palette.background : palette.colors[l - 1];
      out.push_back(c[0]);
      out.push_back(c[1]);
      out.push_back(c[2]);
    }
  }
  return out;
}

}  // namespace sscl

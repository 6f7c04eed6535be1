#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sscl/tensor.hpp"

namespace sscl {

// W x H raster with D spectral bands, values stored [band][row][col].
struct HsiCube {
  int width = 0;
  int height = 0;
  int bands = 0;
  std::vector<double> values;

  double at(int band, int row, int col) const {
    return values[(static_cast<size_t>(band) * height + row) * width + col];
  }
  double& at(int band, int row, int col) {
    return values[(static_cast<size_t>(band) * height + row) * width + col];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Per-pixel class labels; 0 marks unlabeled background.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> labels;

  uint16_t at(int row, int col) const { return labels[static_cast<size_t>(row) * width + col]; }
  uint16_t& at(int row, int col) { return labels[static_cast<size_t>(row) * width + col]; }
  int max_label() const;
};

// HSIC / HSIL binary containers (little-endian, CRC-32 protected).
HsiCube load_cube(const std::string& path);
void save_cube(const HsiCube& cube, const std::string& path);
LabelMap load_labels(const std::string& path);
void save_labels(const LabelMap& labels, const std::string& path);

// Throws if the label raster extents differ from the cube's.
void require_matching_raster(const HsiCube& cube, const LabelMap& labels);

// Per-band zero mean, unit variance; constant bands pass through centered.
HsiCube normalize(const HsiCube& cube);

struct PcaModel {
  std::vector<double> mean;         // per band
  std::vector<double> eigenvalues;  // all D, descending
  std::vector<double> basis;        // D x K, column k = component k loadings
  int bands = 0;
  int components = 0;
};

// Covariance eigendecomposition via cyclic Jacobi rotations; components are
// ordered by descending eigenvalue with the largest-magnitude loading forced
// positive.
PcaModel pca_fit(const HsiCube& cube, int components);
HsiCube pca_apply(const PcaModel& model, const HsiCube& cube);
HsiCube pca_reduce(const HsiCube& cube, int components);

// Batch of s*s*K windows with their center-pixel labels (1..N).
struct PatchBatch {
  int window = 0;
  int components = 0;
  std::vector<Tensor> patches;                 // each [s,s,K]
  std::vector<int> labels;                     // 1-based class ids
  std::vector<std::pair<int, int>> coords;     // (row, col)
};

// Mirror-padded window extraction around each coordinate.
PatchBatch extract_patches(const HsiCube& cube, const LabelMap& labels,
                           const std::vector<std::pair<int, int>>& coords, int window);

struct SplitPolicy {
  enum class Kind { fraction, per_class } kind = Kind::per_class;
  double fraction = 0.1;
  int per_class = 10;
};

struct SplitRow {
  int cls = 0;
  int row = 0;
  int col = 0;
  bool train = false;
};

struct SplitManifest {
  uint64_t seed = 0;
  std::string policy;
  std::vector<SplitRow> rows;

  std::vector<std::pair<int, int>> train_coords() const;
  std::vector<std::pair<int, int>> test_coords() const;
};

// Seeded per-class sampling without replacement; the remainder is test.
SplitManifest stratified_split(const LabelMap& labels, const SplitPolicy& policy, uint64_t seed);

void save_manifest(const SplitManifest& m, const std::string& path);
SplitManifest load_manifest(const std::string& path);

struct SynthSpec {
  int classes = 3;
  int width = 16;
  int height = 16;
  int bands = 8;
  double noise = 0.05;
  uint64_t seed = 0;
  std::string layout = "voronoi";  // or "blocks"
  // optional explicit per-class spectral signatures [classes][bands];
  // empty means random Gaussian signatures
  std::vector<std::vector<double>> signatures;
};

// Deterministic synthetic scene: spatial class regions with per-class
// spectral signatures plus i.i.d. Gaussian noise.
std::pair<HsiCube, LabelMap> synth_cube(const SynthSpec& spec);

}  // namespace sscl

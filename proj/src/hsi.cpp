#include "sscl/hsi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sscl/binio.hpp"
#include "sscl/rng.hpp"

namespace sscl {

int LabelMap::max_label() const {
  uint16_t m = 0;
  for (uint16_t l : labels) m = std::max(m, l);
  return m;
}

namespace {

constexpr char kCubeMagic[4] = {'H', 'S', 'I', 'C'};
constexpr char kLabelMagic[4] = {'H', 'S', 'I', 'L'};
constexpr uint32_t kFormatVersion = 1;

// Validates magic + trailing CRC-32 (computed over everything after the
// magic), then hands back a reader over the protected region.
std::vector<uint8_t> read_checked(const std::string& path, const char magic[4], const char* what) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), magic, 4) != 0) {
    throw std::runtime_error(std::string(what) + " " + path + ": bad magic");
  }
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  if (crc32(bytes.data() + 4, bytes.size() - 8) != stored) {
    throw std::runtime_error(std::string(what) + " " + path + ": checksum mismatch");
  }
  return bytes;
}

}  // namespace

HsiCube load_cube(const std::string& path) {
  std::vector<uint8_t> bytes = read_checked(path, kCubeMagic, "cube");
  ByteReader r(bytes.data() + 4, bytes.size() - 8);
  if (r.u32() != kFormatVersion) throw std::runtime_error("cube " + path + ": unsupported version");
  HsiCube cube;
  cube.width = static_cast<int>(r.u32());
  cube.height = static_cast<int>(r.u32());
  cube.bands = static_cast<int>(r.u32());
  if (cube.width <= 0 || cube.height <= 0 || cube.bands <= 0) {
    throw std::runtime_error("cube " + path + ": non-positive extents");
  }
  size_t n = static_cast<size_t>(cube.width) * cube.height * cube.bands;
  if (r.remaining() != n * 8) throw std::runtime_error("cube " + path + ": truncated payload");
  cube.values.resize(n);
  for (size_t i = 0; i < n; ++i) cube.values[i] = r.f64();
  return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) {
  ByteWriter w;
  w.raw(kCubeMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(cube.width));
  w.u32(static_cast<uint32_t>(cube.height));
  w.u32(static_cast<uint32_t>(cube.bands));
  for (double v : cube.values) w.f64(v);
  w.u32(crc32(w.bytes.data() + 4, w.bytes.size() - 4));
  write_file_atomic(path, w.bytes);
}

LabelMap load_labels(const std::string& path) {
  std::vector<uint8_t> bytes = read_checked(path, kLabelMagic, "labels");
  ByteReader r(bytes.data() + 4, bytes.size() - 8);
  if (r.u32() != kFormatVersion) throw std::runtime_error("labels " + path + ": unsupported version");
  LabelMap m;
  m.width = static_cast<int>(r.u32());
  m.height = static_cast<int>(r.u32());
  if (m.width <= 0 || m.height <= 0) throw std::runtime_error("labels " + path + ": non-positive extents");
  size_t n = static_cast<size_t>(m.width) * m.height;
  if (r.remaining() != n * 2) throw std::runtime_error("labels " + path + ": truncated payload");
  m.labels.resize(n);
  for (size_t i = 0; i < n; ++i) m.labels[i] = r.u16();
  return m;
}

void save_labels(const LabelMap& labels, const std::string& path) {
  ByteWriter w;
  w.raw(kLabelMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(labels.width));
  w.u32(static_cast<uint32_t>(labels.height));
  for (uint16_t l : labels.labels) w.u16(l);
  w.u32(crc32(w.bytes.data() + 4, w.bytes.size() - 4));
  write_file_atomic(path, w.bytes);
}

void require_matching_raster(const HsiCube& cube, const LabelMap& labels) {
  if (cube.width != labels.width || cube.height != labels.height) {
    throw std::runtime_error("label raster " + std::to_string(labels.width) + "x" +
                             std::to_string(labels.height) + " does not match cube " +
                             std::to_string(cube.width) + "x" + std::to_string(cube.height));
  }
}

HsiCube normalize(const HsiCube& cube) {
  HsiCube out = cube;
  const size_t pixels = cube.pixel_count();
  for (int b = 0; b < cube.bands; ++b) {
    double* band = out.values.data() + static_cast<size_t>(b) * pixels;
    double mean = 0.0;
    for (size_t i = 0; i < pixels; ++i) mean += band[i];
    mean /= static_cast<double>(pixels);
    double var = 0.0;
    for (size_t i = 0; i < pixels; ++i) {
      band[i] -= mean;
      var += band[i] * band[i];
    }
    var /= static_cast<double>(pixels);
    if (var > 0.0) {
      double inv = 1.0 / std::sqrt(var);
      for (size_t i = 0; i < pixels; ++i) band[i] *= inv;
    }
  }
  return out;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues in `diag` and eigenvectors as columns of `vecs`.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& diag,
                  std::vector<double>& vecs) {
  vecs.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vecs[static_cast<size_t>(i) * n + i] = 1.0;

  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += a[i] * a[i];
  // stop once the off-diagonal norm falls below 1e-12 of the matrix norm
  const double tol = 1e-24 * std::max(total, 1e-300);

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double v = a[static_cast<size_t>(p) * n + q];
        off += 2.0 * v * v;
      }
    }
    if (off <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a[static_cast<size_t>(p) * n + q];
        if (apq == 0.0) continue;
        double app = a[static_cast<size_t>(p) * n + p];
        double aqq = a[static_cast<size_t>(q) * n + q];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[static_cast<size_t>(k) * n + p];
          double akq = a[static_cast<size_t>(k) * n + q];
          a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[static_cast<size_t>(p) * n + k];
          double aqk = a[static_cast<size_t>(q) * n + k];
          a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = vecs[static_cast<size_t>(k) * n + p];
          double vkq = vecs[static_cast<size_t>(k) * n + q];
          vecs[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
          vecs[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  diag.resize(n);
  for (int i = 0; i < n; ++i) diag[i] = a[static_cast<size_t>(i) * n + i];
}

}  // namespace

PcaModel pca_fit(const HsiCube& cube, int components) {
  const int d = cube.bands;
  if (components < 1 || components > d) {
    throw std::invalid_argument("pca: components must be in [1," + std::to_string(d) + "]");
  }
  const size_t pixels = cube.pixel_count();
  if (pixels < 2) throw std::invalid_argument("pca: need at least 2 pixels");

  PcaModel model;
  model.bands = d;
  model.components = components;
  model.mean.assign(d, 0.0);
  for (int b = 0; b < d; ++b) {
    const double* band = cube.values.data() + static_cast<size_t>(b) * pixels;
    double m = 0.0;
    for (size_t i = 0; i < pixels; ++i) m += band[i];
    model.mean[b] = m / static_cast<double>(pixels);
  }

  // sample covariance of the centered bands
  std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
  for (int b1 = 0; b1 < d; ++b1) {
    const double* band1 = cube.values.data() + static_cast<size_t>(b1) * pixels;
    for (int b2 = b1; b2 < d; ++b2) {
      const double* band2 = cube.values.data() + static_cast<size_t>(b2) * pixels;
      double acc = 0.0;
      for (size_t i = 0; i < pixels; ++i) {
        acc += (band1[i] - model.mean[b1]) * (band2[i] - model.mean[b2]);
      }
      acc /= static_cast<double>(pixels - 1);
      cov[static_cast<size_t>(b1) * d + b2] = acc;
      cov[static_cast<size_t>(b2) * d + b1] = acc;
    }
  }
  double total_var = 0.0;
  for (int b = 0; b < d; ++b) total_var += cov[static_cast<size_t>(b) * d + b];
  if (total_var <= 0.0) throw std::invalid_argument("pca: zero total variance");

  std::vector<double> diag, vecs;
  jacobi_eigen(cov, d, diag, vecs);

  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return diag[a] > diag[b]; });

  model.eigenvalues.resize(d);
  model.basis.assign(static_cast<size_t>(d) * components, 0.0);
  for (int k = 0; k < d; ++k) model.eigenvalues[k] = diag[order[k]];
  for (int k = 0; k < components; ++k) {
    const int col = order[k];
    // sign convention: largest-magnitude loading positive
    int arg = 0;
    double best = 0.0;
    for (int b = 0; b < d; ++b) {
      double v = std::fabs(vecs[static_cast<size_t>(b) * d + col]);
      if (v > best) {
        best = v;
        arg = b;
      }
    }
    double flip = vecs[static_cast<size_t>(arg) * d + col] < 0.0 ? -1.0 : 1.0;
    for (int b = 0; b < d; ++b) {
      model.basis[static_cast<size_t>(b) * components + k] =
          flip * vecs[static_cast<size_t>(b) * d + col];
    }
  }
  return model;
}

HsiCube pca_apply(const PcaModel& model, const HsiCube& cube) {
  if (cube.bands != model.bands) {
    throw std::invalid_argument("pca: cube bands " + std::to_string(cube.bands) +
                                " do not match model bands " + std::to_string(model.bands));
  }
  const size_t pixels = cube.pixel_count();
  HsiCube out;
  out.width = cube.width;
  out.height = cube.height;
  out.bands = model.components;
  out.values.assign(pixels * model.components, 0.0);
  for (size_t i = 0; i < pixels; ++i) {
    for (int k = 0; k < model.components; ++k) {
      double acc = 0.0;
      for (int b = 0; b < model.bands; ++b) {
        acc += (cube.values[static_cast<size_t>(b) * pixels + i] - model.mean[b]) *
               model.basis[static_cast<size_t>(b) * model.components + k];
      }
      out.values[static_cast<size_t>(k) * pixels + i] = acc;
    }
  }
  return out;
}

HsiCube pca_reduce(const HsiCube& cube, int components) {
  return pca_apply(pca_fit(cube, components), cube);
}

namespace {
// reflect-101 mirror: index -1 maps to 1, index n maps to n-2
int mirror_index(int p, int n) {
  if (n == 1) return 0;
  while (p < 0 || p >= n) {
    if (p < 0) p = -p;
    if (p >= n) p = 2 * n - 2 - p;
  }
  return p;
}
}  // namespace

PatchBatch extract_patches(const HsiCube& cube, const LabelMap& labels,
                           const std::vector<std::pair<int, int>>& coords, int window) {
  require_matching_raster(cube, labels);
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("patch window must be odd, got " + std::to_string(window));
  }
  const int half = window / 2;
  const int k = cube.bands;

  PatchBatch batch;
  batch.window = window;
  batch.components = k;
  batch.patches.reserve(coords.size());
  batch.labels.reserve(coords.size());
  batch.coords = coords;

  for (const auto& [row, col] : coords) {
    if (row < 0 || row >= cube.height || col < 0 || col >= cube.width) {
      throw std::invalid_argument("patch coordinate (" + std::to_string(row) + "," +
                                  std::to_string(col) + ") outside raster");
    }
    Tensor patch({window, window, k});
    for (int dy = -half; dy <= half; ++dy) {
      const int sy = mirror_index(row + dy, cube.height);
      for (int dx = -half; dx <= half; ++dx) {
        const int sx = mirror_index(col + dx, cube.width);
        for (int b = 0; b < k; ++b) {
          patch[((static_cast<int64_t>(dy + half) * window) + (dx + half)) * k + b] = cube.at(b, sy, sx);
        }
      }
    }
    batch.patches.push_back(std::move(patch));
    batch.labels.push_back(labels.at(row, col));
  }
  return batch;
}

std::vector<std::pair<int, int>> SplitManifest::train_coords() const {
  std::vector<std::pair<int, int>> out;
  for (const SplitRow& r : rows) {
    if (r.train) out.emplace_back(r.row, r.col);
  }
  return out;
}

std::vector<std::pair<int, int>> SplitManifest::test_coords() const {
  std::vector<std::pair<int, int>> out;
  for (const SplitRow& r : rows) {
    if (!r.train) out.emplace_back(r.row, r.col);
  }
  return out;
}

SplitManifest stratified_split(const LabelMap& labels, const SplitPolicy& policy, uint64_t seed) {
  std::map<int, std::vector<std::pair<int, int>>> by_class;
  for (int row = 0; row < labels.height; ++row) {
    for (int col = 0; col < labels.width; ++col) {
      int cls = labels.at(row, col);
      if (cls > 0) by_class[cls].emplace_back(row, col);
    }
  }
  if (by_class.size() < 2) throw std::invalid_argument("split: need at least 2 labeled classes");

  SplitManifest m;
  m.seed = seed;
  if (policy.kind == SplitPolicy::Kind::fraction) {
    if (policy.fraction <= 0.0 || policy.fraction >= 1.0) {
      throw std::invalid_argument("split: fraction must be in (0,1)");
    }
    m.policy = "fraction=" + std::to_string(policy.fraction);
  } else {
    if (policy.per_class < 1) throw std::invalid_argument("split: per_class must be >= 1");
    m.policy = "per_class=" + std::to_string(policy.per_class);
  }

  Rng rng(seed);
  for (auto& [cls, coords] : by_class) {
    rng.shuffle(coords);
    int take;
    if (policy.kind == SplitPolicy::Kind::fraction) {
      take = static_cast<int>(std::lround(policy.fraction * static_cast<double>(coords.size())));
      take = std::clamp<int>(take, 1, static_cast<int>(coords.size()));
    } else {
      take = policy.per_class;
      if (take >= static_cast<int>(coords.size())) {
        take = std::max(1, static_cast<int>(coords.size()) - 1);
      }
    }
    for (size_t i = 0; i < coords.size(); ++i) {
      m.rows.push_back(SplitRow{cls, coords[i].first, coords[i].second, i < static_cast<size_t>(take)});
    }
  }
  return m;
}

void save_manifest(const SplitManifest& m, const std::string& path) {
  std::ostringstream os;
  os << "# split manifest v1\n";
  os << "seed " << m.seed << "\n";
  os << "policy " << m.policy << "\n";
  for (const SplitRow& r : m.rows) {
    os << r.cls << "," << r.row << "," << r.col << "," << (r.train ? "train" : "test") << "\n";
  }
  write_text_atomic(path, os.str());
}

SplitManifest load_manifest(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  std::istringstream is(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(is, line) || line.rfind("# split manifest", 0) != 0) {
    throw std::runtime_error("manifest " + path + ": bad header");
  }
  SplitManifest m;
  std::string word;
  if (!(is >> word >> m.seed) || word != "seed") throw std::runtime_error("manifest " + path + ": missing seed");
  if (!(is >> word >> m.policy) || word != "policy") throw std::runtime_error("manifest " + path + ": missing policy");
  std::getline(is, line);
  int lineno = 3;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    SplitRow r;
    char c1, c2, c3;
    std::string split;
    std::istringstream ls(line);
    if (!(ls >> r.cls >> c1 >> r.row >> c2 >> r.col >> c3) || c1 != ',' || c2 != ',' || c3 != ',' ||
        !std::getline(ls, split)) {
      throw std::runtime_error("manifest " + path + ": malformed row at line " + std::to_string(lineno));
    }
    if (split != "train" && split != "test") {
      throw std::runtime_error("manifest " + path + ": bad split tag at line " + std::to_string(lineno));
    }
    r.train = split == "train";
    m.rows.push_back(r);
  }
  if (m.rows.empty()) throw std::runtime_error("manifest " + path + ": no rows");
  return m;
}

std::pair<HsiCube, LabelMap> synth_cube(const SynthSpec& spec) {
  if (spec.classes < 2 || spec.width < 1 || spec.height < 1 || spec.bands < 1) {
    throw std::invalid_argument("synth: invalid extents");
  }
  if (!spec.signatures.empty()) {
    if (static_cast<int>(spec.signatures.size()) != spec.classes) {
      throw std::invalid_argument("synth: need one signature per class");
    }
    for (const auto& sig : spec.signatures) {
      if (static_cast<int>(sig.size()) != spec.bands) {
        throw std::invalid_argument("synth: signature length must equal bands");
      }
    }
  }

  Rng rng(spec.seed);
  std::vector<std::vector<double>> sig = spec.signatures;
  if (sig.empty()) {
    sig.assign(spec.classes, std::vector<double>(spec.bands));
    for (auto& s : sig) {
      for (double& v : s) v = rng.normal();
    }
  }

  LabelMap labels;
  labels.width = spec.width;
  labels.height = spec.height;
  labels.labels.assign(static_cast<size_t>(spec.width) * spec.height, 0);

  if (spec.layout == "blocks") {
    if (spec.width < spec.classes) {
      throw std::invalid_argument("synth: block layout needs width >= classes");
    }
    // vertical stripes of equal width
    for (int row = 0; row < spec.height; ++row) {
      for (int col = 0; col < spec.width; ++col) {
        labels.at(row, col) = static_cast<uint16_t>(col * spec.classes / spec.width + 1);
      }
    }
  } else if (spec.layout == "voronoi") {
    if (static_cast<int64_t>(spec.width) * spec.height < spec.classes) {
      throw std::invalid_argument("synth: raster too small for the class count");
    }
    std::vector<std::pair<int, int>> sites;
    while (static_cast<int>(sites.size()) < spec.classes) {
      std::pair<int, int> s{static_cast<int>(rng.below(spec.height)),
                            static_cast<int>(rng.below(spec.width))};
      if (std::find(sites.begin(), sites.end(), s) == sites.end()) sites.push_back(s);
    }
    for (int row = 0; row < spec.height; ++row) {
      for (int col = 0; col < spec.width; ++col) {
        int best = 0;
        int64_t best_d = INT64_MAX;
        for (int c = 0; c < spec.classes; ++c) {
          int64_t dr = row - sites[c].first;
          int64_t dc = col - sites[c].second;
          int64_t d = dr * dr + dc * dc;
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        labels.at(row, col) = static_cast<uint16_t>(best + 1);
      }
    }
  } else {
    throw std::invalid_argument("synth: unknown layout " + spec.layout);
  }

  HsiCube cube;
  cube.width = spec.width;
  cube.height = spec.height;
  cube.bands = spec.bands;
  cube.values.assign(static_cast<size_t>(spec.width) * spec.height * spec.bands, 0.0);
  for (int row = 0; row < spec.height; ++row) {
    for (int col = 0; col < spec.width; ++col) {
      const auto& s = sig[labels.at(row, col) - 1];
      for (int b = 0; b < spec.bands; ++b) {
        cube.at(b, row, col) = s[b] + (spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0);
      }
    }
  }
  return {std::move(cube), std::move(labels)};
}

}  // namespace sscl

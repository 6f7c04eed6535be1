#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "sscl/binio.hpp"
#include "sscl/hsi.hpp"
#include "sscl/rng.hpp"

using namespace sscl;

namespace {

HsiCube random_cube(int w, int h, int d, uint64_t seed) {
  Rng rng(seed);
  HsiCube cube;
  cube.width = w;
  cube.height = h;
  cube.bands = d;
  cube.values.resize(static_cast<size_t>(w) * h * d);
  for (double& v : cube.values) v = rng.normal();
  return cube;
}

// Independent eigensolver for the PCA oracle: power iteration with deflation
// on the explicitly assembled covariance matrix.
struct PowerPca {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // [k][band]
  std::vector<double> eigenvalues;
};

PowerPca power_pca(const HsiCube& cube, int k) {
  const int d = cube.bands;
  const size_t n = cube.pixel_count();
  PowerPca out;
  out.mean.assign(d, 0.0);
  for (int b = 0; b < d; ++b) {
    for (size_t i = 0; i < n; ++i) out.mean[b] += cube.values[static_cast<size_t>(b) * n + i];
    out.mean[b] /= static_cast<double>(n);
  }
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += (cube.values[static_cast<size_t>(a) * n + i] - out.mean[a]) *
               (cube.values[static_cast<size_t>(b) * n + i] - out.mean[b]);
      }
      cov[a][b] = acc / static_cast<double>(n - 1);
    }
  }
  Rng rng(20240229);
  for (int comp = 0; comp < k; ++comp) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    double lambda = 0.0;
    for (int iter = 0; iter < 20000; ++iter) {
      std::vector<double> next(d, 0.0);
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) next[a] += cov[a][b] * v[b];
      }
      double norm = 0.0;
      for (double x : next) norm += x * x;
      norm = std::sqrt(norm);
      for (int a = 0; a < d; ++a) next[a] /= norm;
      double delta = 0.0;
      for (int a = 0; a < d; ++a) delta = std::max(delta, std::fabs(next[a] - v[a]));
      v = next;
      lambda = norm;
      if (delta < 1e-14 && iter > 10) break;
    }
    // deflate
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) cov[a][b] -= lambda * v[a] * v[b];
    }
    out.components.push_back(v);
    out.eigenvalues.push_back(lambda);
  }
  return out;
}

}  // namespace

TEST_CASE("cube file round trip is byte identical") {
  HsiCube cube;
  cube.width = 2;
  cube.height = 2;
  cube.bands = 1;
  cube.values = {1.0, 2.0, 3.0, 4.0};
  save_cube(cube, "t_cube.hsic");
  HsiCube back = load_cube("t_cube.hsic");
  CHECK(back.width == 2);
  CHECK(back.values == cube.values);

  save_cube(back, "t_cube2.hsic");
  std::vector<uint8_t> a = read_file("t_cube.hsic");
  std::vector<uint8_t> b = read_file("t_cube2.hsic");
  CHECK(a == b);
  std::remove("t_cube.hsic");
  std::remove("t_cube2.hsic");
}

TEST_CASE("label raster mismatch is rejected") {
  HsiCube cube = random_cube(4, 3, 2, 1);
  LabelMap labels;
  labels.width = 3;
  labels.height = 3;
  labels.labels.assign(9, 1);
  CHECK_THROWS_AS(require_matching_raster(cube, labels), std::runtime_error);
}

TEST_CASE("readers reject single-byte corruption") {
  HsiCube cube = random_cube(3, 3, 2, 2);
  save_cube(cube, "t_corrupt.hsic");
  std::vector<uint8_t> bytes = read_file("t_corrupt.hsic");
  Rng rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<uint8_t> mutated = bytes;
    size_t pos = static_cast<size_t>(rng.below(mutated.size()));
    mutated[pos] = static_cast<uint8_t>(mutated[pos] + 1 + rng.below(254));
    write_file_atomic("t_corrupt.hsic", mutated);
    CHECK_THROWS_AS(load_cube("t_corrupt.hsic"), std::runtime_error);
  }
  std::remove("t_corrupt.hsic");
}

TEST_CASE("normalize centers and scales every band") {
  HsiCube cube = random_cube(5, 4, 3, 4);
  for (size_t i = 0; i < cube.pixel_count(); ++i) cube.values[i] = 7.5;  // constant band 0
  HsiCube out = normalize(cube);
  const size_t n = out.pixel_count();
  for (int b = 0; b < out.bands; ++b) {
    double mean = 0.0, var = 0.0;
    for (size_t i = 0; i < n; ++i) mean += out.values[static_cast<size_t>(b) * n + i];
    mean /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      double d = out.values[static_cast<size_t>(b) * n + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    CHECK(std::fabs(mean) < 1e-9);
    if (b == 0) {
      CHECK(var == 0.0);  // constant band passes through centered
    } else {
      CHECK(std::fabs(var - 1.0) < 1e-9);
    }
  }
  HsiCube again = normalize(out);
  for (size_t i = 0; i < out.values.size(); ++i) CHECK(std::fabs(again.values[i] - out.values[i]) < 1e-9);
}

TEST_CASE("pca with K=D preserves total variance and reconstructs") {
  HsiCube cube = random_cube(6, 5, 4, 5);
  PcaModel model = pca_fit(cube, 4);
  HsiCube proj = pca_apply(model, cube);

  const size_t n = cube.pixel_count();
  double var_in = 0.0, var_out = 0.0;
  for (int b = 0; b < 4; ++b) {
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += cube.values[static_cast<size_t>(b) * n + i];
    mean /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      double d = cube.values[static_cast<size_t>(b) * n + i] - mean;
      var_in += d * d / static_cast<double>(n - 1);
    }
    for (size_t i = 0; i < n; ++i) {
      double d = proj.values[static_cast<size_t>(b) * n + i];
      var_out += d * d / static_cast<double>(n - 1);
    }
  }
  CHECK(var_in == doctest::Approx(var_out).epsilon(1e-9));

  // reconstruction through the full basis returns the centered data
  for (size_t i = 0; i < n; ++i) {
    for (int b = 0; b < 4; ++b) {
      double rec = model.mean[b];
      for (int k = 0; k < 4; ++k) {
        rec += proj.values[static_cast<size_t>(k) * n + i] * model.basis[static_cast<size_t>(b) * 4 + k];
      }
      CHECK(rec == doctest::Approx(cube.values[static_cast<size_t>(b) * n + i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("pca on rank-1 data puts all variance in the first component") {
  HsiCube cube;
  cube.width = 4;
  cube.height = 3;
  cube.bands = 2;
  cube.values.resize(24);
  Rng rng(6);
  const size_t n = cube.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    double v = rng.normal();
    cube.values[i] = v;
    cube.values[n + i] = 2.0 * v;
  }
  PcaModel model = pca_fit(cube, 2);
  CHECK(model.eigenvalues[0] > 0.0);
  CHECK(std::fabs(model.eigenvalues[1]) < 1e-9);
}

TEST_CASE("pca matches the independent power-iteration oracle on an 8x8x6 cube") {
  HsiCube cube = random_cube(8, 8, 6, 7);
  const int k = 3;
  PcaModel model = pca_fit(cube, k);
  PowerPca ref = power_pca(cube, k);

  for (int c = 0; c < k; ++c) {
    CHECK(model.eigenvalues[c] == doctest::Approx(ref.eigenvalues[c]).epsilon(1e-8));
    // align the oracle's sign with the library convention
    int arg = 0;
    double best = 0.0;
    for (int b = 0; b < 6; ++b) {
      if (std::fabs(ref.components[c][b]) > best) {
        best = std::fabs(ref.components[c][b]);
        arg = b;
      }
    }
    double flip = ref.components[c][arg] < 0.0 ? -1.0 : 1.0;
    for (int b = 0; b < 6; ++b) {
      CHECK(model.basis[static_cast<size_t>(b) * k + c] ==
            doctest::Approx(flip * ref.components[c][b]).epsilon(1e-7));
    }
  }
}

TEST_CASE("pca component variances equal eigenvalues and components are orthogonal") {
  HsiCube cube = random_cube(7, 6, 5, 8);
  const int k = 4;
  PcaModel model = pca_fit(cube, k);
  HsiCube proj = pca_apply(model, cube);
  const size_t n = proj.pixel_count();
  for (int a = 0; a < k; ++a) {
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double v = proj.values[static_cast<size_t>(a) * n + i];
      var += v * v;
    }
    var /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(model.eigenvalues[a]).epsilon(1e-8));
    for (int b = a + 1; b < k; ++b) {
      double cross = 0.0;
      for (size_t i = 0; i < n; ++i) {
        cross += proj.values[static_cast<size_t>(a) * n + i] * proj.values[static_cast<size_t>(b) * n + i];
      }
      CHECK(std::fabs(cross / static_cast<double>(n - 1)) < 1e-8);
    }
  }
  CHECK_THROWS_AS(pca_fit(cube, 6), std::invalid_argument);
}

TEST_CASE("patch extraction mirrors at the borders") {
  HsiCube cube = random_cube(5, 5, 2, 9);
  LabelMap labels;
  labels.width = 5;
  labels.height = 5;
  labels.labels.assign(25, 1);

  PatchBatch corner = extract_patches(cube, labels, {{0, 0}}, 3);
  const Tensor& p = corner.patches[0];
  // window cell (-1,-1) mirrors to cube cell (1,1)
  CHECK(p[0 * 2 + 0] == cube.at(0, 1, 1));
  CHECK(p[(0 * 3 + 1) * 2] == cube.at(0, 1, 0));
  CHECK(p[(1 * 3 + 1) * 2] == cube.at(0, 0, 0));

  PatchBatch interior = extract_patches(cube, labels, {{2, 2}}, 3);
  for (int dy = 0; dy < 3; ++dy) {
    for (int dx = 0; dx < 3; ++dx) {
      for (int b = 0; b < 2; ++b) {
        CHECK(interior.patches[0][(static_cast<int64_t>(dy) * 3 + dx) * 2 + b] ==
              cube.at(b, 1 + dy, 1 + dx));
      }
    }
  }

  CHECK_THROWS_AS(extract_patches(cube, labels, {{0, 0}}, 4), std::invalid_argument);
  CHECK_THROWS_AS(extract_patches(cube, labels, {{9, 0}}, 3), std::invalid_argument);
}

TEST_CASE("patch extraction covers every coordinate of a full sweep") {
  HsiCube cube = random_cube(5, 5, 3, 10);
  LabelMap labels;
  labels.width = 5;
  labels.height = 5;
  labels.labels.assign(25, 2);
  std::vector<std::pair<int, int>> coords;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) coords.emplace_back(r, c);
  }
  PatchBatch batch = extract_patches(cube, labels, coords, 5);
  CHECK(batch.patches.size() == 25);
  for (const Tensor& t : batch.patches) CHECK(t.shape() == std::vector<int>{5, 5, 3});
}

TEST_CASE("stratified split honors per-class counts and stays reproducible") {
  LabelMap labels;
  labels.width = 40;
  labels.height = 40;
  labels.labels.assign(1600, 0);
  Rng rng(11);
  // 16 classes, 60+ pixels each
  for (int cls = 1; cls <= 16; ++cls) {
    int placed = 0;
    while (placed < 60) {
      size_t pos = static_cast<size_t>(rng.below(1600));
      if (labels.labels[pos] == 0) {
        labels.labels[pos] = static_cast<uint16_t>(cls);
        ++placed;
      }
    }
  }

  SplitPolicy policy;
  policy.kind = SplitPolicy::Kind::per_class;
  policy.per_class = 10;
  SplitManifest m = stratified_split(labels, policy, 99);
  CHECK(m.train_coords().size() == 160);

  std::map<int, int> train_per_class;
  std::set<std::pair<int, int>> seen;
  for (const SplitRow& r : m.rows) {
    if (r.train) ++train_per_class[r.cls];
    CHECK(seen.insert({r.row, r.col}).second);  // disjoint coverage
  }
  CHECK(seen.size() == 960);  // 16 classes x 60 pixels all covered
  for (auto& [cls, count] : train_per_class) CHECK(count == 10);

  SplitManifest again = stratified_split(labels, policy, 99);
  REQUIRE(again.rows.size() == m.rows.size());
  for (size_t i = 0; i < m.rows.size(); ++i) {
    CHECK(again.rows[i].row == m.rows[i].row);
    CHECK(again.rows[i].col == m.rows[i].col);
    CHECK(again.rows[i].train == m.rows[i].train);
  }
}

TEST_CASE("fraction split rounds half away from zero like the published counts") {
  // class sizes from the Indian Pines table; 10% training
  const std::vector<std::pair<int, int>> counts = {
      {46, 5},    {1428, 143}, {830, 83},  {237, 24},  {483, 48},  {730, 73},
      {28, 3},    {478, 48},   {20, 2},    {972, 97},  {2455, 246}, {593, 59},
      {205, 21},  {1265, 127}, {386, 39},  {93, 9}};
  LabelMap labels;
  labels.width = 120;
  labels.height = 90;
  labels.labels.assign(static_cast<size_t>(120) * 90, 0);
  size_t pos = 0;
  for (size_t cls = 0; cls < counts.size(); ++cls) {
    for (int i = 0; i < counts[cls].first; ++i) labels.labels[pos++] = static_cast<uint16_t>(cls + 1);
  }
  REQUIRE(pos <= labels.labels.size());

  SplitPolicy policy;
  policy.kind = SplitPolicy::Kind::fraction;
  policy.fraction = 0.10;
  SplitManifest m = stratified_split(labels, policy, 1);
  std::map<int, int> train_per_class;
  for (const SplitRow& r : m.rows) {
    if (r.train) ++train_per_class[r.cls];
  }
  int total = 0;
  for (size_t cls = 0; cls < counts.size(); ++cls) {
    CHECK(train_per_class[static_cast<int>(cls) + 1] == counts[cls].second);
    total += counts[cls].second;
  }
  CHECK(total == 1027);
}

TEST_CASE("per-class request larger than the class keeps one test sample") {
  LabelMap labels;
  labels.width = 10;
  labels.height = 1;
  labels.labels = {1, 1, 1, 1, 1, 1, 1, 1, 2, 2};
  SplitPolicy policy;
  policy.kind = SplitPolicy::Kind::per_class;
  policy.per_class = 5;
  SplitManifest m = stratified_split(labels, policy, 3);
  int train2 = 0, test2 = 0;
  for (const SplitRow& r : m.rows) {
    if (r.cls == 2) (r.train ? train2 : test2)++;
  }
  CHECK(train2 == 1);
  CHECK(test2 == 1);
}

TEST_CASE("manifest text round trip") {
  LabelMap labels;
  labels.width = 6;
  labels.height = 6;
  labels.labels.assign(36, 0);
  for (int i = 0; i < 12; ++i) labels.labels[i] = 1;
  for (int i = 12; i < 24; ++i) labels.labels[i] = 2;
  SplitPolicy policy;
  policy.kind = SplitPolicy::Kind::per_class;
  policy.per_class = 4;
  SplitManifest m = stratified_split(labels, policy, 5);
  save_manifest(m, "t_manifest.txt");
  SplitManifest back = load_manifest("t_manifest.txt");
  CHECK(back.seed == m.seed);
  CHECK(back.policy == m.policy);
  REQUIRE(back.rows.size() == m.rows.size());
  for (size_t i = 0; i < m.rows.size(); ++i) {
    CHECK(back.rows[i].cls == m.rows[i].cls);
    CHECK(back.rows[i].train == m.rows[i].train);
  }
  std::remove("t_manifest.txt");
}

TEST_CASE("synthetic scenes are deterministic and exactly separable without noise") {
  SynthSpec spec;
  spec.classes = 3;
  spec.width = 16;
  spec.height = 16;
  spec.bands = 8;
  spec.noise = 0.0;
  spec.seed = 77;
  auto [cube, labels] = synth_cube(spec);

  std::set<int> present;
  for (uint16_t l : labels.labels) present.insert(l);
  CHECK(present == std::set<int>{1, 2, 3});

  // noise-free pixels match their class signature exactly, so a
  // nearest-signature rule classifies perfectly
  std::map<int, std::vector<double>> signature;
  for (int row = 0; row < 16; ++row) {
    for (int col = 0; col < 16; ++col) {
      int cls = labels.at(row, col);
      auto it = signature.find(cls);
      std::vector<double> spectrum(8);
      for (int b = 0; b < 8; ++b) spectrum[b] = cube.at(b, row, col);
      if (it == signature.end()) {
        signature[cls] = spectrum;
      } else {
        CHECK(it->second == spectrum);
      }
    }
  }

  // literal nearest-signature classification over every pixel
  std::vector<std::vector<double>> sigs(3);
  for (auto& [cls, s] : signature) sigs[cls - 1] = s;
  int correct = 0;
  for (int row = 0; row < 16; ++row) {
    for (int col = 0; col < 16; ++col) {
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < 3; ++c) {
        double d = 0.0;
        for (int b = 0; b < 8; ++b) {
          double diff = cube.at(b, row, col) - sigs[c][b];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = c + 1;
        }
      }
      if (best == labels.at(row, col)) ++correct;
    }
  }
  CHECK(correct == 16 * 16);

  auto [cube2, labels2] = synth_cube(spec);
  CHECK(cube2.values == cube.values);
  CHECK(labels2.labels == labels.labels);
}

TEST_CASE("patch extraction is translation consistent away from borders") {
  HsiCube cube = random_cube(9, 9, 2, 21);
  LabelMap labels;
  labels.width = 9;
  labels.height = 9;
  labels.labels.assign(81, 1);

  // shift the cube contents by (1,1) and the coordinate along with it
  HsiCube shifted = cube;
  for (int b = 0; b < 2; ++b) {
    for (int row = 8; row >= 1; --row) {
      for (int col = 8; col >= 1; --col) shifted.at(b, row, col) = cube.at(b, row - 1, col - 1);
    }
  }
  PatchBatch a = extract_patches(cube, labels, {{3, 3}}, 3);
  PatchBatch b = extract_patches(shifted, labels, {{4, 4}}, 3);
  CHECK(a.patches[0].values() == b.patches[0].values());
}

TEST_CASE("synthetic explicit signatures are honored") {
  SynthSpec spec;
  spec.classes = 2;
  spec.width = 6;
  spec.height = 4;
  spec.bands = 3;
  spec.noise = 0.0;
  spec.layout = "blocks";
  spec.signatures = {{1.0, 0.0, 0.0}, {0.0, 2.0, 0.0}};
  auto [cube, labels] = synth_cube(spec);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 6; ++col) {
      const auto& sig = spec.signatures[labels.at(row, col) - 1];
      for (int b = 0; b < 3; ++b) CHECK(cube.at(b, row, col) == sig[b]);
    }
  }
}

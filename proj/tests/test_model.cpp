#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <map>

#include "sscl/cells.hpp"
#include "sscl/conv.hpp"
#include "sscl/layers.hpp"
#include "sscl/model.hpp"
#include "sscl/rng.hpp"

using namespace sscl;

namespace {

Tensor random_patch(int window, int components, uint64_t seed) {
  Rng rng(seed);
  Tensor t({window, window, components});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

std::vector<std::pair<int, std::vector<int>>> shape_list(const ModelSpec& spec) {
  std::vector<std::pair<int, std::vector<int>>> out;
  for (const LayerShape& s : infer_shapes(spec)) out.emplace_back(s.seq_len, s.shape);
  return out;
}

}  // namespace

TEST_CASE("sscl2dnn shapes walk the table column for K=10, s=27, N=16") {
  ModelSpec spec = build_model_spec(ModelName::sscl2dnn, 10, 27, 16);
  auto shapes = shape_list(spec);
  // input, convlstm, pool, convlstm, pool, dropout, flatten, dense, output
  CHECK(shapes[0] == std::pair<int, std::vector<int>>{10, {27, 27, 1}});
  CHECK(shapes[1] == std::pair<int, std::vector<int>>{10, {27, 27, 32}});
  CHECK(shapes[2] == std::pair<int, std::vector<int>>{10, {14, 14, 32}});
  CHECK(shapes[3] == std::pair<int, std::vector<int>>{1, {14, 14, 64}});
  CHECK(shapes[4] == std::pair<int, std::vector<int>>{1, {7, 7, 64}});
  CHECK(shapes[5] == std::pair<int, std::vector<int>>{1, {7, 7, 64}});
  CHECK(shapes[6] == std::pair<int, std::vector<int>>{1, {3136}});
  CHECK(shapes[7] == std::pair<int, std::vector<int>>{1, {128}});
  CHECK(shapes[8] == std::pair<int, std::vector<int>>{1, {16}});
}

TEST_CASE("sscl3dnn flattens to 9408 for K=10, s=27") {
  ModelSpec spec = build_model_spec(ModelName::sscl3dnn, 10, 27, 9);
  auto shapes = shape_list(spec);
  CHECK(shapes[1] == std::pair<int, std::vector<int>>{1, {10, 27, 27, 32}});
  CHECK(shapes[2] == std::pair<int, std::vector<int>>{1, {5, 14, 14, 32}});
  CHECK(shapes[3] == std::pair<int, std::vector<int>>{1, {5, 14, 14, 64}});
  CHECK(shapes[4] == std::pair<int, std::vector<int>>{1, {3, 7, 7, 64}});
  CHECK(shapes[6] == std::pair<int, std::vector<int>>{1, {9408}});
  CHECK(shapes.back() == std::pair<int, std::vector<int>>{1, {9}});
}

TEST_CASE("sacl2dnn uses the 3x3 then 5x5 kernels and flattens to 3136") {
  ModelSpec spec = build_model_spec(ModelName::sacl2dnn, 1, 27, 16);
  CHECK(spec.layers[0].kernel == std::vector<int>{3, 3});
  CHECK(spec.layers[2].kernel == std::vector<int>{5, 5});
  auto shapes = shape_list(spec);
  CHECK(shapes[6] == std::pair<int, std::vector<int>>{1, {3136}});
}

TEST_CASE("build rejects bad arguments") {
  CHECK_THROWS_AS(build_model_spec(ModelName::sacl2dnn, 10, 27, 16), std::invalid_argument);
  CHECK_THROWS_AS(build_model_spec(ModelName::cnn2d, 3, 27, 16), std::invalid_argument);
  CHECK_THROWS_AS(build_model_spec(ModelName::sscl2dnn, 10, 27, 1), std::invalid_argument);
  CHECK_THROWS_AS(model_name_from_string("vgg16"), std::invalid_argument);
}

TEST_CASE("forward returns probability rows that sum to one") {
  ModelSpec spec = build_model_spec(ModelName::sscl2dnn, 3, 9, 4);
  Model model = Model::init(spec, 3);
  Tensor patch = random_patch(9, 3, 17);
  Tensor probs = model.forward(patch, false, nullptr, nullptr);
  REQUIRE(probs.shape() == std::vector<int>{1, 4});
  double s = 0.0;
  for (int j = 0; j < 4; ++j) {
    CHECK(probs[j] >= 0.0);
    s += probs[j];
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inference is a pure function of parameters and input") {
  ModelSpec spec = build_model_spec(ModelName::sscl3dnn, 3, 9, 4);
  Model model = Model::init(spec, 5);
  Tensor patch = random_patch(9, 3, 19);
  Tensor a = model.forward(patch, false, nullptr, nullptr);
  Tensor b = model.forward(patch, false, nullptr, nullptr);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("untrained sscl2dnn forward equals a layer-by-layer replay") {
  const int window = 9, k = 3, classes = 4;
  ModelSpec spec = build_model_spec(ModelName::sscl2dnn, k, window, classes);
  Model model = Model::init(spec, 23);
  Tensor patch = random_patch(window, k, 29);
  Tensor got = model.forward(patch, false, nullptr, nullptr);

  std::map<std::string, Tensor*> by_name;
  for (auto& [name, t] : model.param_refs()) by_name[name] = t;

  auto cell_params = [&](const std::string& layer, std::vector<int> kernel, int cin, int ch) {
    ConvLstmParams p = make_convlstm_params(2, std::move(kernel), cin, ch, 0);
    p.visit([&](const std::string& n, Tensor& t) { t = *by_name.at(layer + "." + n); });
    return p;
  };

  // band-by-band sequence, exactly as prepare_input defines it
  std::vector<Tensor> seq;
  for (int band = 0; band < k; ++band) {
    Tensor t({window, window, 1});
    for (int y = 0; y < window; ++y) {
      for (int x = 0; x < window; ++x) {
        t[static_cast<int64_t>(y) * window + x] = patch[(static_cast<int64_t>(y) * window + x) * k + band];
      }
    }
    seq.push_back(std::move(t));
  }

  ConvLstmParams p1 = cell_params("convlstm_1", {4, 4}, 1, 32);
  seq = unroll_sequence(seq, convlstm_zero_state(p1, {window, window}), p1, ReturnMode::all_steps);
  for (Tensor& t : seq) t = maxpool_forward(t, {2, 2}, {2, 2}, {PadMode::same_ceil}).output;

  ConvLstmParams p2 = cell_params("convlstm_2", {3, 3}, 32, 64);
  std::vector<int> sp{seq[0].extent(0), seq[0].extent(1)};
  seq = unroll_sequence(seq, convlstm_zero_state(p2, sp), p2, ReturnMode::last_step);
  for (Tensor& t : seq) t = maxpool_forward(t, {2, 2}, {2, 2}, {PadMode::same_ceil}).output;

  Tensor flat({1, static_cast<int>(seq[0].size())}, seq[0].values());
  DenseParams d1{*by_name.at("dense_1.w"), *by_name.at("dense_1.b")};
  Tensor hidden = relu(dense_forward(flat, d1));
  DenseParams d2{*by_name.at("output.w"), *by_name.at("output.b")};
  Tensor want = softmax(dense_forward(hidden, d2));

  REQUIRE(got.shape() == want.shape());
  for (int64_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("checkpoint round trip is bit exact and preserves outputs") {
  ModelSpec spec = build_model_spec(ModelName::sacl2dnn, 1, 9, 3);
  Model model = Model::init(spec, 31);
  Tensor patch = random_patch(9, 1, 37);
  Tensor before = model.forward(patch, false, nullptr, nullptr);

  const std::string path = "test_ckpt_roundtrip.sscp";
  save_checkpoint(checkpoint_from_model(model, 31), path);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.seed == 31);
  Model restored = model_from_checkpoint(loaded);
  Tensor after = restored.forward(patch, false, nullptr, nullptr);
  for (int64_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

  auto ra = model.param_refs();
  auto rb = restored.param_refs();
  for (size_t i = 0; i < ra.size(); ++i) {
    for (int64_t j = 0; j < ra[i].second->size(); ++j) {
      CHECK((*ra[i].second)[j] == (*rb[i].second)[j]);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint reader rejects corruption, truncation, and bad versions") {
  ModelSpec spec = build_model_spec(ModelName::cnn2d, 1, 5, 3);
  Model model = Model::init(spec, 41);
  const std::string path = "test_ckpt_corrupt.sscp";
  save_checkpoint(checkpoint_from_model(model, 41), path);

  std::vector<uint8_t> bytes;
  {
    FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f);
    std::fseek(f, 0, SEEK_END);
    bytes.resize(std::ftell(f));
    std::fseek(f, 0, SEEK_SET);
    REQUIRE(std::fread(bytes.data(), 1, bytes.size(), f) == bytes.size());
    std::fclose(f);
  }

  auto write_variant = [&](const std::vector<uint8_t>& data) {
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(data.data(), 1, data.size(), f);
    std::fclose(f);
  };

  SUBCASE("single byte flips") {
    Rng rng(43);
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<uint8_t> mutated = bytes;
      size_t pos = static_cast<size_t>(rng.below(mutated.size()));
      mutated[pos] = static_cast<uint8_t>(mutated[pos] + 1 + rng.below(254));
      write_variant(mutated);
      CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    }
  }
  SUBCASE("truncation") {
    std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 9);
    write_variant(cut);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("future version") {
    std::vector<uint8_t> futured = bytes;
    futured[4] = 9;  // version field follows the magic
    write_variant(futured);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint refuses a different architecture") {
  ModelSpec cnn = build_model_spec(ModelName::cnn2d, 1, 9, 3);
  Model model = Model::init(cnn, 47);
  Checkpoint c = checkpoint_from_model(model, 47);
  c.spec = build_model_spec(ModelName::sscl3dnn, 3, 9, 3);
  CHECK_THROWS_AS(model_from_checkpoint(c), std::runtime_error);
}

TEST_CASE("model spec json round trip") {
  ModelSpec spec = build_model_spec(ModelName::sscl3dnn, 10, 27, 9, false);
  ModelSpec back = ModelSpec::from_json(spec.to_json());
  CHECK(back.name == spec.name);
  CHECK(back.components == spec.components);
  CHECK(back.window == spec.window);
  CHECK(back.num_classes == spec.num_classes);
  CHECK(back.use_peepholes == spec.use_peepholes);
  CHECK(back.layers.size() == spec.layers.size());
}

TEST_CASE("patch shape mismatch is reported") {
  ModelSpec spec = build_model_spec(ModelName::sscl2dnn, 3, 9, 4);
  Model model = Model::init(spec, 51);
  CHECK_THROWS_AS(model.forward(Tensor({9, 9, 2}), false, nullptr, nullptr), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <filesystem>
#include <fstream>

#include "sscl/binio.hpp"
#include "sscl/commands.hpp"
#include "sscl/hsi.hpp"
#include "sscl/runconfig.hpp"

using namespace sscl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("cli_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

const char* kSynthJson = R"({
  "classes": 3, "width": 12, "height": 12, "bands": 6,
  "noise": 0.05, "seed": 11, "layout": "blocks"
})";

std::string tiny_config(const std::string& cube, const std::string& labels) {
  json j;
  j["cube"] = cube;
  j["labels"] = labels;
  j["model"] = "sscl2dnn";
  j["components"] = 2;
  j["window"] = 3;
  j["split"] = {{"per_class", 6}};
  j["split_seed"] = 2;
  j["schedule"] = {{"epochs", 3}, {"lr", 0.001}, {"batch_size", 8}, {"seed", 5}};
  j["repetitions"] = 1;
  j["deterministic"] = true;
  return j.dump(2);
}

}  // namespace

TEST_CASE("run config applies per-model defaults") {
  RunConfig c = RunConfig::from_json_text(R"({
    "cube": "a.hsic", "labels": "a.hsil", "model": "sscl3dnn",
    "split": {"per_class": 10}, "schedule": {"epochs": 5}
  })");
  CHECK(c.components == 10);
  CHECK(c.window == 27);
  CHECK(c.schedule.lr == 0.0001);
  CHECK(c.schedule.batch_size == 16);
  CHECK(c.deterministic);

  RunConfig spectral = RunConfig::from_json_text(R"({
    "cube": "a.hsic", "labels": "a.hsil", "model": "sscl2dnn",
    "split": {"fraction": 0.1}, "schedule": {"epochs": 5}
  })");
  CHECK(spectral.schedule.lr == 0.001);

  RunConfig spatial = RunConfig::from_json_text(R"({
    "cube": "a.hsic", "labels": "a.hsil", "model": "sacl2dnn",
    "split": {"per_class": 10}, "schedule": {"epochs": 5}
  })");
  CHECK(spatial.components == 1);
}

TEST_CASE("run config names the offending field") {
  auto parse = [](const char* text) { return RunConfig::from_json_text(text); };
  CHECK_THROWS_WITH_AS(parse(R"({"cube":"a","labels":"b","split":{"per_class":1},"schedule":{}})"),
                       doctest::Contains("model"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse(R"({"cube":"a","labels":"b","model":"sacl2dnn","components":10,
                                 "split":{"per_class":1},"schedule":{}})"),
                       doctest::Contains("components"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse(R"({"cube":"a","labels":"b","model":"sscl2dnn","schedule":{}})"),
                       doctest::Contains("split"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse(R"({"cube":"a","labels":"b","model":"sscl2dnn",
                                 "split":{"fraction":1.5},"schedule":{}})"),
                       doctest::Contains("fraction"), std::invalid_argument);
  CHECK_THROWS_AS(parse("{not json"), std::invalid_argument);
}

TEST_CASE("effective config echo re-parses to the same settings") {
  RunConfig c = RunConfig::from_json_text(R"({
    "cube": "a.hsic", "labels": "a.hsil", "model": "sscl2dnn",
    "split": {"per_class": 4}, "schedule": {"epochs": 7, "seed": 3}
  })");
  RunConfig back = RunConfig::from_json_text(c.to_json());
  CHECK(back.model == c.model);
  CHECK(back.components == c.components);
  CHECK(back.schedule.epochs == 7);
  CHECK(back.schedule.lr == c.schedule.lr);
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("synth, preprocess, split, train, evaluate, predict-map chain") {
  TempDir dir("chain");
  write_text(dir.file("synth.json"), kSynthJson);

  REQUIRE(cmd_synth({dir.file("synth.json"), dir.file("data")}) == 0);
  REQUIRE(fs::exists(dir.file("data/cube.hsic")));
  REQUIRE(fs::exists(dir.file("data/labels.hsil")));

  PreprocessArgs pre;
  pre.cube = dir.file("data/cube.hsic");
  pre.labels = dir.file("data/labels.hsil");
  pre.components = 2;
  pre.out = dir.file("reduced.hsic");
  REQUIRE(cmd_preprocess(pre) == 0);
  HsiCube reduced = load_cube(dir.file("reduced.hsic"));
  CHECK(reduced.bands == 2);

  SplitArgs spl;
  spl.labels = dir.file("data/labels.hsil");
  spl.per_class = 6;
  spl.seed = 2;
  spl.out = dir.file("split.txt");
  REQUIRE(cmd_split(spl) == 0);
  SplitManifest manifest = load_manifest(dir.file("split.txt"));
  CHECK(manifest.train_coords().size() == 18);

  write_text(dir.file("config.json"),
             tiny_config(dir.file("reduced.hsic"), dir.file("data/labels.hsil")));
  REQUIRE(cmd_train({dir.file("config.json"), dir.file("run")}) == 0);
  REQUIRE(fs::exists(dir.file("run/checkpoint_0.sscp")));
  REQUIRE(fs::exists(dir.file("run/metrics.json")));
  REQUIRE(fs::exists(dir.file("run/trace_0.jsonl")));
  REQUIRE(fs::exists(dir.file("run/effective_config.json")));

  json metrics = json::parse(std::ifstream(dir.file("run/metrics.json")));
  CHECK(metrics["runs"].size() == 1);
  CHECK(metrics["mean"]["oa"].get<double>() >= 0.0);

  EvaluateArgs eva;
  eva.checkpoints = {dir.file("run/checkpoint_0.sscp")};
  eva.cube = dir.file("reduced.hsic");
  eva.labels = dir.file("data/labels.hsil");
  eva.manifest = dir.file("run/split.txt");
  eva.out_dir = dir.file("eval");
  REQUIRE(cmd_evaluate(eva) == 0);
  json eval_metrics = json::parse(std::ifstream(dir.file("eval/metrics.json")));
  // evaluate reruns the same checkpoint on the same split: identical numbers
  CHECK(eval_metrics["mean"]["oa"] == metrics["mean"]["oa"]);

  PredictMapArgs pmp;
  pmp.checkpoint = dir.file("run/checkpoint_0.sscp");
  pmp.cube = dir.file("reduced.hsic");
  pmp.out_dir = dir.file("maps");
  REQUIRE(cmd_predict_map(pmp) == 0);
  std::vector<uint8_t> ppm = read_file(dir.file("maps/map.ppm"));
  const std::string header = "P6\n12 12\n255\n";
  REQUIRE(ppm.size() == header.size() + 3 * 12 * 12);
  CHECK(std::string(ppm.begin(), ppm.begin() + header.size()) == header);
  LabelMap pred = load_labels(dir.file("maps/pred.hsil"));
  CHECK(pred.max_label() <= 3);
}

TEST_CASE("training twice with one config writes identical bytes") {
  TempDir dir("determinism");
  write_text(dir.file("synth.json"), kSynthJson);
  REQUIRE(cmd_synth({dir.file("synth.json"), dir.file("data")}) == 0);
  write_text(dir.file("config.json"),
             tiny_config(dir.file("data/cube.hsic"), dir.file("data/labels.hsil")));

  REQUIRE(cmd_train({dir.file("config.json"), dir.file("a")}) == 0);
  REQUIRE(cmd_train({dir.file("config.json"), dir.file("b")}) == 0);
  CHECK(read_file(dir.file("a/checkpoint_0.sscp")) == read_file(dir.file("b/checkpoint_0.sscp")));
  CHECK(read_file(dir.file("a/metrics.json")) == read_file(dir.file("b/metrics.json")));
  CHECK(read_file(dir.file("a/trace_0.jsonl")) == read_file(dir.file("b/trace_0.jsonl")));
}

TEST_CASE("evaluate rejects a checkpoint trained for a different class count") {
  TempDir dir("mismatch");
  write_text(dir.file("synth.json"), kSynthJson);
  REQUIRE(cmd_synth({dir.file("synth.json"), dir.file("data")}) == 0);
  write_text(dir.file("config.json"),
             tiny_config(dir.file("data/cube.hsic"), dir.file("data/labels.hsil")));
  REQUIRE(cmd_train({dir.file("config.json"), dir.file("run")}) == 0);

  // a second scene with more classes
  write_text(dir.file("synth5.json"), R"({
    "classes": 5, "width": 12, "height": 12, "bands": 6,
    "noise": 0.05, "seed": 12, "layout": "blocks"})");
  REQUIRE(cmd_synth({dir.file("synth5.json"), dir.file("data5")}) == 0);
  SplitArgs spl;
  spl.labels = dir.file("data5/labels.hsil");
  spl.per_class = 4;
  spl.out = dir.file("split5.txt");
  REQUIRE(cmd_split(spl) == 0);

  EvaluateArgs eva;
  eva.checkpoints = {dir.file("run/checkpoint_0.sscp")};
  eva.cube = dir.file("data5/cube.hsic");
  eva.labels = dir.file("data5/labels.hsil");
  eva.manifest = dir.file("split5.txt");
  eva.out_dir = dir.file("eval");
  CHECK_THROWS_WITH_AS(cmd_evaluate(eva), doctest::Contains("classes"), std::runtime_error);
}

TEST_CASE("gradcheck command passes on a miniature") {
  GradcheckArgs g;
  g.model = "sacl2dnn";
  g.seed = 3;
  g.window = 5;
  g.components = 1;
  g.classes = 3;
  g.samples_per_param = 2;
  CHECK(cmd_gradcheck(g) == 0);
}

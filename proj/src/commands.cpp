#include "sscl/commands.hpp"

#include <json.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "sscl/binio.hpp"
#include "sscl/gradcheck.hpp"
#include "sscl/hsi.hpp"
#include "sscl/metrics.hpp"
#include "sscl/model.hpp"
#include "sscl/optimizer.hpp"
#include "sscl/runconfig.hpp"

namespace sscl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("output directory not set");
  fs::create_directories(dir);
}

// normalize (optional) then reduce to K components; a cube that already has
// exactly K bands passes through untouched.
HsiCube reduce_cube(const HsiCube& cube, int components, bool do_normalize) {
  if (cube.bands == components) return cube;
  if (cube.bands < components) {
    throw std::runtime_error("cube has " + std::to_string(cube.bands) + " bands but the model needs " +
                             std::to_string(components) + " components");
  }
  return pca_reduce(do_normalize ? normalize(cube) : cube, components);
}

struct RunMetrics {
  double oa = 0.0, aa = 0.0, kappa_v = 0.0;
  std::vector<double> per_class;
};

RunMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  RunMetrics m;
  m.oa = overall_accuracy(cm);
  m.aa = average_accuracy(cm);
  m.kappa_v = kappa(cm);
  m.per_class.resize(cm.n);
  for (int c = 1; c <= cm.n; ++c) {
    m.per_class[c - 1] = static_cast<double>(cm.at(c, c)) / static_cast<double>(cm.row_sum(c));
  }
  return m;
}

json metrics_to_json(const RunMetrics& m) {
  return json{{"oa", m.oa}, {"aa", m.aa}, {"kappa", m.kappa_v}, {"per_class", m.per_class}};
}

json aggregate_metrics(const std::vector<RunMetrics>& runs) {
  json out;
  out["runs"] = json::array();
  for (const RunMetrics& r : runs) out["runs"].push_back(metrics_to_json(r));
  auto stats = [&](auto pick) {
    double mean = 0.0;
    for (const RunMetrics& r : runs) mean += pick(r);
    mean /= runs.size();
    double var = 0.0;
    for (const RunMetrics& r : runs) var += (pick(r) - mean) * (pick(r) - mean);
    var /= runs.size();
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  auto [oa_m, oa_s] = stats([](const RunMetrics& r) { return r.oa; });
  auto [aa_m, aa_s] = stats([](const RunMetrics& r) { return r.aa; });
  auto [k_m, k_s] = stats([](const RunMetrics& r) { return r.kappa_v; });
  out["mean"] = {{"oa", oa_m}, {"aa", aa_m}, {"kappa", k_m}};
  out["std"] = {{"oa", oa_s}, {"aa", aa_s}, {"kappa", k_s}};
  return out;
}

RunMetrics evaluate_checkpoint_on(const Model& model, const HsiCube& reduced, const LabelMap& labels,
                                  const SplitManifest& manifest, int num_classes) {
  PatchBatch test = extract_patches(reduced, labels, manifest.test_coords(), model.spec().window);
  std::vector<int> pred0 = predict_classes(model, test.patches);
  std::vector<int> pred;
  pred.reserve(pred0.size());
  for (int p : pred0) pred.push_back(p + 1);
  ConfusionMatrix cm = confusion(pred, test.labels, num_classes);
  return metrics_from_confusion(cm);
}

std::string format_report(const json& metrics, const std::string& title) {
  std::ostringstream os;
  os << title << "\n";
  os << "runs: " << metrics["runs"].size() << "\n";
  os << "OA    mean " << metrics["mean"]["oa"].get<double>() << "  std "
     << metrics["std"]["oa"].get<double>() << "\n";
  os << "AA    mean " << metrics["mean"]["aa"].get<double>() << "  std "
     << metrics["std"]["aa"].get<double>() << "\n";
  os << "kappa mean " << metrics["mean"]["kappa"].get<double>() << "  std "
     << metrics["std"]["kappa"].get<double>() << "\n";
  const json& first = metrics["runs"][0];
  os << "per-class recall (run 0):\n";
  int c = 1;
  for (const auto& v : first["per_class"]) {
    os << "  class " << c++ << ": " << v.get<double>() << "\n";
  }
  return os.str();
}

}  // namespace

int cmd_preprocess(const PreprocessArgs& a) {
  HsiCube cube = load_cube(a.cube);
  if (!a.labels.empty()) require_matching_raster(cube, load_labels(a.labels));
  if (a.components < 1 || a.components > cube.bands) {
    throw std::runtime_error("components must be in [1," + std::to_string(cube.bands) + "]");
  }
  HsiCube reduced = pca_reduce(a.normalize ? normalize(cube) : cube, a.components);
  save_cube(reduced, a.out);
  std::cout << "wrote " << a.out << " (" << reduced.width << "x" << reduced.height << "x"
            << reduced.bands << ")\n";
  return 0;
}

int cmd_split(const SplitArgs& a) {
  LabelMap labels = load_labels(a.labels);
  SplitPolicy policy;
  if (a.fraction > 0.0 && a.per_class > 0) {
    throw std::runtime_error("give either --fraction or --per-class, not both");
  }
  if (a.fraction > 0.0) {
    policy.kind = SplitPolicy::Kind::fraction;
    policy.fraction = a.fraction;
  } else if (a.per_class > 0) {
    policy.kind = SplitPolicy::Kind::per_class;
    policy.per_class = a.per_class;
  } else {
    throw std::runtime_error("give --fraction or --per-class");
  }
  SplitManifest m = stratified_split(labels, policy, a.seed);
  save_manifest(m, a.out);
  size_t train = m.train_coords().size();
  std::cout << "wrote " << a.out << " (" << train << " train, " << m.rows.size() - train
            << " test)\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = RunConfig::from_json_file(a.config);
  ensure_dir(a.out_dir);

  HsiCube cube;
  LabelMap labels;
  if (cfg.synth) {
    auto [c, l] = synth_cube(*cfg.synth);
    cube = std::move(c);
    labels = std::move(l);
    save_cube(cube, join(a.out_dir, "cube.hsic"));
    save_labels(labels, join(a.out_dir, "labels.hsil"));
  } else {
    cube = load_cube(cfg.cube_path);
    labels = load_labels(cfg.labels_path);
  }
  require_matching_raster(cube, labels);
  const int num_classes = labels.max_label();
  if (num_classes < 2) throw std::runtime_error("label map holds fewer than 2 classes");

  HsiCube reduced = reduce_cube(cube, cfg.components, cfg.normalize);

  SplitManifest manifest;
  if (!cfg.manifest_path.empty()) {
    manifest = load_manifest(cfg.manifest_path);
  } else {
    manifest = stratified_split(labels, *cfg.split, cfg.split_seed);
  }
  save_manifest(manifest, join(a.out_dir, "split.txt"));

  write_text_atomic(join(a.out_dir, "effective_config.json"), cfg.to_json());

  PatchBatch train_set = extract_patches(reduced, labels, manifest.train_coords(), cfg.window);
  std::vector<int> train_labels0;
  train_labels0.reserve(train_set.labels.size());
  for (int l : train_set.labels) train_labels0.push_back(l - 1);

  ModelSpec spec = build_model_spec(cfg.model, cfg.components, cfg.window, num_classes,
                                    cfg.use_peepholes);

  std::vector<RunMetrics> run_metrics;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    TrainSchedule schedule = cfg.schedule;
    schedule.seed = cfg.schedule.seed + static_cast<uint64_t>(rep);
    Model model = Model::init(spec, derive_seed(schedule.seed, 0xC0DE));

    std::ostringstream trace;
    auto on_epoch = [&](const EpochRecord& r) {
      json line = {{"epoch", r.epoch},
                   {"loss", r.loss},
                   {"accuracy", r.accuracy},
                   {"seconds", cfg.deterministic ? 0.0 : r.seconds}};
      trace << line.dump() << "\n";
      if (r.epoch % 50 == 0 || r.epoch == schedule.epochs) {
        std::cout << "rep " << rep << " epoch " << r.epoch << " loss " << r.loss << " acc "
                  << r.accuracy << "\n";
      }
    };
    TrainResult result = train_model(model, train_set.patches, train_labels0, schedule, nullptr,
                                     on_epoch);
    write_text_atomic(join(a.out_dir, "trace_" + std::to_string(rep) + ".jsonl"), trace.str());
    if (result.aborted) {
      std::cout << "rep " << rep << ": training aborted (non-finite loss), kept epoch "
                << result.last_good_epoch << "\n";
    }

    Checkpoint ckpt = checkpoint_from_model(model, schedule.seed);
    save_checkpoint(ckpt, join(a.out_dir, "checkpoint_" + std::to_string(rep) + ".sscp"));

    run_metrics.push_back(evaluate_checkpoint_on(model, reduced, labels, manifest, num_classes));
  }

  json metrics = aggregate_metrics(run_metrics);
  write_text_atomic(join(a.out_dir, "metrics.json"), metrics.dump(2) + "\n");
  write_text_atomic(join(a.out_dir, "report.txt"),
                    format_report(metrics, "test metrics (" + to_string(cfg.model) + ")"));
  std::cout << "mean test OA " << metrics["mean"]["oa"].get<double>() << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a) {
  if (a.checkpoints.empty()) throw std::runtime_error("need at least one --checkpoint");
  ensure_dir(a.out_dir);
  HsiCube cube = load_cube(a.cube);
  LabelMap labels = load_labels(a.labels);
  require_matching_raster(cube, labels);
  SplitManifest manifest = load_manifest(a.manifest);
  const int num_classes = labels.max_label();

  std::vector<RunMetrics> run_metrics;
  for (const std::string& path : a.checkpoints) {
    Checkpoint ckpt = load_checkpoint(path);
    Model model = model_from_checkpoint(ckpt);
    HsiCube reduced = reduce_cube(cube, model.spec().components, a.normalize);
    if (model.spec().num_classes != num_classes) {
      throw std::runtime_error("checkpoint " + path + " was trained for " +
                               std::to_string(model.spec().num_classes) + " classes, labels hold " +
                               std::to_string(num_classes));
    }
    run_metrics.push_back(evaluate_checkpoint_on(model, reduced, labels, manifest, num_classes));
  }

  json metrics = aggregate_metrics(run_metrics);
  write_text_atomic(join(a.out_dir, "metrics.json"), metrics.dump(2) + "\n");
  write_text_atomic(join(a.out_dir, "report.txt"), format_report(metrics, "test metrics"));
  std::cout << "mean test OA " << metrics["mean"]["oa"].get<double>() << "\n";
  return 0;
}

int cmd_predict_map(const PredictMapArgs& a) {
  ensure_dir(a.out_dir);
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Model model = model_from_checkpoint(ckpt);
  HsiCube cube = load_cube(a.cube);
  HsiCube reduced = reduce_cube(cube, model.spec().components, a.normalize);

  std::vector<std::pair<int, int>> coords;
  coords.reserve(cube.pixel_count());
  for (int row = 0; row < cube.height; ++row) {
    for (int col = 0; col < cube.width; ++col) coords.emplace_back(row, col);
  }
  LabelMap all;
  all.width = cube.width;
  all.height = cube.height;
  all.labels.assign(cube.pixel_count(), 1);  // placeholder labels; predictions ignore them
  PatchBatch patches = extract_patches(reduced, all, coords, model.spec().window);
  std::vector<int> pred = predict_classes(model, patches.patches);

  LabelMap out;
  out.width = cube.width;
  out.height = cube.height;
  out.labels.resize(cube.pixel_count());
  for (size_t i = 0; i < pred.size(); ++i) out.labels[i] = static_cast<uint16_t>(pred[i] + 1);

  ClassPalette palette = ClassPalette::make_default(model.spec().num_classes);
  std::vector<uint8_t> ppm = render_map(out, palette);
  write_file_atomic(join(a.out_dir, "map.ppm"), ppm);
  save_labels(out, join(a.out_dir, "pred.hsil"));
  std::cout << "wrote " << join(a.out_dir, "map.ppm") << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  ModelName name = model_name_from_string(a.model);
  const int k = (name == ModelName::cnn2d || name == ModelName::sacl2dnn) ? 1 : a.components;
  ModelSpec spec = build_model_spec(name, k, a.window, a.classes);
  Model model = Model::init(spec, derive_seed(a.seed, 1));

  Rng rng(derive_seed(a.seed, 2));
  Tensor patch({a.window, a.window, k});
  for (int64_t i = 0; i < patch.size(); ++i) patch[i] = rng.normal();
  const int label = static_cast<int>(rng.below(a.classes));

  GradCheckReport report = gradcheck_model(model, patch, label, a.samples_per_param, 1e-5,
                                           derive_seed(a.seed, 3));
  if (report.pass(a.tolerance)) {
    std::cout << "PASS, max rel err " << report.max_rel_err << " (" << report.checked
              << " coordinates, worst " << report.worst_param << ")\n";
    return 0;
  }
  std::cout << "FAIL, max rel err " << report.max_rel_err << " at " << report.worst_param << "\n";
  for (const ParamCheck& pc : report.per_param) {
    if (pc.max_rel_err >= a.tolerance) {
      std::cout << "  " << pc.name << ": max rel err " << pc.max_rel_err << "\n";
    }
  }
  return 1;
}

int cmd_synth(const SynthArgs& a) {
  std::vector<uint8_t> bytes = read_file(a.spec);
  SynthSpec spec = synth_spec_from_json(std::string(bytes.begin(), bytes.end()));
  ensure_dir(a.out_dir);
  auto [cube, labels] = synth_cube(spec);
  save_cube(cube, join(a.out_dir, "cube.hsic"));
  save_labels(labels, join(a.out_dir, "labels.hsil"));
  std::cout << "wrote " << join(a.out_dir, "cube.hsic") << " and labels.hsil (" << spec.width
            << "x" << spec.height << "x" << spec.bands << ", " << spec.classes << " classes)\n";
  return 0;
}

}  // namespace sscl

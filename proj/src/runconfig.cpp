#include "sscl/runconfig.hpp"

#include <json.hpp>
#include <fstream>
#include <stdexcept>

#include "sscl/binio.hpp"

namespace sscl {

using nlohmann::json;

double default_learning_rate(ModelName name) {
  switch (name) {
    case ModelName::sscl2dnn: return 0.001;
    case ModelName::sacl2dnn: return 0.0001;
    case ModelName::sscl3dnn: return 0.0001;
    case ModelName::cnn2d: return 0.001;
    case ModelName::cnn3d: return 0.001;
  }
  return 0.001;
}

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
}

template <typename T>
T get_as(const json& j, const std::string& field, const T& fallback, bool required = false) {
  if (!j.contains(field)) {
    if (required) bad_field(field, "missing");
    return fallback;
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    bad_field(field, "wrong type");
  }
}

SynthSpec synth_from(const json& j) {
  SynthSpec s;
  s.classes = get_as<int>(j, "classes", s.classes);
  s.width = get_as<int>(j, "width", s.width);
  s.height = get_as<int>(j, "height", s.height);
  s.bands = get_as<int>(j, "bands", s.bands);
  s.noise = get_as<double>(j, "noise", s.noise);
  s.seed = get_as<uint64_t>(j, "seed", s.seed);
  s.layout = get_as<std::string>(j, "layout", s.layout);
  if (j.contains("signatures")) {
    try {
      s.signatures = j.at("signatures").get<std::vector<std::vector<double>>>();
    } catch (const json::exception&) {
      bad_field("signatures", "must be an array of per-class band arrays");
    }
  }
  if (s.classes < 2) bad_field("classes", "need at least 2");
  if (s.width < 1 || s.height < 1 || s.bands < 1) bad_field("width/height/bands", "must be positive");
  if (s.noise < 0.0) bad_field("noise", "must be >= 0");
  if (s.layout != "voronoi" && s.layout != "blocks") bad_field("layout", "must be 'voronoi' or 'blocks'");
  return s;
}

json synth_to(const SynthSpec& s) {
  json j;
  j["classes"] = s.classes;
  j["width"] = s.width;
  j["height"] = s.height;
  j["bands"] = s.bands;
  j["noise"] = s.noise;
  j["seed"] = s.seed;
  j["layout"] = s.layout;
  if (!s.signatures.empty()) j["signatures"] = s.signatures;
  return j;
}

}  // namespace

SynthSpec synth_spec_from_json(const std::string& text) {
  return synth_from(parse_json(text, "synth spec"));
}

std::string synth_spec_to_json(const SynthSpec& spec) { return synth_to(spec).dump(2) + "\n"; }

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j = parse_json(text, "config");
  RunConfig c;

  c.cube_path = get_as<std::string>(j, "cube", "");
  c.labels_path = get_as<std::string>(j, "labels", "");
  if (j.contains("synth")) c.synth = synth_from(j.at("synth"));
  if (!c.synth && (c.cube_path.empty() || c.labels_path.empty())) {
    bad_field("cube/labels", "required unless a 'synth' block is given");
  }
  if (c.synth && !c.cube_path.empty()) bad_field("cube", "give either file paths or 'synth', not both");

  c.model = model_name_from_string(get_as<std::string>(j, "model", "", true));
  const bool spatial = c.model == ModelName::cnn2d || c.model == ModelName::sacl2dnn;
  c.components = get_as<int>(j, "components", spatial ? 1 : 10);
  if (spatial && c.components != 1) {
    bad_field("components", to_string(c.model) + " is a single-component model (K=1)");
  }
  if (c.components < 1) bad_field("components", "must be >= 1");
  c.window = get_as<int>(j, "window", 27);
  if (c.window < 1 || c.window % 2 == 0) bad_field("window", "must be odd and positive");
  c.use_peepholes = get_as<bool>(j, "use_peepholes", true);
  c.normalize = get_as<bool>(j, "normalize", true);

  c.manifest_path = get_as<std::string>(j, "manifest", "");
  if (j.contains("split")) {
    const json& js = j.at("split");
    SplitPolicy p;
    if (js.contains("fraction")) {
      p.kind = SplitPolicy::Kind::fraction;
      p.fraction = get_as<double>(js, "fraction", 0.1);
      if (p.fraction <= 0.0 || p.fraction >= 1.0) bad_field("split.fraction", "must be in (0,1)");
    } else if (js.contains("per_class")) {
      p.kind = SplitPolicy::Kind::per_class;
      p.per_class = get_as<int>(js, "per_class", 10);
      if (p.per_class < 1) bad_field("split.per_class", "must be >= 1");
    } else {
      bad_field("split", "needs 'fraction' or 'per_class'");
    }
    c.split = p;
  }
  if (c.manifest_path.empty() && !c.split) bad_field("split", "give 'split' policy or 'manifest' path");
  if (!c.manifest_path.empty() && c.split) bad_field("split", "give either 'split' or 'manifest', not both");
  c.split_seed = get_as<uint64_t>(j, "split_seed", 1);

  if (!j.contains("schedule")) bad_field("schedule", "missing");
  const json& sch = j.at("schedule");
  c.schedule.epochs = get_as<int>(sch, "epochs", 100);
  c.schedule.lr = get_as<double>(sch, "lr", default_learning_rate(c.model));
  c.schedule.batch_size = get_as<int>(sch, "batch_size", 16);
  c.schedule.seed = get_as<uint64_t>(sch, "seed", 0);
  if (c.schedule.epochs < 1) bad_field("schedule.epochs", "must be >= 1");
  if (c.schedule.lr <= 0.0) bad_field("schedule.lr", "must be > 0");
  if (c.schedule.batch_size < 1) bad_field("schedule.batch_size", "must be >= 1");

  c.repetitions = get_as<int>(j, "repetitions", 1);
  if (c.repetitions < 1) bad_field("repetitions", "must be >= 1");
  c.deterministic = get_as<bool>(j, "deterministic", true);
  return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  return from_json_text(std::string(bytes.begin(), bytes.end()));
}

std::string RunConfig::to_json() const {
  json j;
  if (synth) {
    j["synth"] = synth_to(*synth);
  } else {
    j["cube"] = cube_path;
    j["labels"] = labels_path;
  }
  j["model"] = to_string(model);
  j["components"] = components;
  j["window"] = window;
  j["use_peepholes"] = use_peepholes;
  j["normalize"] = normalize;
  if (!manifest_path.empty()) {
    j["manifest"] = manifest_path;
  } else if (split) {
    if (split->kind == SplitPolicy::Kind::fraction) {
      j["split"] = {{"fraction", split->fraction}};
    } else {
      j["split"] = {{"per_class", split->per_class}};
    }
  }
  j["split_seed"] = split_seed;
  j["schedule"] = {{"epochs", schedule.epochs},
                   {"lr", schedule.lr},
                   {"batch_size", schedule.batch_size},
                   {"seed", schedule.seed}};
  j["repetitions"] = repetitions;
  j["deterministic"] = deterministic;
  return j.dump(2) + "\n";
}

}  // namespace sscl

#include "config.hpp"

#include <cstdlib>

#include "patchforge/errors.hpp"

namespace patchforge::cli {

namespace {

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

const Json& at(const Json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing config key '" + join(where, key) + "'");
  return *it;
}

std::int64_t get_int(const Json& j, const std::string& key, const std::string& where, std::int64_t min_value) {
  const Json& v = at(j, key, where);
  if (!v.is_number_integer()) throw ConfigError("'" + join(where, key) + "' must be an integer");
  const auto n = v.get<std::int64_t>();
  if (n < min_value) {
    throw ConfigError("'" + join(where, key) + "' must be >= " + std::to_string(min_value) + ", got " +
                      std::to_string(n));
  }
  return n;
}

std::size_t get_size(const Json& j, const std::string& key, const std::string& where, std::int64_t min_value = 0) {
  return static_cast<std::size_t>(get_int(j, key, where, min_value));
}

double get_real(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = at(j, key, where);
  if (!v.is_number()) throw ConfigError("'" + join(where, key) + "' must be a number");
  return v.get<double>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = at(j, key, where);
  if (!v.is_string()) throw ConfigError("'" + join(where, key) + "' must be a string");
  return v.get<std::string>();
}

// Re-throws library validation failures as config errors tagged with the
// section they came from.
template <typename F>
void validate_section(const std::string& section, F&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(section + ": " + e.what());
  } catch (const InvalidSpec& e) {
    throw ConfigError(section + ": " + e.what());
  } catch (const PatchTooLarge& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

}  // namespace

Json default_config() {
  return Json::parse(R"({
    "preset": "toy",
    "seed": 0,
    "output_dir": "",
    "dataset": {
      "kind": "synth_shapes",
      "root": "",
      "cache_dir": "",
      "seed": 0,
      "height": 128,
      "width": 256,
      "num_classes": 6,
      "n_train": 160,
      "n_val": 40,
      "noise_sigma": 0.03,
      "illumination_jitter": 0.5
    },
    "models": [],
    "model_width": 0,
    "patches": [],
    "pretrain": {
      "epochs": 20,
      "learning_rate": 0.002,
      "batch_size": 8,
      "crop_size": 128,
      "scale_min": 0.5,
      "scale_max": 2.0,
      "max_val_images": 0
    },
    "train": {
      "step_size": 0.005,
      "epochs": 15,
      "batch_size": 6,
      "patch_size": 25,
      "eval_every": 1,
      "eval_subset": 20
    },
    "transform": {
      "scale_min": 0.5,
      "scale_max": 2.0,
      "crop_size": 128,
      "flip_prob": 0.5
    },
    "eval": {
      "split": "val",
      "max_images": 0,
      "spread_subset": 20,
      "bin_width": 8,
      "far_radius_factor": 2.0,
      "baseline_seed": 0,
      "assert_diagonal": false
    }
  })");
}

std::vector<std::string> preset_names() { return {"toy", "cnn_full", "vit_full"}; }

Json preset_overrides(const std::string& name) {
  if (name == "toy") return Json::object();
  const Json full = Json::parse(R"({
    "dataset": {"kind": "cityscapes_layout"},
    "train": {"step_size": 0.005, "patch_size": 200, "eval_subset": 100},
    "transform": {"scale_min": 0.5, "scale_max": 2.0, "crop_size": 1024, "flip_prob": 0.5},
    "eval": {"spread_subset": 20, "bin_width": 32}
  })");
  Json out = full;
  if (name == "cnn_full") {
    out["train"]["batch_size"] = 6;
    out["train"]["epochs"] = 30;
  } else if (name == "vit_full") {
    out["train"]["batch_size"] = 1;
    out["train"]["epochs"] = 15;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected toy, cnn_full or vit_full)");
  }
  out["preset"] = name;
  return out;
}

void merge_checked(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("'" + (where.empty() ? "config" : where) + "' must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = join(where, key);
    const auto it = base.find(key);
    if (it == base.end()) throw ConfigError("unknown config key '" + path + "'");
    if (!same_kind(*it, value)) {
      throw ConfigError("config key '" + path + "' expects a " + std::string(it->type_name()) + ", got " +
                        value.type_name());
    }
    if (it->is_object()) {
      merge_checked(*it, value, path);
    } else {
      *it = value;
    }
  }
}

void apply_set(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  // Build the nested patch {a: {b: {c: value}}}.
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  Json patch = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw ConfigError("empty path segment in --set key '" + key + "'");
    Json wrapped = Json::object();
    wrapped[*it] = std::move(patch);
    patch = std::move(wrapped);
  }
  merge_checked(config, patch);
}

ModelRef parse_model_flag(const std::string& value) {
  const auto eq = value.find('=');
  if (eq == std::string::npos) return {value, {}};
  return {value.substr(0, eq), value.substr(eq + 1)};
}

PatchRef parse_patch_flag(const std::string& value) {
  const auto eq = value.find('=');
  if (eq == std::string::npos) return {"", value};
  return {value.substr(0, eq), value.substr(eq + 1)};
}

RunConfig to_run_config(const Json& resolved) {
  RunConfig rc;
  rc.resolved = resolved;
  rc.seed = static_cast<std::uint64_t>(get_int(resolved, "seed", "", 0));
  rc.output_dir = get_string(resolved, "output_dir", "");

  const Json& ds = at(resolved, "dataset", "");
  const std::string kind = get_string(ds, "kind", "dataset");
  if (kind == "synth_shapes") {
    rc.dataset.kind = DatasetKind::kSynthShapes;
  } else if (kind == "cityscapes_layout") {
    rc.dataset.kind = DatasetKind::kCityscapesLayout;
  } else {
    throw ConfigError("dataset.kind must be synth_shapes or cityscapes_layout, got '" + kind + "'");
  }
  rc.dataset.root = get_string(ds, "root", "dataset");
  if (rc.dataset.kind == DatasetKind::kCityscapesLayout) {
    if (rc.dataset.root.empty()) throw ConfigError("dataset.root is required for cityscapes_layout (use --data)");
    if (!std::filesystem::is_directory(rc.dataset.root)) {
      throw ConfigError("dataset root does not exist: " + rc.dataset.root.string());
    }
  }
  std::string cache = get_string(ds, "cache_dir", "dataset");
  if (cache.empty()) {
    if (const char* env = std::getenv("PATCHFORGE_CACHE"); env && *env) cache = env;
  }
  if (!cache.empty()) rc.dataset.cache_dir = cache;
  rc.dataset.synth.seed = static_cast<std::uint64_t>(get_int(ds, "seed", "dataset", 0));
  rc.dataset.synth.height = get_size(ds, "height", "dataset", 8);
  rc.dataset.synth.width = get_size(ds, "width", "dataset", 8);
  rc.dataset.synth.num_classes = static_cast<int>(get_int(ds, "num_classes", "dataset", 2));
  rc.dataset.n_train = get_size(ds, "n_train", "dataset", 1);
  rc.dataset.n_val = get_size(ds, "n_val", "dataset", 1);
  rc.dataset.synth.noise_sigma = get_real(ds, "noise_sigma", "dataset");
  rc.dataset.synth.illumination_jitter = get_real(ds, "illumination_jitter", "dataset");
  if (!(rc.dataset.synth.illumination_jitter >= 0.0 && rc.dataset.synth.illumination_jitter < 1.0)) {
    throw ConfigError("'dataset.illumination_jitter' must be in [0,1)");
  }
  if (!(rc.dataset.synth.noise_sigma >= 0.0)) throw ConfigError("'dataset.noise_sigma' must be >= 0");

  for (const Json& m : at(resolved, "models", "")) {
    if (!m.is_object()) throw ConfigError("models entries must be {\"name\": ..., \"weights\": ...}");
    for (const auto& [k, _] : m.items()) {
      if (k != "name" && k != "weights") throw ConfigError("unknown config key 'models[]." + k + "'");
    }
    ModelRef ref{get_string(m, "name", "models[]"), m.contains("weights") ? get_string(m, "weights", "models[]") : ""};
    if (!AdapterRegistry::global().contains(ref.name)) throw UnknownModel("unknown model '" + ref.name + "'");
    if (!ref.weights.empty() && !std::filesystem::is_regular_file(ref.weights)) {
      throw ConfigError("weights file does not exist: " + ref.weights.string());
    }
    rc.models.push_back(std::move(ref));
  }
  rc.model_width = static_cast<int>(get_int(resolved, "model_width", "", 0));

  for (const Json& p : at(resolved, "patches", "")) {
    if (!p.is_object()) throw ConfigError("patches entries must be {\"tag\": ..., \"path\": ...}");
    for (const auto& [k, _] : p.items()) {
      if (k != "tag" && k != "path") throw ConfigError("unknown config key 'patches[]." + k + "'");
    }
    PatchRef ref{p.contains("tag") ? get_string(p, "tag", "patches[]") : "", get_string(p, "path", "patches[]")};
    if (!std::filesystem::is_regular_file(ref.path / "meta.json") ||
        !std::filesystem::is_regular_file(ref.path / "values.bin")) {
      throw ConfigError("patch artifact not found: " + ref.path.string());
    }
    rc.patches.push_back(std::move(ref));
  }

  const Json& pt = at(resolved, "pretrain", "");
  rc.pretrain.epochs = static_cast<int>(get_int(pt, "epochs", "pretrain", 0));
  rc.pretrain.learning_rate = get_real(pt, "learning_rate", "pretrain");
  rc.pretrain.batch_size = get_size(pt, "batch_size", "pretrain", 1);
  rc.pretrain.transform.crop_size = get_size(pt, "crop_size", "pretrain", 1);
  rc.pretrain.transform.scale_min = get_real(pt, "scale_min", "pretrain");
  rc.pretrain.transform.scale_max = get_real(pt, "scale_max", "pretrain");
  rc.pretrain.max_val_images = get_size(pt, "max_val_images", "pretrain");
  rc.pretrain.seed = rc.seed;
  if (!(rc.pretrain.learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate must be > 0");
  validate_section("pretrain", [&] { rc.pretrain.transform.validate(); });

  const Json& tr = at(resolved, "transform", "");
  rc.train.transform.scale_min = get_real(tr, "scale_min", "transform");
  rc.train.transform.scale_max = get_real(tr, "scale_max", "transform");
  rc.train.transform.crop_size = get_size(tr, "crop_size", "transform", 1);
  rc.train.transform.flip_prob = get_real(tr, "flip_prob", "transform");

  const Json& t = at(resolved, "train", "");
  rc.train.step_size = get_real(t, "step_size", "train");
  rc.train.epochs = static_cast<int>(get_int(t, "epochs", "train", 0));
  rc.train.batch_size = get_size(t, "batch_size", "train", 1);
  rc.train.patch_size = get_size(t, "patch_size", "train", 1);
  rc.train.eval_every = static_cast<int>(get_int(t, "eval_every", "train", 1));
  rc.train.eval_subset = get_size(t, "eval_subset", "train", 1);
  rc.train.seed = rc.seed;
  validate_section("train", [&] { rc.train.validate(); });

  const Json& ev = at(resolved, "eval", "");
  rc.eval_split = get_string(ev, "split", "eval");
  if (rc.eval_split != "train" && rc.eval_split != "val") throw ConfigError("eval.split must be train or val");
  rc.eval.max_images = get_size(ev, "max_images", "eval");
  rc.eval.spread_subset = get_size(ev, "spread_subset", "eval");
  rc.eval.spread_bin_width = get_size(ev, "bin_width", "eval", 1);
  rc.eval.far_radius_factor = get_real(ev, "far_radius_factor", "eval");
  if (!(rc.eval.far_radius_factor > 0.0)) throw ConfigError("eval.far_radius_factor must be > 0");
  rc.eval.seed = rc.seed;
  rc.baseline_seed = static_cast<std::uint64_t>(get_int(ev, "baseline_seed", "eval", 0));
  const Json& ad = at(ev, "assert_diagonal", "eval");
  if (!ad.is_boolean()) throw ConfigError("'eval.assert_diagonal' must be a boolean");
  rc.assert_diagonal = ad.get<bool>();
  return rc;
}

}  // namespace patchforge::cli

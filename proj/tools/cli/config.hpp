#ifndef PATCHFORGE_TOOLS_CONFIG_HPP_
#define PATCHFORGE_TOOLS_CONFIG_HPP_

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "patchforge/datasets.hpp"
#include "patchforge/evalsuite.hpp"
#include "patchforge/model_zoo.hpp"
#include "patchforge/trainer.hpp"

namespace patchforge::cli {

using Json = nlohmann::ordered_json;

// Every key the config accepts, with toy-preset values. Also serves as the
// schema: keys absent here are rejected.
Json default_config();
// Overrides a preset applies on top of the defaults.
Json preset_overrides(const std::string& name);
std::vector<std::string> preset_names();

// Deep-merges `patch` into `base`, rejecting keys unknown to `base` and
// values whose JSON type differs. `where` is the dotted prefix for messages.
void merge_checked(Json& base, const Json& patch, const std::string& where = "");

// Applies one `a.b.c=value` override. The value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_set(Json& config, const std::string& assignment);

struct ModelRef {
  std::string name;
  std::filesystem::path weights;
};

struct PatchRef {
  std::string tag;
  std::filesystem::path path;
};

// Typed view of a resolved config.
struct RunConfig {
  Json resolved;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  DatasetSpec dataset;
  std::vector<ModelRef> models;
  int model_width = 0;
  std::vector<PatchRef> patches;
  PretrainConfig pretrain;
  TrainConfig train;
  EvalOptions eval;
  std::string eval_split = "val";
  std::uint64_t baseline_seed = 0;
  bool assert_diagonal = false;
};

// Converts and validates; throws ConfigError naming the offending key.
RunConfig to_run_config(const Json& resolved);

ModelRef parse_model_flag(const std::string& value);
PatchRef parse_patch_flag(const std::string& value);

}  // namespace patchforge::cli

#endif  // PATCHFORGE_TOOLS_CONFIG_HPP_

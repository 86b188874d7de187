#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/report_io.hpp"
#include "plots.hpp"

namespace patchforge::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by the config-driven commands.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::int64_t> seed;
  std::vector<std::string> models;
  std::vector<std::string> patches;
  std::string data;
  std::optional<std::int64_t> epochs;
  std::string preset;
  bool assert_diagonal = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_patches, bool with_epochs) {
  cmd->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "override a config key: dotted.key=value (repeatable)");
  cmd->add_option("--out", f.out, "run directory");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--model", f.models, "model name, optionally NAME=WEIGHTS (repeatable)");
  cmd->add_option("--data", f.data, "Cityscapes-layout dataset root");
  cmd->add_option("--preset", f.preset, "toy | cnn_full | vit_full");
  if (with_patches) cmd->add_option("--patch", f.patches, "patch artifact, optionally TAG=PATH (repeatable)");
  if (with_epochs) cmd->add_option("--epochs", f.epochs, "number of epochs");
}

Json resolve_config(const CommonFlags& f, const std::string& command) {
  Json file = Json::object();
  if (!f.config_path.empty()) {
    try {
      file = Json::parse(read_text_file(f.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(f.config_path + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError(f.config_path + " must hold a JSON object");
  }
  std::string preset = "toy";
  if (file.contains("preset")) {
    if (!file["preset"].is_string()) throw ConfigError("'preset' must be a string");
    preset = file["preset"].get<std::string>();
  }
  if (!f.preset.empty()) preset = f.preset;

  Json cfg = default_config();
  merge_checked(cfg, preset_overrides(preset));
  merge_checked(cfg, file);
  cfg["preset"] = preset;
  for (const std::string& s : f.sets) apply_set(cfg, s);

  if (!f.out.empty()) cfg["output_dir"] = f.out;
  if (f.seed) {
    if (*f.seed < 0) throw ConfigError("--seed must be >= 0");
    cfg["seed"] = *f.seed;
  }
  if (!f.data.empty()) {
    cfg["dataset"]["kind"] = "cityscapes_layout";
    cfg["dataset"]["root"] = f.data;
  }
  if (f.epochs) cfg[command == "pretrain-toy" ? "pretrain" : "train"]["epochs"] = *f.epochs;
  if (!f.models.empty()) {
    Json arr = Json::array();
    for (const std::string& m : f.models) {
      const ModelRef ref = parse_model_flag(m);
      arr.push_back(Json{{"name", ref.name}, {"weights", ref.weights.string()}});
    }
    cfg["models"] = arr;
  }
  if (!f.patches.empty()) {
    Json arr = Json::array();
    for (const std::string& p : f.patches) {
      const PatchRef ref = parse_patch_flag(p);
      arr.push_back(Json{{"tag", ref.tag}, {"path", ref.path.string()}});
    }
    cfg["patches"] = arr;
  }
  if (f.assert_diagonal) cfg["eval"]["assert_diagonal"] = true;
  return cfg;
}

// Exclusive ownership of a run directory for the lifetime of a command.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ConfigError("run directory " + dir.string() + " is in use (" + path_.string() +
                        " exists; delete it if no other run is active)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~RunLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

std::unique_ptr<Dataset> open_split(const RunConfig& rc, Split split) {
  DatasetSpec spec = rc.dataset;
  spec.split = split;
  auto ds = open_dataset(spec);
  if (ds->size() == 0) throw EmptyDataset("dataset split '" + to_string(split) + "' is empty");
  return ds;
}

int dataset_classes(const RunConfig& rc) {
  return rc.dataset.kind == DatasetKind::kSynthShapes ? rc.dataset.synth.num_classes : 19;
}

struct LoadedModel {
  std::string name;
  std::unique_ptr<ModelAdapter> adapter;
};

LoadedModel load_model(const RunConfig& rc, const ModelRef& ref) {
  AdapterOptions opt{.num_classes = dataset_classes(rc), .width = rc.model_width, .seed = rc.seed, .weights = ref.weights};
  LoadedModel m{ref.name, nullptr};
  try {
    m.adapter = AdapterRegistry::global().get_adapter(ref.name, opt);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("cannot load weights for ") + ref.name + ": " + e.what());
  }
  if (m.adapter->num_classes() != dataset_classes(rc)) {
    throw ConfigError(ref.name + " predicts " + std::to_string(m.adapter->num_classes()) + " classes, dataset has " +
                      std::to_string(dataset_classes(rc)));
  }
  m.adapter->set_inference_mode();
  return m;
}

fs::path require_output_dir(const RunConfig& rc) {
  if (rc.output_dir.empty()) throw ConfigError("an output directory is required (--out or output_dir)");
  if (fs::exists(rc.output_dir) && !fs::is_directory(rc.output_dir)) {
    throw ConfigError("output path exists and is not a directory: " + rc.output_dir.string());
  }
  return rc.output_dir;
}

void write_resolved(const fs::path& dir, const Json& cfg) { write_text_file(dir / "config.resolved.json", cfg.dump(2) + "\n"); }

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json per_class_json(const std::vector<std::optional<double>>& iou, const std::vector<std::string>& names) {
  Json j = Json::object();
  for (std::size_t i = 0; i < iou.size(); ++i) {
    j[i < names.size() ? names[i] : "class_" + std::to_string(i)] = iou[i] ? Json(*iou[i]) : Json(nullptr);
  }
  return j;
}

// ---------------------------------------------------------------------------

int cmd_pretrain(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const Json cfg = resolve_config(f, "pretrain-toy");
  const RunConfig rc = to_run_config(cfg);
  const fs::path dir = require_output_dir(rc);
  if (rc.models.size() != 1) throw ConfigError("pretrain-toy needs exactly one --model");
  const ModelRef& ref = rc.models.front();
  const ToyKind kind = [&] {
    try {
      return parse_toy_kind(ref.name);
    } catch (const UnknownModel&) {
      throw ConfigError("pretrain-toy only trains toy models (tiny_cnn, tiny_attention), not '" + ref.name + "'");
    }
  }();
  if (!ref.weights.empty()) throw ConfigError("pretrain-toy starts from a fresh model; drop the weights path");
  ToyModelConfig mc{.kind = kind, .num_classes = dataset_classes(rc), .width = rc.model_width, .seed = rc.seed};
  try {
    mc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  const auto train = open_split(rc, Split::kTrain);
  const auto val = open_split(rc, Split::kVal);
  fs::create_directories(dir);
  RunLock lock(dir);
  write_resolved(dir, cfg);

  ToyModel model(mc);
  PretrainConfig pc = rc.pretrain;
  pc.on_epoch = [&err, &pc](int epoch, double loss) {
    err << "pretrain epoch " << epoch << "/" << pc.epochs << " loss " << loss << "\n";
  };
  const PretrainReport report = pretrain_toy(model, *train, *val, pc);
  model.save_weights(dir / "weights.bin");
  const Json j{{"model", model.name()},
               {"width", model.config().width},
               {"seed", rc.seed},
               {"epochs", rc.pretrain.epochs},
               {"n_train", train->size()},
               {"n_val", val->size()},
               {"epoch_losses", report.epoch_losses},
               {"val_miou", report.val_miou},
               {"val_per_class_iou", per_class_json(report.val_per_class_iou, val->class_names())},
               {"checksum", hex64(report.checksum)}};
  write_text_file(dir / "pretrain_report.json", j.dump(2) + "\n");
  out << model.name() << " val MIoU " << report.val_miou << " -> " << (dir / "weights.bin").string() << "\n";
  return kOk;
}

int cmd_train_patch(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const Json cfg = resolve_config(f, "train-patch");
  const RunConfig rc = to_run_config(cfg);
  const fs::path dir = require_output_dir(rc);
  if (rc.models.size() != 1) throw ConfigError("train-patch needs exactly one --model");
  if (rc.train.epochs < 1) throw ConfigError("train.epochs must be >= 1 for train-patch");
  if (rc.models.front().weights.empty()) {
    err << "warning: " << rc.models.front().name << " has no weights; attacking a randomly initialised model\n";
  }
  LoadedModel model = load_model(rc, rc.models.front());
  const auto train = open_split(rc, Split::kTrain);
  fs::create_directories(dir);
  RunLock lock(dir);
  write_resolved(dir, cfg);

  TrainHooks hooks;
  const int epochs = rc.train.epochs;
  hooks.on_epoch = [&err, epochs](const EpochRecord& r, const Patch&) {
    err << "epoch " << r.epoch << "/" << epochs;
    if (r.mean_loss) err << " loss " << *r.mean_loss;
    if (r.eval_miou) err << " miou " << *r.eval_miou;
    err << " (" << r.wall_time_s << "s)\n";
  };
  const TrainResult result = train_patch(*model.adapter, *train, rc.train, hooks);
  const fs::path artifact = dir / (model.name + ".apf");
  save_patch(result.patch, artifact);
  write_text_file(dir / "history.json", history_to_json(result.history));
  out << "patch " << artifact.string() << "\n";
  return kOk;
}

struct EvalInputs {
  std::vector<LoadedModel> models;
  std::vector<NamedPatch> patches;
};

EvalInputs load_eval_inputs(const RunConfig& rc) {
  if (rc.models.empty()) throw ConfigError("at least one --model is required");
  if (rc.patches.empty()) throw ConfigError("at least one --patch is required");
  EvalInputs in;
  std::set<std::string> names;
  for (const ModelRef& ref : rc.models) {
    if (!names.insert(ref.name).second) throw ConfigError("model '" + ref.name + "' given twice");
    in.models.push_back(load_model(rc, ref));
  }
  std::set<std::string> tags;
  for (const PatchRef& ref : rc.patches) {
    Patch p = [&] {
      try {
        return load_patch(ref.path);
      } catch (const FormatError& e) {
        throw ConfigError("bad patch artifact " + ref.path.string() + ": " + e.what());
      }
    }();
    std::string tag = ref.tag.empty() ? p.meta().source_model : ref.tag;
    if (tag.empty()) tag = ref.path.stem().string();
    if (tag == "random") throw ConfigError("patch tag 'random' is reserved; pass TAG=PATH");
    if (!tags.insert(tag).second) throw ConfigError("patch tag '" + tag + "' given twice; pass TAG=PATH");
    in.patches.push_back({tag, std::move(p)});
  }
  return in;
}

int cmd_eval_like(const CommonFlags& f, bool transfer, std::ostream& out, std::ostream& err) {
  const std::string command = transfer ? "transfer" : "eval";
  const Json cfg = resolve_config(f, command);
  const RunConfig rc = to_run_config(cfg);
  const fs::path dir = require_output_dir(rc);
  EvalInputs in = load_eval_inputs(rc);
  const auto data = open_split(rc, rc.eval_split == "train" ? Split::kTrain : Split::kVal);
  fs::create_directories(dir / "reports");
  RunLock lock(dir);
  write_resolved(dir, cfg);

  std::vector<NamedAdapter> adapters;
  for (const LoadedModel& m : in.models) adapters.push_back({m.name, m.adapter.get()});
  err << command << ": " << in.patches.size() << " patch(es) x " << adapters.size() << " model(s) on "
      << data->size() << " images\n";
  const TransferMatrix tm = transfer_matrix(in.patches, adapters, *data, rc.eval, rc.baseline_seed);

  const std::vector<std::string> classes = data->class_names();
  Json summary{{"split", rc.eval_split}, {"baseline_seed", rc.baseline_seed}, {"rows", tm.row_labels},
               {"cols", tm.col_labels}, {"miou", tm.values}};
  Json drops = Json::array();
  for (std::size_t r = 0; r < tm.row_labels.size(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < tm.col_labels.size(); ++c) {
      row.push_back(tm.drop(r, c));
      const std::string stem = tm.row_labels[r] + "__" + tm.col_labels[c];
      write_text_file(dir / "reports" / (stem + ".json"), report_to_json(tm.reports[r][c], classes, rc.eval_split));
      write_text_file(dir / "reports" / (stem + "_per_class.csv"), per_class_csv(tm.reports[r][c], classes));
    }
    drops.push_back(row);
  }
  summary["drop_vs_baseline"] = drops;
  write_text_file(dir / (command + "_summary.json"), summary.dump(2) + "\n");
  const std::string csv = transfer_matrix_csv(tm);
  if (transfer) write_text_file(dir / "transfer_matrix.csv", csv);
  out << csv;

  if (rc.assert_diagonal) {
    const auto violations = diagonal_violations(tm);
    for (const std::string& v : violations) err << "diagonal violation: " << v << "\n";
    if (!violations.empty()) return kAssertionFailed;
    out << "diagonal dominance holds\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// plot

struct PlotInputs {
  std::vector<TrainHistory> histories;
  std::vector<EvalReport> reports;
  std::vector<fs::path> matrices;
};

void scan_dir(const fs::path& dir, PlotInputs& in, int depth) {
  if (fs::is_regular_file(dir / "history.json")) in.histories.push_back(history_from_json(read_text_file(dir / "history.json")));
  if (fs::is_regular_file(dir / "transfer_matrix.csv")) in.matrices.push_back(dir / "transfer_matrix.csv");
  if (fs::is_directory(dir / "reports")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / "reports")) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) in.reports.push_back(report_from_json(read_text_file(p)));
  }
  if (depth == 0) return;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename() != "reports" && e.path().extension() != ".apf") {
      subdirs.push_back(e.path());
    }
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const fs::path& d : subdirs) scan_dir(d, in, depth - 1);
}

struct CsvMatrix {
  std::vector<std::string> cols;
  std::vector<std::string> rows;
  std::vector<std::vector<double>> values;
};

CsvMatrix read_matrix_csv(const fs::path& path) {
  std::istringstream is(read_text_file(path));
  CsvMatrix m;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) throw FormatError(path.string() + " is empty");
  auto header = split(line);
  if (header.empty() || header[0] != "patch") throw FormatError(path.string() + " lacks the patch header");
  m.cols.assign(header.begin() + 1, header.end());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw FormatError(path.string() + ": ragged row");
    m.rows.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
    m.values.push_back(std::move(row));
  }
  if (m.rows.empty() || m.rows[0] != "random") throw FormatError(path.string() + ": first row must be random");
  return m;
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  }
  return s;
}

int cmd_plot(const std::vector<std::string>& run_dirs, const std::string& out_flag, std::ostream& out) {
  if (run_dirs.empty()) throw ConfigError("plot needs at least one run directory");
  PlotInputs in;
  for (const std::string& d : run_dirs) {
    if (!fs::is_directory(d)) throw ConfigError("run directory does not exist: " + d);
    scan_dir(d, in, 2);
  }
  if (in.histories.empty() && in.reports.empty() && in.matrices.empty()) {
    throw MissingArtifacts("no history.json, reports/ or transfer_matrix.csv under the given run directories");
  }
  const fs::path dir = out_flag.empty() ? fs::path(run_dirs.front()) / "figures" : fs::path(out_flag);
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_text_file(dir / name, svg);
    written.push_back((dir / name).string());
  };

  if (!in.histories.empty()) {
    std::vector<Series> lines;
    std::map<std::string, int> seen;
    for (const TrainHistory& h : in.histories) {
      Series s{h.model.empty() ? "model" : h.model, {}, {}};
      if (seen[s.label]++) s.label += " #" + std::to_string(seen[s.label]);
      for (const EpochRecord& r : h.records) {
        s.x.push_back(r.epoch);
        s.y.push_back(r.eval_miou.value_or(std::nan("")));
      }
      lines.push_back(std::move(s));

      std::vector<Series> per_class;
      const std::size_t n_cls = h.records.empty() ? 0 : h.records.front().per_class_iou.size();
      for (std::size_t c = 0; c < n_cls; ++c) {
        Series cs{c < h.class_names.size() ? h.class_names[c] : "class_" + std::to_string(c), {}, {}};
        for (const EpochRecord& r : h.records) {
          cs.x.push_back(r.epoch);
          cs.y.push_back(c < r.per_class_iou.size() && r.per_class_iou[c] ? *r.per_class_iou[c] : std::nan(""));
        }
        per_class.push_back(std::move(cs));
      }
      emit("per_class_decay_" + safe_name(lines.back().label) + ".svg",
           line_chart_svg("Per-class IoU under attack: " + lines.back().label, "epoch", "IoU", per_class));
    }
    emit("miou_decay.svg", line_chart_svg("MIoU decay during patch training", "epoch", "MIoU", lines));
  }

  if (!in.matrices.empty()) {
    std::vector<BarGroup> groups;
    for (const fs::path& p : in.matrices) {
      const CsvMatrix m = read_matrix_csv(p);
      for (std::size_t c = 0; c < m.cols.size(); ++c) {
        BarGroup g{m.cols[c], {}, {}};
        for (std::size_t r = 1; r < m.rows.size(); ++r) {
          g.names.push_back(m.rows[r]);
          g.values.push_back(m.values[0][c] - m.values[r][c]);
        }
        groups.push_back(std::move(g));
      }
    }
    emit("transfer_drop_bars.svg", bar_chart_svg("MIoU drop vs random patch", "drop in MIoU", groups));
  }

  std::vector<Series> spread;
  for (const EvalReport& r : in.reports) {
    if (r.patch_tag == "random" || r.spread.flip_rate.empty()) continue;
    Series s{r.patch_tag + " -> " + r.model, {}, {}};
    for (std::size_t k = 0; k < r.spread.flip_rate.size(); ++k) {
      s.x.push_back(static_cast<double>(r.spread.bin_edges[k + 1]));
      s.y.push_back(r.spread.flip_rate[k]);
    }
    spread.push_back(std::move(s));
  }
  if (!spread.empty()) {
    emit("spread_profile.svg",
         line_chart_svg("Prediction flips vs distance from patch", "Chebyshev distance (px)", "flip rate", spread));
  }
  for (const std::string& w : written) out << w << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal adversarial patch training and evaluation for segmentation models", "patchforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "patchforge 0.1.0");

  CommonFlags pre_f, train_f, eval_f, transfer_f;
  auto* pre = app.add_subcommand("pretrain-toy", "train a toy segmentation model");
  add_common(pre, pre_f, false, true);
  auto* train = app.add_subcommand("train-patch", "optimise a universal patch against one model");
  add_common(train, train_f, false, true);
  auto* eval = app.add_subcommand("eval", "evaluate patches against models");
  add_common(eval, eval_f, true, false);
  auto* transfer = app.add_subcommand("transfer", "patches x models matrix with a random-patch baseline row");
  add_common(transfer, transfer_f, true, false);
  transfer->add_flag("--assert-diagonal", transfer_f.assert_diagonal,
                     "exit 1 unless every patch hurts its own model most");
  std::vector<std::string> plot_dirs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "render figures from run directories");
  plot->add_option("run_dirs", plot_dirs, "run directories")->required();
  plot->add_option("--out", plot_out, "figure directory (default: <first run dir>/figures)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*pre) return cmd_pretrain(pre_f, out, err);
    if (*train) return cmd_train_patch(train_f, out, err);
    if (*eval) return cmd_eval_like(eval_f, false, out, err);
    if (*transfer) return cmd_eval_like(transfer_f, true, out, err);
    if (*plot) return cmd_plot(plot_dirs, plot_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const UnknownModel& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const MissingArtifacts& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace patchforge::cli

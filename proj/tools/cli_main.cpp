// spoofdet command-line front end. Talks to the library exclusively through
// the C API in spoofdet/spoofdet.h.

#include "spoofdet/spoofdet.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

int exit_code_for(sd_status status) {
  switch (status) {
    case SD_OK: return kExitOk;
    case SD_ERR_IO: return kExitIo;
    case SD_ERR_INTERNAL: return kExitIo;
    case SD_ERR_PARSE: return kExitConfig;
    case SD_ERR_INVALID_ARGUMENT: return kExitConfig;
    case SD_ERR_INFEASIBLE: return kExitInfeasible;
  }
  return kExitIo;
}

struct CliError {
  int code;
  std::string message;
};

void check(sd_status status) {
  if (status != SD_OK) throw CliError{exit_code_for(status), sd_last_error()};
}

struct EnvHandle {
  sd_env* ptr = nullptr;
  ~EnvHandle() { sd_env_free(ptr); }
};

struct DatasetHandle {
  sd_dataset* ptr = nullptr;
  ~DatasetHandle() { sd_dataset_free(ptr); }
};

struct DetectorHandle {
  sd_detector* ptr = nullptr;
  ~DetectorHandle() { sd_detector_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { sd_string_free(ptr); }
};

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 1;
  std::string out = ".";
  int jobs = 1;
  std::string config_path;
};

// Scenario-config overrides collected from flags; only explicitly passed
// flags end up in the merged config, so the precedence is
// flags > config file > built-in defaults.
struct Overrides {
  std::optional<int> n_samples, estimates, pairs_train, pairs_val, pairs_test;
  std::optional<int> locations, clusters, trials, seeds, frames, epochs, batch, patience;
  std::optional<double> rate, pfa, lr, l1;
  std::optional<std::string> pcd, mode;
  std::vector<int> hidden, t_values, d_values;
  std::vector<double> speeds, rates;
  std::vector<std::string> pcd_kinds;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--n-samples", o.n_samples, "Samples per RSS estimate (N)");
  cmd->add_option("--estimates", o.estimates, "Estimates per location (0 = 4888/N)");
  cmd->add_option("--pairs-train", o.pairs_train, "Training pairs per class");
  cmd->add_option("--pairs-val", o.pairs_val, "Validation pairs per class");
  cmd->add_option("--pairs-test", o.pairs_test, "Test pairs per class");
  cmd->add_option("--locations", o.locations, "Training locations (D)");
  cmd->add_option("--clusters", o.clusters, "k-means clusters (C)");
  cmd->add_option("--trials", o.trials, "Monte Carlo trials per hypothesis");
  cmd->add_option("--seeds", o.seeds, "Outer Monte Carlo repetitions");
  cmd->add_option("--frames", o.frames, "Frames per sequence (T)");
  cmd->add_option("--rate", o.rate, "Frame rate, frames/s");
  cmd->add_option("--pfa", o.pfa, "Target false-alarm probability");
  cmd->add_option("--pcd", o.pcd, "Detector for SD experiments");
  cmd->add_option("--mode", o.mode, "Statistic mode: general or paper-literal");
  cmd->add_option("--hidden", o.hidden, "Hidden layer widths")->delimiter(',');
  cmd->add_option("--t-values", o.t_values, "Frame-count sweep")->delimiter(',');
  cmd->add_option("--d-values", o.d_values, "Location-count sweep")->delimiter(',');
  cmd->add_option("--speeds", o.speeds, "Speed sweep, m/s")->delimiter(',');
  cmd->add_option("--rates", o.rates, "Frame-rate sweep")->delimiter(',');
  cmd->add_option("--pcd-kinds", o.pcd_kinds, "Detectors to compare")->delimiter(',');
  cmd->add_option("--epochs", o.epochs, "Max training epochs");
  cmd->add_option("--batch", o.batch, "Mini-batch size");
  cmd->add_option("--patience", o.patience, "Early-stopping patience");
  cmd->add_option("--lr", o.lr, "Learning rate");
  cmd->add_option("--l1", o.l1, "L1 penalty coefficient");
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw CliError{kExitIo, "cannot open config file: " + path};
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw CliError{kExitConfig, std::string("config file: ") + e.what()};
  }
  if (!j.is_object()) throw CliError{kExitConfig, "config file must hold a JSON object"};
  return j;
}

json merged_config(const Common& common, const Overrides& o, const json& defaults) {
  json j = defaults;
  const json from_file = load_config_file(common.config_path);
  for (const auto& [key, value] : from_file.items()) j[key] = value;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  put("n_samples", o.n_samples);
  put("estimates_per_location", o.estimates);
  put("pairs_train", o.pairs_train);
  put("pairs_val", o.pairs_val);
  put("pairs_test", o.pairs_test);
  put("n_locations", o.locations);
  put("clusters", o.clusters);
  put("trials", o.trials);
  put("seeds", o.seeds);
  put("frame_count", o.frames);
  put("frame_rate", o.rate);
  put("target_pfa", o.pfa);
  put("pcd", o.pcd);
  put("mode", o.mode);
  put("max_epochs", o.epochs);
  put("batch_size", o.batch);
  put("patience", o.patience);
  put("learning_rate", o.lr);
  put("l1_coefficient", o.l1);
  if (!o.hidden.empty()) j["hidden"] = o.hidden;
  if (!o.t_values.empty()) j["frame_counts"] = o.t_values;
  if (!o.d_values.empty()) j["d_values"] = o.d_values;
  if (!o.speeds.empty()) j["speeds"] = o.speeds;
  if (!o.rates.empty()) j["frame_rates"] = o.rates;
  if (!o.pcd_kinds.empty()) j["pcd_kinds"] = o.pcd_kinds;
  j["master_seed"] = common.seed;
  j["jobs"] = common.jobs;
  return j;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw CliError{kExitIo, "cannot create output directory: " + out};
}

// Frames CSV: header f0,...,f{F-1}, one row per frame, linear RSS values.
std::pair<std::vector<double>, int> load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitIo, "cannot open frames file: " + path};
  std::string line;
  if (!std::getline(in, line)) throw CliError{kExitConfig, "frames file is empty: " + path};
  int features = 0;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok != "f" + std::to_string(features))
        throw CliError{kExitConfig, "unexpected frames header column: " + tok};
      ++features;
    }
  }
  if (features == 0) throw CliError{kExitConfig, "frames file has no feature columns"};
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    int cols = 0;
    while (std::getline(ss, tok, ',')) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw CliError{kExitConfig,
                       "malformed number in frames file line " + std::to_string(line_no)};
      }
      ++cols;
    }
    if (cols != features)
      throw CliError{kExitConfig,
                     "wrong column count in frames file line " + std::to_string(line_no)};
  }
  if (values.empty()) throw CliError{kExitConfig, "frames file has no rows: " + path};
  return {values, features};
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitIo, "cannot write file: " + path};
  out << body;
  if (!out) throw CliError{kExitIo, "failed writing file: " + path};
}

DatasetHandle open_or_generate_dataset(const std::string& dataset_path, const Common& common,
                                       const std::string& config) {
  DatasetHandle ds;
  if (!dataset_path.empty()) {
    check(sd_dataset_load(dataset_path.c_str(), &ds.ptr));
    return ds;
  }
  EnvHandle env;
  check(sd_env_create_default(common.seed, &env.ptr));
  check(sd_dataset_generate(env.ptr, config.c_str(), common.seed, &ds.ptr));
  return ds;
}

int cmd_gen_data(const Common& common, const Overrides& overrides) {
  ensure_out_dir(common.out);
  const std::string config = merged_config(common, overrides, json::object()).dump();
  EnvHandle env;
  check(sd_env_create_default(common.seed, &env.ptr));
  DatasetHandle ds;
  check(sd_dataset_generate(env.ptr, config.c_str(), common.seed, &ds.ptr));
  check(sd_env_save(env.ptr, (common.out + "/environment.json").c_str()));
  check(sd_dataset_save(ds.ptr, (common.out + "/dataset.csv").c_str()));
  int locations = 0, estimates = 0, features = 0;
  check(sd_dataset_info(ds.ptr, &locations, &estimates, &features));
  std::printf("wrote %s/dataset.csv: %d locations, %d estimates each, %d features\n",
              common.out.c_str(), locations, estimates, features);
  return kExitOk;
}

int cmd_train_pcd(const Common& common, const Overrides& overrides,
                  const std::string& dataset_path, const std::string& detector) {
  ensure_out_dir(common.out);
  const std::string config = merged_config(common, overrides, json::object()).dump();
  DatasetHandle ds;
  check(sd_dataset_load(dataset_path.c_str(), &ds.ptr));
  DetectorHandle det;
  OwnedString report;
  check(sd_detector_train(ds.ptr, detector.c_str(), config.c_str(), common.seed, &det.ptr,
                          &report.ptr));
  check(sd_detector_save(det.ptr, (common.out + "/model.json").c_str()));

  const json r = json::parse(report.ptr);
  std::ostringstream csv;
  csv << "epoch,train_loss,val_loss,val_accuracy\n";
  if (r.contains("history")) {
    const auto& h = r["history"];
    const auto& tl = h["train_loss"];
    for (std::size_t i = 0; i < tl.size(); ++i)
      csv << i << ',' << tl[i].get<double>() << ',' << h["val_loss"][i].get<double>() << ','
          << h["val_accuracy"][i].get<double>() << "\n";
  }
  write_text(common.out + "/report.csv", csv.str());
  write_text(common.out + "/report.json", r.dump(2) + "\n");
  std::printf("wrote %s/model.json (%s, train accuracy %.4f)\n", common.out.c_str(),
              detector.c_str(), r["train_accuracy"].get<double>());
  return kExitOk;
}

int cmd_eval_pcd(const Common& common, const std::string& dataset_path,
                 const std::string& model_path, int pairs) {
  DatasetHandle ds;
  check(sd_dataset_load(dataset_path.c_str(), &ds.ptr));
  DetectorHandle det;
  check(sd_detector_load(model_path.c_str(), &det.ptr));
  double accuracy = 0.0;
  check(sd_detector_eval(det.ptr, ds.ptr, pairs, common.seed, &accuracy));
  std::printf("accuracy %.4f over %d+%d pairs\n", accuracy, pairs, pairs);
  return kExitOk;
}

int cmd_detect(const Common& common, const std::string& frames_path,
               const std::string& model_path, double gamma, const std::string& mode) {
  DetectorHandle det;
  check(sd_detector_load(model_path.c_str(), &det.ptr));
  const auto [values, features] = load_frames(frames_path);
  const int t = static_cast<int>(values.size()) / features;
  OwnedString decision;
  check(sd_detect(det.ptr, values.data(), t, features, gamma, mode.c_str(), common.seed,
                  &decision.ptr));
  std::printf("%s\n", decision.ptr);
  return kExitOk;
}

json experiment_defaults(const std::string& kind) {
  json j = json::object();
  if (kind == "pcd-accuracy") return j;
  // Figure-protocol defaults for the sequence-level experiments.
  j["pairs_train"] = 3000;
  j["pairs_val"] = 1000;
  if (kind == "roc") {
    j["frame_count"] = 30;
    j["frame_rate"] = 100.0;
  } else if (kind == "speed") {
    j["frame_count"] = 20;
    j["frame_rates"] = std::vector<double>{10.0, 100.0};
    j["speeds"] = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0, 1.19};
  } else if (kind == "pcd-compare") {
    j["frame_rate"] = 10.0;
    j["frame_counts"] = std::vector<int>{10, 20, 30};
  }
  return j;
}

int cmd_experiment(const Common& common, const Overrides& overrides, const std::string& kind,
                   const std::string& dataset_path) {
  ensure_out_dir(common.out);
  const std::string config =
      merged_config(common, overrides, experiment_defaults(kind)).dump();
  DatasetHandle ds = open_or_generate_dataset(dataset_path, common, config);
  check(sd_experiment_run(ds.ptr, kind.c_str(), config.c_str(), common.out.c_str()));
  std::printf("experiment %s done; results in %s\n", kind.c_str(), common.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physical-layer spoofing-attack detection toolkit"};
  app.require_subcommand(1);
  // Global flags may appear after the subcommand name.
  app.fallthrough();

  Common common;
  app.add_option("--seed", common.seed, "Master random seed")->capture_default_str();
  app.add_option("--out", common.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker thread cap")->capture_default_str();
  app.add_option("--config", common.config_path, "JSON config file");

  Overrides overrides;

  auto* gen = app.add_subcommand("gen-data", "Generate environment and RSS dataset");
  add_override_flags(gen, overrides);

  auto* train = app.add_subcommand("train-pcd", "Train a position-change detector");
  std::string train_dataset, train_detector = "dnnc";
  train->add_option("--dataset", train_dataset, "Dataset CSV")->required();
  train->add_option("--detector", train_detector, "dnnc, dbc-l1, dbc-l2 or kmc")
      ->capture_default_str();
  add_override_flags(train, overrides);

  auto* eval = app.add_subcommand("eval-pcd", "Evaluate a detector on labeled pairs");
  std::string eval_dataset, eval_model;
  int eval_pairs = 500;
  eval->add_option("--dataset", eval_dataset, "Dataset CSV")->required();
  eval->add_option("--model", eval_model, "Model JSON")->required();
  eval->add_option("--pairs", eval_pairs, "Pairs per class")->capture_default_str();

  auto* detect = app.add_subcommand("detect", "Run spoofing detection on a frame sequence");
  std::string detect_frames, detect_model, detect_mode = "general";
  double detect_gamma = 0.0;
  detect->add_option("--frames", detect_frames, "Frames CSV")->required();
  detect->add_option("--model", detect_model, "Detector model JSON")->required();
  detect->add_option("--gamma", detect_gamma, "Decision threshold")->capture_default_str();
  detect->add_option("--mode", detect_mode, "general or paper-literal")->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  std::string exp_kind, exp_dataset;
  experiment->add_option("kind", exp_kind, "pcd-accuracy, roc, speed or pcd-compare")
      ->required()
      ->check(CLI::IsMember({"pcd-accuracy", "roc", "speed", "pcd-compare"}));
  experiment->add_option("--dataset", exp_dataset, "Dataset CSV (generated when omitted)");
  add_override_flags(experiment, overrides);

  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, overrides);
    if (train->parsed()) return cmd_train_pcd(common, overrides, train_dataset, train_detector);
    if (eval->parsed()) return cmd_eval_pcd(common, eval_dataset, eval_model, eval_pairs);
    if (detect->parsed())
      return cmd_detect(common, detect_frames, detect_model, detect_gamma, detect_mode);
    if (experiment->parsed()) return cmd_experiment(common, overrides, exp_kind, exp_dataset);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  }
  return kExitConfig;
}

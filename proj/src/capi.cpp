#include "spoofdet/spoofdet.h"

#include "core/channel_sim.hpp"
#include "core/dataset.hpp"
#include "core/harness.hpp"
#include "core/pcd.hpp"
#include "core/spoof_detector.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#define SD_EXPORT __attribute__((visibility("default")))

using nlohmann::json;

struct sd_env {
  spoofdet::MultipathModel model;
};

struct sd_dataset {
  spoofdet::LocationDataset data;
};

struct sd_detector {
  std::unique_ptr<spoofdet::PositionChangeDetector> det;
};

namespace {

thread_local std::string g_last_error = "no error";

sd_status fail(sd_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Exceptions from the core map onto the status enum here; everything
// unexpected becomes SD_ERR_INTERNAL.
template <typename Fn>
sd_status guarded(Fn&& fn) {
  try {
    fn();
    return SD_OK;
  } catch (const spoofdet::IoError& e) {
    return fail(SD_ERR_IO, e.what());
  } catch (const spoofdet::ParseError& e) {
    return fail(SD_ERR_PARSE, e.what());
  } catch (const spoofdet::SchemaError& e) {
    return fail(SD_ERR_PARSE, e.what());
  } catch (const spoofdet::InfeasibleError& e) {
    return fail(SD_ERR_INFEASIBLE, e.what());
  } catch (const json::exception& e) {
    return fail(SD_ERR_PARSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(SD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SD_ERR_INTERNAL, "unknown error");
  }
}

sd_status require(bool ok, const char* message) {
  return ok ? SD_OK : fail(SD_ERR_INVALID_ARGUMENT, message);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

spoofdet::ScenarioConfig parse_config(const char* config_json) {
  if (config_json == nullptr || config_json[0] == '\0') return {};
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::parse_error& e) {
    throw spoofdet::ParseError(std::string("config JSON: ") + e.what());
  }
  return spoofdet::ScenarioConfig::from_json(j);
}

spoofdet::MeasurementGrid default_grid() {
  // 52 locations on 4 lines, centered in the default 10 m x 6 m room.
  return spoofdet::generate_grid(4, 13, 1.5, 0.4, {2.6, 0.75, 1.2});
}

}  // namespace

extern "C" {

SD_EXPORT const char* sd_last_error(void) { return g_last_error.c_str(); }

SD_EXPORT void sd_string_free(char* s) { std::free(s); }

SD_EXPORT const char* sd_version(void) { return "1.0.0"; }

SD_EXPORT sd_status sd_env_create_default(uint64_t seed, sd_env** out) {
  if (sd_status s = require(out != nullptr, "out handle is NULL")) return s;
  return guarded([&] { *out = new sd_env{spoofdet::default_environment(seed)}; });
}

SD_EXPORT sd_status sd_env_load(const char* path, sd_env** out) {
  if (sd_status s = require(out != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { *out = new sd_env{spoofdet::load_environment(path)}; });
}

SD_EXPORT sd_status sd_env_save(const sd_env* env, const char* path) {
  if (sd_status s = require(env != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { spoofdet::save_environment(env->model, path); });
}

SD_EXPORT void sd_env_free(sd_env* env) { delete env; }

SD_EXPORT sd_status sd_dataset_generate(const sd_env* env, const char* config_json,
                                        uint64_t seed, sd_dataset** out) {
  if (sd_status s = require(env != nullptr && out != nullptr, "NULL argument")) return s;
  return guarded([&] {
    const spoofdet::ScenarioConfig cfg = parse_config(config_json);
    const int e = cfg.estimates_per_location > 0
                      ? cfg.estimates_per_location
                      : spoofdet::default_estimates_per_location(cfg.n_samples);
    *out = new sd_dataset{
        spoofdet::collect_dataset(env->model, default_grid(), e, cfg.n_samples, seed)};
  });
}

SD_EXPORT sd_status sd_dataset_load(const char* path, sd_dataset** out) {
  if (sd_status s = require(out != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { *out = new sd_dataset{spoofdet::load_dataset(path)}; });
}

SD_EXPORT sd_status sd_dataset_save(const sd_dataset* ds, const char* path) {
  if (sd_status s = require(ds != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { spoofdet::save_dataset(ds->data, path); });
}

SD_EXPORT sd_status sd_dataset_info(const sd_dataset* ds, int* n_locations, int* n_estimates,
                                    int* n_features) {
  if (sd_status s = require(ds != nullptr, "NULL dataset")) return s;
  if (n_locations != nullptr) *n_locations = ds->data.location_count();
  if (n_estimates != nullptr) *n_estimates = ds->data.estimates_per_location();
  if (n_features != nullptr) *n_features = ds->data.feature_count;
  return SD_OK;
}

SD_EXPORT void sd_dataset_free(sd_dataset* ds) { delete ds; }

SD_EXPORT sd_status sd_detector_train(const sd_dataset* ds, const char* kind,
                                      const char* config_json, uint64_t seed, sd_detector** out,
                                      char** report_json) {
  if (sd_status s = require(ds != nullptr && kind != nullptr && out != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    const spoofdet::ScenarioConfig cfg = parse_config(config_json);
    spoofdet::TrainedPcd trained =
        spoofdet::train_pcd(ds->data, spoofdet::pcd_kind_from_name(kind), cfg, seed);
    if (report_json != nullptr) {
      json r;
      r["kind"] = trained.detector->kind();
      r["train_accuracy"] = trained.train_accuracy;
      r["threshold"] = trained.detector->threshold();
      if (!trained.report.train_loss.empty()) {
        r["epochs_run"] = trained.report.train_loss.size();
        r["best_epoch"] = trained.report.best_epoch;
        r["val_accuracy"] = trained.report.val_accuracy.back();
        r["history"]["train_loss"] = trained.report.train_loss;
        r["history"]["val_loss"] = trained.report.val_loss;
        r["history"]["val_accuracy"] = trained.report.val_accuracy;
      }
      *report_json = dup_string(r.dump());
    }
    *out = new sd_detector{std::move(trained.detector)};
  });
}

SD_EXPORT sd_status sd_detector_load(const char* path, sd_detector** out) {
  if (sd_status s = require(out != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { *out = new sd_detector{spoofdet::load_detector(path)}; });
}

SD_EXPORT sd_status sd_detector_save(const sd_detector* det, const char* path) {
  if (sd_status s = require(det != nullptr && path != nullptr, "NULL argument")) return s;
  return guarded([&] { spoofdet::save_detector(*det->det, path); });
}

SD_EXPORT sd_status sd_detector_kind(const sd_detector* det, char** kind) {
  if (sd_status s = require(det != nullptr && kind != nullptr, "NULL argument")) return s;
  return guarded([&] { *kind = dup_string(det->det->kind()); });
}

SD_EXPORT sd_status sd_detector_eval(const sd_detector* det, const sd_dataset* ds, int pairs,
                                     uint64_t seed, double* accuracy) {
  if (sd_status s =
          require(det != nullptr && ds != nullptr && accuracy != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    spoofdet::Rng rng = spoofdet::make_rng(seed, 0x7e57ULL);
    const spoofdet::PairSet set = spoofdet::build_pairs(ds->data, pairs, rng);
    *accuracy = spoofdet::pair_accuracy(*det->det, set);
  });
}

SD_EXPORT sd_status sd_detector_statistic(const sd_detector* det, const double* r,
                                          const double* r_prime, int n_features, double* out) {
  if (sd_status s = require(det != nullptr && r != nullptr && r_prime != nullptr &&
                                out != nullptr,
                            "NULL argument"))
    return s;
  if (sd_status s = require(n_features > 0, "n_features must be positive")) return s;
  return guarded([&] {
    const spoofdet::Vec a = Eigen::Map<const spoofdet::Vec>(r, n_features);
    const spoofdet::Vec b = Eigen::Map<const spoofdet::Vec>(r_prime, n_features);
    *out = det->det->statistic(a, b);
  });
}

SD_EXPORT void sd_detector_free(sd_detector* det) { delete det; }

SD_EXPORT sd_status sd_detect(const sd_detector* det, const double* frames, int t,
                              int n_features, double threshold, const char* mode,
                              uint64_t louvain_seed, char** decision_json) {
  if (sd_status s = require(det != nullptr && frames != nullptr && mode != nullptr &&
                                decision_json != nullptr,
                            "NULL argument"))
    return s;
  if (sd_status s = require(t >= 2 && n_features > 0, "need t >= 2 frames and n_features > 0"))
    return s;
  return guarded([&] {
    std::vector<spoofdet::Vec> seq;
    seq.reserve(t);
    for (int i = 0; i < t; ++i)
      seq.push_back(Eigen::Map<const spoofdet::Vec>(frames + std::size_t(i) * n_features,
                                                    n_features));
    spoofdet::SdModel model;
    model.threshold = threshold;
    model.pcd = det->det.get();
    model.louvain_seed = louvain_seed;
    model.mode = spoofdet::sum_mode_from_name(mode);
    const spoofdet::SdDecision decision = spoofdet::detect(seq, model);
    *decision_json = dup_string(spoofdet::decision_to_json(decision, threshold).dump());
  });
}

SD_EXPORT sd_status sd_experiment_run(const sd_dataset* ds, const char* kind,
                                      const char* config_json, const char* out_dir) {
  if (sd_status s =
          require(ds != nullptr && kind != nullptr && out_dir != nullptr, "NULL argument"))
    return s;
  return guarded([&] {
    spoofdet::run_experiment(ds->data, kind, parse_config(config_json), out_dir);
  });
}

}  // extern "C"

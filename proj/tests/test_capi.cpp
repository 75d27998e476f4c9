#include "spoofdet/spoofdet.h"

#include "doctest.h"

#include <nlohmann/json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

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

// Small dataset shared by the API tests; generated once.
sd_dataset* shared_dataset() {
  static DatasetHandle ds = [] {
    EnvHandle env;
    REQUIRE(sd_env_create_default(7, &env.ptr) == SD_OK);
    DatasetHandle out;
    REQUIRE(sd_dataset_generate(env.ptr, "{\"n_samples\":8,\"estimates_per_location\":6}", 11,
                                &out.ptr) == SD_OK);
    return out;
  }();
  return ds.ptr;
}

}  // namespace

TEST_CASE("version and last-error are always available") {
  REQUIRE(sd_version() != nullptr);
  CHECK(std::strlen(sd_version()) > 0);
  REQUIRE(sd_last_error() != nullptr);
  sd_string_free(nullptr);  // must be a safe no-op
}

TEST_CASE("environment lifecycle and file round trip") {
  EnvHandle env;
  REQUIRE(sd_env_create_default(3, &env.ptr) == SD_OK);
  const std::string path = "test_capi_env.json";
  REQUIRE(sd_env_save(env.ptr, path.c_str()) == SD_OK);
  EnvHandle loaded;
  REQUIRE(sd_env_load(path.c_str(), &loaded.ptr) == SD_OK);
  std::filesystem::remove(path);

  CHECK(sd_env_create_default(3, nullptr) == SD_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(sd_last_error()) > 0);
  sd_env* out = nullptr;
  CHECK(sd_env_load("no_such_env.json", &out) == SD_ERR_IO);
  CHECK(out == nullptr);
  std::ofstream("test_capi_bad.json") << "{nope";
  CHECK(sd_env_load("test_capi_bad.json", &out) == SD_ERR_PARSE);
  std::filesystem::remove("test_capi_bad.json");
  CHECK(sd_env_save(nullptr, "x.json") == SD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("dataset generation, info, and file round trip") {
  sd_dataset* ds = shared_dataset();
  int locations = 0, estimates = 0, features = 0;
  REQUIRE(sd_dataset_info(ds, &locations, &estimates, &features) == SD_OK);
  CHECK(locations == 52);
  CHECK(estimates == 6);
  CHECK(features == 16);

  const std::string path = "test_capi_ds.csv";
  REQUIRE(sd_dataset_save(ds, path.c_str()) == SD_OK);
  DatasetHandle loaded;
  REQUIRE(sd_dataset_load(path.c_str(), &loaded.ptr) == SD_OK);
  int l2 = 0, e2 = 0, f2 = 0;
  REQUIRE(sd_dataset_info(loaded.ptr, &l2, &e2, &f2) == SD_OK);
  CHECK(l2 == locations);
  CHECK(e2 == estimates);
  CHECK(f2 == features);
  std::filesystem::remove(path);

  EnvHandle env;
  REQUIRE(sd_env_create_default(7, &env.ptr) == SD_OK);
  sd_dataset* out = nullptr;
  CHECK(sd_dataset_generate(env.ptr, "{\"bogus_key\":1}", 1, &out) == SD_ERR_PARSE);
  CHECK(sd_dataset_generate(env.ptr, "{broken", 1, &out) == SD_ERR_PARSE);
  CHECK(sd_dataset_generate(nullptr, "", 1, &out) == SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_dataset_load("no_such_ds.csv", &out) == SD_ERR_IO);
}

TEST_CASE("detector training, evaluation, statistics, persistence") {
  sd_dataset* ds = shared_dataset();
  DetectorHandle det;
  char* report = nullptr;
  const char* cfg = "{\"n_locations\":10,\"pairs_train\":80,\"pairs_val\":30}";
  REQUIRE(sd_detector_train(ds, "dbc-l2", cfg, 5, &det.ptr, &report) == SD_OK);
  REQUIRE(report != nullptr);
  auto j = nlohmann::json::parse(report);
  sd_string_free(report);
  CHECK(j.at("kind") == "dbc-l2");
  CHECK(j.at("train_accuracy").get<double>() > 0.5);
  CHECK(j.contains("threshold"));

  char* kind = nullptr;
  REQUIRE(sd_detector_kind(det.ptr, &kind) == SD_OK);
  CHECK(std::string(kind) == "dbc-l2");
  sd_string_free(kind);

  double acc = 0.0;
  REQUIRE(sd_detector_eval(det.ptr, ds, 100, 9, &acc) == SD_OK);
  CHECK(acc > 0.5);
  CHECK(acc <= 1.0);

  std::vector<double> r(16, 1.0), rp(16, 1.0);
  rp[0] = 10.0;
  double s_ab = 0.0, s_ba = 0.0;
  REQUIRE(sd_detector_statistic(det.ptr, r.data(), rp.data(), 16, &s_ab) == SD_OK);
  REQUIRE(sd_detector_statistic(det.ptr, rp.data(), r.data(), 16, &s_ba) == SD_OK);
  CHECK(s_ab == doctest::Approx(9.0));  // l2 norm of the single differing entry
  CHECK(s_ab == s_ba);

  const std::string path = "test_capi_det.json";
  REQUIRE(sd_detector_save(det.ptr, path.c_str()) == SD_OK);
  DetectorHandle loaded;
  REQUIRE(sd_detector_load(path.c_str(), &loaded.ptr) == SD_OK);
  double s2 = 0.0;
  REQUIRE(sd_detector_statistic(loaded.ptr, r.data(), rp.data(), 16, &s2) == SD_OK);
  CHECK(s2 == s_ab);
  std::filesystem::remove(path);

  sd_detector* out = nullptr;
  CHECK(sd_detector_train(ds, "mystery", "", 5, &out, nullptr) == SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_detector_train(nullptr, "dbc-l1", "", 5, &out, nullptr) == SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_detector_load("no_such_det.json", &out) == SD_ERR_IO);
  CHECK(sd_detector_statistic(det.ptr, r.data(), rp.data(), 0, &s2) == SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_detector_statistic(det.ptr, nullptr, rp.data(), 16, &s2) == SD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("sd_detect returns a decision document") {
  sd_dataset* ds = shared_dataset();
  DetectorHandle det;
  const char* cfg = "{\"n_locations\":10,\"pairs_train\":80,\"pairs_val\":30}";
  REQUIRE(sd_detector_train(ds, "dbc-l2", cfg, 5, &det.ptr, nullptr) == SD_OK);

  // Four frames alternating between two synthetic power profiles.
  std::vector<double> frames(4 * 16, 1.0);
  for (int f = 0; f < 16; ++f) {
    frames[1 * 16 + f] = 100.0;
    frames[3 * 16 + f] = 100.0;
  }
  char* decision = nullptr;
  REQUIRE(sd_detect(det.ptr, frames.data(), 4, 16, 0.5, "general", 3, &decision) == SD_OK);
  REQUIRE(decision != nullptr);
  auto j = nlohmann::json::parse(decision);
  sd_string_free(decision);
  CHECK(j.at("decision") == "ATTACK");
  CHECK(j.at("statistic").get<double>() > 0.5);
  CHECK(j.at("region_sequence").size() == 4);
  CHECK(j.at("weights").size() == 4);

  CHECK(sd_detect(det.ptr, frames.data(), 4, 16, 0.5, "sideways", 3, &decision) ==
        SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_detect(det.ptr, nullptr, 4, 16, 0.5, "general", 3, &decision) ==
        SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_detect(det.ptr, frames.data(), 1, 16, 0.5, "general", 3, &decision) ==
        SD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("experiment runner writes its outputs through the C API") {
  sd_dataset* ds = shared_dataset();
  const char* cfg =
      "{\"n_locations\":10,\"pairs_train\":80,\"pairs_val\":30,\"pcd\":\"dbc-l2\","
      "\"trials\":10,\"frame_count\":5,\"frame_rates\":[10],\"speeds\":[0],"
      "\"master_seed\":5}";
  const std::string dir = "test_capi_exp";
  REQUIRE(sd_experiment_run(ds, "speed", cfg, dir.c_str()) == SD_OK);
  for (const char* name : {"results.csv", "summary.csv", "config.json"})
    CHECK(std::filesystem::exists(dir + "/" + name));
  std::filesystem::remove_all(dir);

  CHECK(sd_experiment_run(ds, "mystery", cfg, dir.c_str()) == SD_ERR_INVALID_ARGUMENT);
  CHECK(sd_experiment_run(ds, "speed", "{bad", dir.c_str()) == SD_ERR_PARSE);
  CHECK(sd_experiment_run(nullptr, "speed", cfg, dir.c_str()) == SD_ERR_INVALID_ARGUMENT);
  std::filesystem::remove_all(dir);
}

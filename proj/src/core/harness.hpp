#pragma once

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/neuralnet.hpp"
#include "core/pcd.hpp"
#include "core/spoof_detector.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spoofdet {

struct TrajectorySpec {
  double speed_mps = 0.0;
  double frame_rate_hz = 10.0;  // frames per second
  int frame_count = 20;
};

// H0 trajectory: a uniformly chosen line, a uniform start point at distance
// >= v*T/R from both line ends, a uniform direction; each frame snaps to the
// nearest measurement location. Returns per-frame location indices.
std::vector<int> gen_trajectory_h0(const TrajectorySpec& spec, const MeasurementGrid& grid,
                                   Rng& rng);

// Frame n = a uniformly drawn stored estimate at its location (fresh draw per
// frame).
std::vector<Vec> realize_frames(const LocationDataset& dataset,
                                const std::vector<int>& location_indices, Rng& rng);

struct MergeResult {
  std::vector<Vec> frames;
  std::vector<int> owner;  // 0 or 1, diagnostics only; never seen by detectors
};

// Per frame, independently keep user 0's or user 1's frame with probability
// one half.
MergeResult merge_h1(const std::vector<Vec>& user0, const std::vector<Vec>& user1, Rng& rng);

// Deterministic variant with an explicit ownership mask (0 or 1 per frame).
MergeResult merge_with_mask(const std::vector<Vec>& user0, const std::vector<Vec>& user1,
                            const std::vector<int>& mask);

enum class PcdKind { Dnnc, DbcL1, DbcL2, Kmc };

PcdKind pcd_kind_from_name(const std::string& name);
std::string pcd_kind_name(PcdKind kind);

struct ScenarioConfig {
  int n_samples = 16;          // N, samples per estimate
  int estimates_per_location = 0;  // E; 0 -> floor(4888 / N)
  int pairs_train = 1250;      // P_tr
  int pairs_val = 150;         // P_val
  int pairs_test = 500;        // held-out evaluation pairs
  int n_locations = 40;        // D
  double train_fraction = 0.8;
  int clusters = 15;           // C, for KMC
  double target_pfa = 0.02;
  int frame_count = 30;        // T
  std::vector<int> frame_counts;   // T sweep (pcd-compare)
  double frame_rate = 100.0;   // frames/s
  std::vector<double> frame_rates;  // rate sweep (speed experiment)
  std::vector<double> speeds{0.0};  // m/s
  std::vector<int> d_values;   // D sweep (pcd-accuracy)
  int trials = 1000;           // Monte Carlo trials per hypothesis
  int seeds = 20;              // outer Monte Carlo repetitions
  std::uint64_t master_seed = 1;
  SumMode mode = SumMode::General;
  int jobs = 1;
  std::string pcd = "dnnc";
  std::vector<std::string> pcd_kinds{"dnnc", "dbc-l2", "dbc-l1", "kmc"};
  // DNNC training
  std::vector<int> hidden{512, 512, 512};
  double learning_rate = 1e-3;
  double l1_coefficient = 1e-5;
  int max_epochs = 200;
  int batch_size = 64;
  int patience = 20;

  DnncTrainConfig dnnc_config(std::uint64_t seed) const;
  nlohmann::json to_json() const;
  // Rejects unknown keys.
  static ScenarioConfig from_json(const nlohmann::json& j);
};

struct TrainedPcd {
  std::unique_ptr<PositionChangeDetector> detector;
  TrainReport report;        // empty for non-DNN detectors
  double train_accuracy = 0.0;  // accuracy at the calibrated threshold
};

// Picks D random locations, splits train/val, builds pair sets and trains the
// requested detector; `held_out` (optional) receives the 52-D test locations.
TrainedPcd train_pcd(const LocationDataset& full, PcdKind kind, const ScenarioConfig& cfg,
                     std::uint64_t seed, LocationDataset* held_out = nullptr);

// SD statistic of one frame sequence under a given PCD.
double sd_statistic_for_frames(const PositionChangeDetector& det, const std::vector<Vec>& frames,
                               SumMode mode, std::uint64_t louvain_seed);

struct AccuracyCell {
  int d = 0;
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;
};

struct AccuracyResult {
  PcdKind kind;
  std::vector<AccuracyCell> cells;
};

AccuracyResult run_pcd_accuracy(const LocationDataset& full, const ScenarioConfig& cfg,
                                PcdKind kind);

struct RocPoint {
  double pfa = 0.0;
  double pd = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by pfa, includes (0,0) and (1,1)
  double auc = 0.0;
  int trials_h0 = 0;
  int trials_h1 = 0;
};

RocCurve roc_from_stats(const std::vector<double>& h0, const std::vector<double>& h1);

double pd_at_pfa(const RocCurve& curve, double pfa);

struct RocSpeedResult {
  double speed = 0.0;
  RocCurve curve;
  std::vector<double> h0_stats;
  std::vector<double> h1_stats;
};

std::vector<RocSpeedResult> run_roc(const LocationDataset& full, const ScenarioConfig& cfg);

struct SpeedRow {
  double frame_rate = 0.0;
  double speed = 0.0;
  bool feasible = true;
  double gamma = 0.0;
  double pd = 0.0;
  double achieved_pfa = 0.0;
};

std::vector<SpeedRow> run_speed_sweep(const LocationDataset& full, const ScenarioConfig& cfg);

struct CompareCell {
  PcdKind kind;
  int frame_count = 0;
  std::vector<double> pd_per_seed;
  double pd_mean = 0.0;
  double achieved_pfa_mean = 0.0;
};

// Same trial streams (trajectories, estimate draws, merge masks) for every
// PCD kind; per-seed training on a shared location subset.
std::vector<CompareCell> run_pcd_comparison(const LocationDataset& full,
                                            const ScenarioConfig& cfg);

// Runs one of {pcd-accuracy, roc, speed, pcd-compare} and writes results.csv,
// summary.csv and config.json into out_dir.
void run_experiment(const LocationDataset& full, const std::string& kind,
                    const ScenarioConfig& cfg, const std::string& out_dir);

// Deterministic chunk-free parallel map: fn(i) for i in [0, n), at most `jobs`
// worker threads. Results must be written by index inside fn.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace spoofdet

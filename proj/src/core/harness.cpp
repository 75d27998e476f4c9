#include "core/harness.hpp"

#include "core/community.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace spoofdet {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < std::min(jobs, n); ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<int> gen_trajectory_h0(const TrajectorySpec& spec, const MeasurementGrid& grid,
                                   Rng& rng) {
  if (spec.frame_count < 1) throw std::invalid_argument("need at least one frame");
  if (spec.frame_rate_hz <= 0.0) throw std::invalid_argument("frame rate must be > 0");
  if (spec.speed_mps < 0.0) throw std::invalid_argument("speed must be >= 0");

  const int n_lines = grid.line_count();
  std::uniform_int_distribution<int> pick_line(0, n_lines - 1);
  const int line = pick_line(rng);
  const std::vector<int> members = grid.line_members(line);
  if (members.size() < 2) throw InfeasibleError("line has fewer than two measurement locations");

  const Point3 first = grid.locations[members.front()];
  const Point3 last = grid.locations[members.back()];
  const double span = distance(first, last);
  const Point3 unit = (last - first) * (1.0 / span);

  const double delta_x = spec.speed_mps * spec.frame_count / spec.frame_rate_hz;
  if (2.0 * delta_x > span)
    throw InfeasibleError("trajectory of length " + std::to_string(delta_x) +
                          " m does not fit on a line of span " + std::to_string(span) + " m");

  std::uniform_real_distribution<double> pick_start(delta_x, span - delta_x);
  const double start = pick_start(rng);
  std::uniform_int_distribution<int> pick_dir(0, 1);
  const double dir = pick_dir(rng) == 0 ? 1.0 : -1.0;

  std::vector<int> out;
  out.reserve(spec.frame_count);
  for (int n = 0; n < spec.frame_count; ++n) {
    const double t = n / spec.frame_rate_hz;
    const Point3 pos = first + unit * (start + dir * spec.speed_mps * t);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.size(); ++i) {
      const double d = distance(pos, grid.locations[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::vector<Vec> realize_frames(const LocationDataset& dataset,
                                const std::vector<int>& location_indices, Rng& rng) {
  const int e_count = dataset.estimates_per_location();
  std::uniform_int_distribution<int> pick(0, e_count - 1);
  std::vector<Vec> frames;
  frames.reserve(location_indices.size());
  for (int loc : location_indices) {
    if (loc < 0 || loc >= dataset.location_count())
      throw std::invalid_argument("location index out of range");
    frames.push_back(dataset.estimates[loc][pick(rng)]);
  }
  return frames;
}

MergeResult merge_with_mask(const std::vector<Vec>& user0, const std::vector<Vec>& user1,
                            const std::vector<int>& mask) {
  if (user0.size() != user1.size() || user0.size() != mask.size())
    throw std::invalid_argument("user frame sequences and mask must have equal length");
  MergeResult out;
  out.frames.reserve(user0.size());
  out.owner = mask;
  for (std::size_t i = 0; i < user0.size(); ++i) {
    if (mask[i] != 0 && mask[i] != 1) throw std::invalid_argument("mask entries must be 0 or 1");
    out.frames.push_back(mask[i] == 0 ? user0[i] : user1[i]);
  }
  return out;
}

MergeResult merge_h1(const std::vector<Vec>& user0, const std::vector<Vec>& user1, Rng& rng) {
  if (user0.size() != user1.size())
    throw std::invalid_argument("user frame sequences must have equal length");
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<int> mask(user0.size());
  for (int& m : mask) m = coin(rng);
  return merge_with_mask(user0, user1, mask);
}

PcdKind pcd_kind_from_name(const std::string& name) {
  if (name == "dnnc") return PcdKind::Dnnc;
  if (name == "dbc-l1") return PcdKind::DbcL1;
  if (name == "dbc-l2") return PcdKind::DbcL2;
  if (name == "kmc") return PcdKind::Kmc;
  throw std::invalid_argument("unknown PCD kind: " + name);
}

std::string pcd_kind_name(PcdKind kind) {
  switch (kind) {
    case PcdKind::Dnnc: return "dnnc";
    case PcdKind::DbcL1: return "dbc-l1";
    case PcdKind::DbcL2: return "dbc-l2";
    case PcdKind::Kmc: return "kmc";
  }
  throw std::invalid_argument("unknown PCD kind");
}

DnncTrainConfig ScenarioConfig::dnnc_config(std::uint64_t seed) const {
  DnncTrainConfig cfg;
  cfg.hidden_widths = hidden;
  cfg.train.learning_rate = static_cast<float>(learning_rate);
  cfg.train.l1_coefficient = static_cast<float>(l1_coefficient);
  cfg.train.max_epochs = max_epochs;
  cfg.train.batch_size = batch_size;
  cfg.train.early_stop_patience = patience;
  cfg.train.seed = seed;
  return cfg;
}

TrainedPcd train_pcd(const LocationDataset& full, PcdKind kind, const ScenarioConfig& cfg,
                     std::uint64_t seed, LocationDataset* held_out) {
  const int d_total = full.location_count();
  const int d = cfg.n_locations;
  if (d < 2 || d > d_total) throw std::invalid_argument("bad training location count");
  if (held_out != nullptr && d >= d_total)
    throw std::invalid_argument("no held-out locations left for evaluation");

  Rng rng = make_rng(seed, 0x1247ULL);
  std::vector<int> order(d_total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> chosen(order.begin(), order.begin() + d);
  std::sort(chosen.begin(), chosen.end());
  const LocationDataset selected = subset_dataset(full, chosen);
  if (held_out != nullptr) {
    std::vector<int> rest(order.begin() + d, order.end());
    std::sort(rest.begin(), rest.end());
    *held_out = subset_dataset(full, rest);
  }

  auto [train_ds, val_ds] = split_train_val(selected, cfg.train_fraction, rng);
  const PairSet train_pairs = build_pairs(train_ds, cfg.pairs_train, rng);
  const PairSet val_pairs = build_pairs(val_ds, cfg.pairs_val, rng);

  TrainedPcd out;
  if (kind == PcdKind::Dnnc) {
    DnncTrainResult r = train_dnnc(train_pairs, val_pairs, cfg.dnnc_config(seed));
    out.detector = std::move(r.detector);
    out.report = std::move(r.report);
    out.train_accuracy = r.calibration.accuracy;
    return out;
  }

  std::unique_ptr<PositionChangeDetector> det;
  if (kind == PcdKind::DbcL1) det = std::make_unique<DbcDetector>(1, 0.0);
  if (kind == PcdKind::DbcL2) det = std::make_unique<DbcDetector>(2, 0.0);
  if (kind == PcdKind::Kmc) {
    std::vector<Vec> vectors;
    for (const auto& per_loc : train_ds.estimates)
      vectors.insert(vectors.end(), per_loc.begin(), per_loc.end());
    det = std::make_unique<KmcDetector>(kmeans_fit(vectors, cfg.clusters, rng), 0.0);
  }

  // Threshold maximizes accuracy over the training pairs.
  std::vector<Vec> a, b;
  std::vector<int> labels;
  for (const LabeledPair& p : train_pairs.pairs) {
    a.push_back(p.first);
    b.push_back(p.second);
    labels.push_back(p.label == PairLabel::Different ? 1 : 0);
  }
  const Calibration cal = calibrate_threshold(det->statistic_batch(a, b), labels);
  det->set_threshold(cal.threshold);
  out.detector = std::move(det);
  out.train_accuracy = cal.accuracy;
  return out;
}

double sd_statistic_for_frames(const PositionChangeDetector& det, const std::vector<Vec>& frames,
                               SumMode mode, std::uint64_t louvain_seed) {
  const DecisionMatrix decisions = pairwise_decisions(det, frames);
  const FrameGraph graph = build_graph(decisions);
  const Partition partition = louvain(graph, louvain_seed);
  return sd_statistic(region_sequence(partition), mode).value;
}

AccuracyResult run_pcd_accuracy(const LocationDataset& full, const ScenarioConfig& cfg,
                                PcdKind kind) {
  std::vector<int> d_values = cfg.d_values;
  if (d_values.empty()) d_values = {10, 20, 30, 40, 45};
  for (int d : d_values)
    if (d >= full.location_count())
      throw std::invalid_argument("D must leave held-out locations (D < " +
                                  std::to_string(full.location_count()) + ")");

  AccuracyResult result;
  result.kind = kind;
  for (int d : d_values) {
    AccuracyCell cell;
    cell.d = d;
    cell.per_seed.resize(cfg.seeds);
    ScenarioConfig local = cfg;
    local.n_locations = d;
    parallel_for(cfg.seeds, cfg.jobs, [&](int s) {
      const std::uint64_t seed = derive_seed(cfg.master_seed, 1000 + s);
      LocationDataset held;
      const TrainedPcd trained = train_pcd(full, kind, local, seed, &held);
      Rng rng = make_rng(seed, 0x7e57ULL);
      const PairSet test_pairs = build_pairs(held, cfg.pairs_test, rng);
      cell.per_seed[s] = pair_accuracy(*trained.detector, test_pairs);
    });
    cell.mean = mean_of(cell.per_seed);
    cell.stddev = stddev_of(cell.per_seed);
    result.cells.push_back(std::move(cell));
  }
  return result;
}

RocCurve roc_from_stats(const std::vector<double>& h0, const std::vector<double>& h1) {
  if (h0.empty() || h1.empty()) throw std::invalid_argument("need trials under both hypotheses");
  std::vector<double> thresholds;
  thresholds.insert(thresholds.end(), h0.begin(), h0.end());
  thresholds.insert(thresholds.end(), h1.begin(), h1.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.trials_h0 = static_cast<int>(h0.size());
  curve.trials_h1 = static_cast<int>(h1.size());
  auto exceed_rate = [](const std::vector<double>& stats, double gamma) {
    int n = 0;
    for (double s : stats)
      if (s > gamma) ++n;
    return static_cast<double>(n) / stats.size();
  };
  curve.points.push_back({0.0, 0.0});
  for (double gamma : thresholds)
    curve.points.push_back({exceed_rate(h0, gamma), exceed_rate(h1, gamma)});
  curve.points.push_back({1.0, 1.0});
  std::sort(curve.points.begin(), curve.points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.pfa < b.pfa || (a.pfa == b.pfa && a.pd < b.pd);
  });
  curve.auc = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& p0 = curve.points[i - 1];
    const RocPoint& p1 = curve.points[i];
    curve.auc += (p1.pfa - p0.pfa) * (p0.pd + p1.pd) / 2.0;
  }
  return curve;
}

double pd_at_pfa(const RocCurve& curve, double pfa) {
  double best = 0.0;
  for (const RocPoint& p : curve.points)
    if (p.pfa <= pfa) best = std::max(best, p.pd);
  return best;
}

namespace {

// One H0 statistic; trial streams derived from (seed, trial) only.
double h0_trial(const LocationDataset& full, const PositionChangeDetector& det,
                const ScenarioConfig& cfg, const TrajectorySpec& traj, std::uint64_t seed,
                int trial) {
  Rng traj_rng = make_rng(seed, 8ULL * trial + 0);
  Rng frame_rng = make_rng(seed, 8ULL * trial + 1);
  const std::vector<int> locs = gen_trajectory_h0(traj, full.grid, traj_rng);
  const std::vector<Vec> frames = realize_frames(full, locs, frame_rng);
  return sd_statistic_for_frames(det, frames, cfg.mode, derive_seed(seed, 8ULL * trial + 7));
}

double h1_trial(const LocationDataset& full, const PositionChangeDetector& det,
                const ScenarioConfig& cfg, const TrajectorySpec& traj, std::uint64_t seed,
                int trial) {
  Rng traj0_rng = make_rng(seed, 8ULL * trial + 2);
  Rng frame0_rng = make_rng(seed, 8ULL * trial + 3);
  Rng traj1_rng = make_rng(seed, 8ULL * trial + 4);
  Rng frame1_rng = make_rng(seed, 8ULL * trial + 5);
  Rng mask_rng = make_rng(seed, 8ULL * trial + 6);
  const std::vector<int> locs0 = gen_trajectory_h0(traj, full.grid, traj0_rng);
  const std::vector<int> locs1 = gen_trajectory_h0(traj, full.grid, traj1_rng);
  const std::vector<Vec> frames0 = realize_frames(full, locs0, frame0_rng);
  const std::vector<Vec> frames1 = realize_frames(full, locs1, frame1_rng);
  const MergeResult merged = merge_h1(frames0, frames1, mask_rng);
  return sd_statistic_for_frames(det, merged.frames, cfg.mode,
                                 derive_seed(seed, 8ULL * trial + 7));
}

}  // namespace

std::vector<RocSpeedResult> run_roc(const LocationDataset& full, const ScenarioConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("need at least one trial per hypothesis");
  const TrainedPcd trained =
      train_pcd(full, pcd_kind_from_name(cfg.pcd), cfg, derive_seed(cfg.master_seed, 1));

  std::vector<RocSpeedResult> results;
  for (double speed : cfg.speeds) {
    TrajectorySpec traj{speed, cfg.frame_rate, cfg.frame_count};
    RocSpeedResult r;
    r.speed = speed;
    r.h0_stats.resize(cfg.trials);
    r.h1_stats.resize(cfg.trials);
    const std::uint64_t seed =
        derive_seed(cfg.master_seed, 2000 + static_cast<std::uint64_t>(speed * 1e6));
    parallel_for(cfg.trials, cfg.jobs, [&](int t) {
      r.h0_stats[t] = h0_trial(full, *trained.detector, cfg, traj, seed, t);
      r.h1_stats[t] = h1_trial(full, *trained.detector, cfg, traj, seed, t);
    });
    r.curve = roc_from_stats(r.h0_stats, r.h1_stats);
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<SpeedRow> run_speed_sweep(const LocationDataset& full, const ScenarioConfig& cfg) {
  if (cfg.speeds.empty()) throw std::invalid_argument("speed list must be non-empty");
  std::vector<double> rates = cfg.frame_rates;
  if (rates.empty()) rates = {10.0, 100.0};

  const TrainedPcd trained =
      train_pcd(full, pcd_kind_from_name(cfg.pcd), cfg, derive_seed(cfg.master_seed, 1));

  std::vector<SpeedRow> rows;
  for (double rate : rates) {
    for (double speed : cfg.speeds) {
      SpeedRow row;
      row.frame_rate = rate;
      row.speed = speed;
      TrajectorySpec traj{speed, rate, cfg.frame_count};
      const std::uint64_t seed = derive_seed(
          cfg.master_seed, 3000 + static_cast<std::uint64_t>(rate * 1000 + speed * 1e6));
      std::vector<double> h0(cfg.trials), h1(cfg.trials);
      try {
        parallel_for(cfg.trials, cfg.jobs, [&](int t) {
          h0[t] = h0_trial(full, *trained.detector, cfg, traj, seed, t);
          h1[t] = h1_trial(full, *trained.detector, cfg, traj, seed, t);
        });
      } catch (const InfeasibleError&) {
        row.feasible = false;
        rows.push_back(row);
        continue;
      }
      row.gamma = calibrate_threshold_h0(h0, cfg.target_pfa);
      int fa = 0, det_count = 0;
      for (double s : h0)
        if (s > row.gamma) ++fa;
      for (double s : h1)
        if (s > row.gamma) ++det_count;
      row.achieved_pfa = static_cast<double>(fa) / cfg.trials;
      row.pd = static_cast<double>(det_count) / cfg.trials;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<CompareCell> run_pcd_comparison(const LocationDataset& full,
                                            const ScenarioConfig& cfg) {
  std::vector<int> t_values = cfg.frame_counts;
  if (t_values.empty()) t_values = {10, 20, 30};
  std::vector<PcdKind> kinds;
  for (const std::string& name : cfg.pcd_kinds) kinds.push_back(pcd_kind_from_name(name));

  std::vector<CompareCell> cells;
  for (PcdKind kind : kinds)
    for (int t : t_values) {
      CompareCell c;
      c.kind = kind;
      c.frame_count = t;
      c.pd_per_seed.assign(cfg.seeds, 0.0);
      cells.push_back(std::move(c));
    }
  auto cell_at = [&](PcdKind kind, int t) -> CompareCell& {
    for (CompareCell& c : cells)
      if (c.kind == kind && c.frame_count == t) return c;
    throw std::logic_error("missing comparison cell");
  };

  std::vector<double> pfa_acc(cells.size(), 0.0);
  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, 4000 + s);

    std::vector<std::unique_ptr<PositionChangeDetector>> detectors;
    for (PcdKind kind : kinds)
      detectors.push_back(train_pcd(full, kind, cfg, seed).detector);

    for (int t : t_values) {
      TrajectorySpec traj{cfg.speeds.front(), cfg.frame_rate, t};
      const std::uint64_t trial_seed = derive_seed(seed, 100 + t);
      // Frames are generated once per trial and shared by every detector.
      std::vector<std::vector<double>> h0(kinds.size(), std::vector<double>(cfg.trials));
      std::vector<std::vector<double>> h1(kinds.size(), std::vector<double>(cfg.trials));
      parallel_for(cfg.trials, cfg.jobs, [&](int trial) {
        Rng traj_rng = make_rng(trial_seed, 8ULL * trial + 0);
        Rng frame_rng = make_rng(trial_seed, 8ULL * trial + 1);
        const std::vector<int> locs = gen_trajectory_h0(traj, full.grid, traj_rng);
        const std::vector<Vec> frames_h0 = realize_frames(full, locs, frame_rng);

        Rng traj0_rng = make_rng(trial_seed, 8ULL * trial + 2);
        Rng frame0_rng = make_rng(trial_seed, 8ULL * trial + 3);
        Rng traj1_rng = make_rng(trial_seed, 8ULL * trial + 4);
        Rng frame1_rng = make_rng(trial_seed, 8ULL * trial + 5);
        Rng mask_rng = make_rng(trial_seed, 8ULL * trial + 6);
        const std::vector<int> locs0 = gen_trajectory_h0(traj, full.grid, traj0_rng);
        const std::vector<int> locs1 = gen_trajectory_h0(traj, full.grid, traj1_rng);
        const MergeResult merged = merge_h1(realize_frames(full, locs0, frame0_rng),
                                            realize_frames(full, locs1, frame1_rng), mask_rng);
        const std::uint64_t louvain_seed = derive_seed(trial_seed, 8ULL * trial + 7);
        for (std::size_t k = 0; k < kinds.size(); ++k) {
          h0[k][trial] = sd_statistic_for_frames(*detectors[k], frames_h0, cfg.mode, louvain_seed);
          h1[k][trial] =
              sd_statistic_for_frames(*detectors[k], merged.frames, cfg.mode, louvain_seed);
        }
      });
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const double gamma = calibrate_threshold_h0(h0[k], cfg.target_pfa);
        int fa = 0, det_count = 0;
        for (double v : h0[k])
          if (v > gamma) ++fa;
        for (double v : h1[k])
          if (v > gamma) ++det_count;
        CompareCell& cell = cell_at(kinds[k], t);
        cell.pd_per_seed[s] = static_cast<double>(det_count) / cfg.trials;
        cell.achieved_pfa_mean += static_cast<double>(fa) / cfg.trials / cfg.seeds;
      }
    }
  }
  for (CompareCell& cell : cells) cell.pd_mean = mean_of(cell.pd_per_seed);
  return cells;
}

nlohmann::json ScenarioConfig::to_json() const {
  json j;
  j["n_samples"] = n_samples;
  j["estimates_per_location"] = estimates_per_location;
  j["pairs_train"] = pairs_train;
  j["pairs_val"] = pairs_val;
  j["pairs_test"] = pairs_test;
  j["n_locations"] = n_locations;
  j["train_fraction"] = train_fraction;
  j["clusters"] = clusters;
  j["target_pfa"] = target_pfa;
  j["frame_count"] = frame_count;
  j["frame_counts"] = frame_counts;
  j["frame_rate"] = frame_rate;
  j["frame_rates"] = frame_rates;
  j["speeds"] = speeds;
  j["d_values"] = d_values;
  j["trials"] = trials;
  j["seeds"] = seeds;
  j["master_seed"] = master_seed;
  j["mode"] = sum_mode_name(mode);
  j["jobs"] = jobs;
  j["pcd"] = pcd;
  j["pcd_kinds"] = pcd_kinds;
  j["hidden"] = hidden;
  j["learning_rate"] = learning_rate;
  j["l1_coefficient"] = l1_coefficient;
  j["max_epochs"] = max_epochs;
  j["batch_size"] = batch_size;
  j["patience"] = patience;
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  static const std::set<std::string> known = {
      "n_samples",   "estimates_per_location",
      "pairs_train", "pairs_val",
      "pairs_test",  "n_locations",
      "train_fraction", "clusters",
      "target_pfa",  "frame_count",
      "frame_counts", "frame_rate",
      "frame_rates", "speeds",
      "d_values",    "trials",
      "seeds",       "master_seed",
      "mode",        "jobs",
      "pcd",         "pcd_kinds",
      "hidden",      "learning_rate", "l1_coefficient",
      "max_epochs",  "batch_size",
      "patience"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw SchemaError("unknown config key: " + key);

  ScenarioConfig cfg;
  try {
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    cfg.estimates_per_location = j.value("estimates_per_location", cfg.estimates_per_location);
    cfg.pairs_train = j.value("pairs_train", cfg.pairs_train);
    cfg.pairs_val = j.value("pairs_val", cfg.pairs_val);
    cfg.pairs_test = j.value("pairs_test", cfg.pairs_test);
    cfg.n_locations = j.value("n_locations", cfg.n_locations);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.clusters = j.value("clusters", cfg.clusters);
    cfg.target_pfa = j.value("target_pfa", cfg.target_pfa);
    cfg.frame_count = j.value("frame_count", cfg.frame_count);
    cfg.frame_counts = j.value("frame_counts", cfg.frame_counts);
    cfg.frame_rate = j.value("frame_rate", cfg.frame_rate);
    cfg.frame_rates = j.value("frame_rates", cfg.frame_rates);
    cfg.speeds = j.value("speeds", cfg.speeds);
    cfg.d_values = j.value("d_values", cfg.d_values);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.mode = sum_mode_from_name(j.value("mode", sum_mode_name(cfg.mode)));
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.pcd = j.value("pcd", cfg.pcd);
    cfg.pcd_kinds = j.value("pcd_kinds", cfg.pcd_kinds);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.l1_coefficient = j.value("l1_coefficient", cfg.l1_coefficient);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.patience = j.value("patience", cfg.patience);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad config value: ") + e.what());
  }
  if (!(cfg.target_pfa > 0.0 && cfg.target_pfa < 1.0))
    throw SchemaError("target_pfa must be in (0, 1)");
  if (cfg.trials < 1 || cfg.seeds < 1 || cfg.n_samples < 1)
    throw SchemaError("counts must be positive");
  if (cfg.hidden.empty()) throw SchemaError("hidden layer list must be non-empty");
  for (int h : cfg.hidden)
    if (h < 1) throw SchemaError("hidden layer widths must be positive");
  pcd_kind_from_name(cfg.pcd);
  for (const std::string& k : cfg.pcd_kinds) pcd_kind_from_name(k);
  return cfg;
}

namespace {

struct LongRow {
  std::string experiment;
  int trial = 0;
  std::string param;
  double value = 0.0;
};

struct SummaryRow {
  std::string experiment;
  std::string param;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

void write_long_csv(const std::string& path, const std::vector<LongRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write results file: " + path);
  out << "experiment,trial,param,value\n";
  for (const LongRow& r : rows)
    out << r.experiment << ',' << r.trial << ',' << r.param << ',' << fmt_double(r.value) << "\n";
  if (!out) throw IoError("failed writing results file: " + path);
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write summary file: " + path);
  out << "experiment,param,mean,std,count\n";
  for (const SummaryRow& r : rows)
    out << r.experiment << ',' << r.param << ',' << fmt_double(r.mean) << ','
        << fmt_double(r.stddev) << ',' << r.count << "\n";
  if (!out) throw IoError("failed writing summary file: " + path);
}

void write_config_echo(const ScenarioConfig& cfg, const std::string& kind,
                       const std::string& out_dir) {
  json j = cfg.to_json();
  j["experiment"] = kind;
  j["timestamp"] = static_cast<long long>(std::time(nullptr));
  std::ofstream out(out_dir + "/config.json");
  if (!out) throw IoError("cannot write config echo in: " + out_dir);
  out << j.dump(2) << "\n";
}

}  // namespace

void run_experiment(const LocationDataset& full, const std::string& kind,
                    const ScenarioConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<LongRow> rows;
  std::vector<SummaryRow> summary;

  if (kind == "pcd-accuracy") {
    for (const std::string& name : cfg.pcd_kinds) {
      const AccuracyResult res = run_pcd_accuracy(full, cfg, pcd_kind_from_name(name));
      for (const AccuracyCell& cell : res.cells) {
        const std::string param =
            "accuracy[kind=" + name + ";d=" + std::to_string(cell.d) + "]";
        for (std::size_t s = 0; s < cell.per_seed.size(); ++s)
          rows.push_back({kind, static_cast<int>(s), param, cell.per_seed[s]});
        summary.push_back({kind, param, cell.mean, cell.stddev,
                           static_cast<int>(cell.per_seed.size())});
      }
    }
  } else if (kind == "roc") {
    const std::vector<RocSpeedResult> res = run_roc(full, cfg);
    for (const RocSpeedResult& r : res) {
      const std::string tag = "[speed=" + fmt_double(r.speed) + "]";
      for (int t = 0; t < static_cast<int>(r.h0_stats.size()); ++t)
        rows.push_back({kind, t, "h0_stat" + tag, r.h0_stats[t]});
      for (int t = 0; t < static_cast<int>(r.h1_stats.size()); ++t)
        rows.push_back({kind, t, "h1_stat" + tag, r.h1_stats[t]});
      summary.push_back({kind, "auc" + tag, r.curve.auc, 0.0, cfg.trials});
      summary.push_back(
          {kind, "pd_at_pfa0.1" + tag, pd_at_pfa(r.curve, 0.1), 0.0, cfg.trials});
      int t = 0;
      for (const RocPoint& p : r.curve.points) {
        rows.push_back({kind, t, "roc_pfa" + tag, p.pfa});
        rows.push_back({kind, t, "roc_pd" + tag, p.pd});
        ++t;
      }
    }
  } else if (kind == "speed") {
    const std::vector<SpeedRow> res = run_speed_sweep(full, cfg);
    int t = 0;
    for (const SpeedRow& r : res) {
      const std::string tag =
          "[rate=" + fmt_double(r.frame_rate) + ";speed=" + fmt_double(r.speed) + "]";
      rows.push_back({kind, t, "feasible" + tag, r.feasible ? 1.0 : 0.0});
      if (r.feasible) {
        rows.push_back({kind, t, "pd" + tag, r.pd});
        rows.push_back({kind, t, "gamma" + tag, r.gamma});
        rows.push_back({kind, t, "achieved_pfa" + tag, r.achieved_pfa});
        summary.push_back({kind, "pd" + tag, r.pd, 0.0, cfg.trials});
      } else {
        summary.push_back({kind, "infeasible" + tag, 1.0, 0.0, 0});
      }
      ++t;
    }
  } else if (kind == "pcd-compare") {
    const std::vector<CompareCell> res = run_pcd_comparison(full, cfg);
    for (const CompareCell& cell : res) {
      const std::string param = "pd[kind=" + pcd_kind_name(cell.kind) +
                                ";T=" + std::to_string(cell.frame_count) + "]";
      for (std::size_t s = 0; s < cell.pd_per_seed.size(); ++s)
        rows.push_back({kind, static_cast<int>(s), param, cell.pd_per_seed[s]});
      summary.push_back({kind, param, cell.pd_mean, stddev_of(cell.pd_per_seed),
                         static_cast<int>(cell.pd_per_seed.size())});
    }
  } else {
    throw std::invalid_argument("unknown experiment kind: " + kind);
  }

  write_long_csv(out_dir + "/results.csv", rows);
  write_summary_csv(out_dir + "/summary.csv", summary);
  write_config_echo(cfg, kind, out_dir);
}

}  // namespace spoofdet

#pragma once

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/neuralnet.hpp"

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <string>
#include <vector>

namespace spoofdet {

inline constexpr double kDefaultDbFloor = 1e-15;

// [10*log10(max(r,eps)), 10*log10(max(r',eps)), difference of the two dB
// blocks]. The third block is the sign-carrying dB difference.
Vec preprocess(const Vec& r, const Vec& r_prime, double eps = kDefaultDbFloor);

// Symmetric T x T decision matrix; same(i, j) true iff the detector judged
// frames i and j to come from one location. Diagonal is true.
struct DecisionMatrix {
  int n = 0;
  std::vector<std::uint8_t> cells;

  bool same(int i, int j) const { return cells[static_cast<std::size_t>(i) * n + j] != 0; }
  void set(int i, int j, bool v) {
    cells[static_cast<std::size_t>(i) * n + j] = v;
    cells[static_cast<std::size_t>(j) * n + i] = v;
  }
};

// Decide CHANGED iff statistic(r, r') > threshold. Statistics are symmetric
// in their arguments for every implementation.
class PositionChangeDetector {
 public:
  virtual ~PositionChangeDetector() = default;

  virtual double statistic(const Vec& r, const Vec& r_prime) const = 0;
  virtual std::vector<double> statistic_batch(const std::vector<Vec>& a,
                                              const std::vector<Vec>& b) const;

  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  bool changed(const Vec& r, const Vec& r_prime) const {
    return statistic(r, r_prime) > threshold_;
  }

  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;

 protected:
  double threshold_ = 0.0;
};

class DnncDetector : public PositionChangeDetector {
 public:
  DnncDetector(Network<float> net, double threshold, double db_floor = kDefaultDbFloor);

  // (g(r,r') + g(r',r)) / 2 with g the raw network logit on preprocessed input.
  double statistic(const Vec& r, const Vec& r_prime) const override;
  std::vector<double> statistic_batch(const std::vector<Vec>& a,
                                      const std::vector<Vec>& b) const override;

  std::string kind() const override { return "dnnc"; }
  nlohmann::json to_json() const override;

  const Network<float>& network() const { return net_; }
  double db_floor() const { return db_floor_; }

 private:
  Network<float> net_;
  double db_floor_;
};

class DbcDetector : public PositionChangeDetector {
 public:
  DbcDetector(int norm_order, double threshold);

  double statistic(const Vec& r, const Vec& r_prime) const override;

  std::string kind() const override { return norm_order_ == 1 ? "dbc-l1" : "dbc-l2"; }
  nlohmann::json to_json() const override;
  int norm_order() const { return norm_order_; }

 private:
  int norm_order_;
};

class KmcDetector : public PositionChangeDetector {
 public:
  KmcDetector(Mat centroids, double threshold);

  // l2 distance between the centroid-distance profiles of r and r'.
  double statistic(const Vec& r, const Vec& r_prime) const override;

  std::string kind() const override { return "kmc"; }
  nlohmann::json to_json() const override;
  const Mat& centroids() const { return centroids_; }

 private:
  Vec centroid_distances(const Vec& v) const;
  Mat centroids_;  // C x F
};

// Lloyd iterations from C distinct random seed points until the assignment
// reaches a fixpoint or 300 iterations; an emptied cluster is re-seeded to the
// point farthest from its assigned centroid.
Mat kmeans_fit(const std::vector<Vec>& vectors, int c, Rng& rng);

struct Calibration {
  double threshold = 0.0;
  double accuracy = 0.0;
};

// Threshold maximizing the accuracy of "CHANGED iff s > tau" over candidate
// thresholds (midpoints of consecutive distinct statistics plus +-inf
// sentinels); ties resolved toward the smallest tau. labels: 1 = CHANGED.
Calibration calibrate_threshold(const std::vector<double>& statistics,
                                const std::vector<int>& labels);

struct DnncTrainConfig {
  std::vector<int> hidden_widths{512, 512, 512};
  float leaky_slope = 0.01f;
  double db_floor = kDefaultDbFloor;
  TrainConfig<float> train;
};

struct DnncTrainResult {
  std::unique_ptr<DnncDetector> detector;
  TrainReport report;
  Calibration calibration;
};

// Trains the auxiliary logit on both orientations of every pair (SAME -> 0,
// DIFFERENT -> 1); the threshold is calibrated on the symmetrized statistic
// over the validation pairs.
DnncTrainResult train_dnnc(const PairSet& train_pairs, const PairSet& val_pairs,
                           const DnncTrainConfig& cfg);

double pair_accuracy(const PositionChangeDetector& det, const PairSet& pairs);

DecisionMatrix pairwise_decisions(const PositionChangeDetector& det,
                                  const std::vector<Vec>& frames);

void save_detector(const PositionChangeDetector& det, const std::string& path);
std::unique_ptr<PositionChangeDetector> load_detector(const std::string& path);
std::unique_ptr<PositionChangeDetector> detector_from_json(const nlohmann::json& j);

}  // namespace spoofdet

#include "core/pcd.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace spoofdet {

using nlohmann::json;

Vec preprocess(const Vec& r, const Vec& r_prime, double eps) {
  if (r.size() != r_prime.size()) throw std::invalid_argument("RSS vector length mismatch");
  const Eigen::Index f = r.size();
  Vec out(3 * f);
  for (Eigen::Index i = 0; i < f; ++i) {
    const double a = 10.0 * std::log10(std::max(r(i), eps));
    const double b = 10.0 * std::log10(std::max(r_prime(i), eps));
    out(i) = a;
    out(f + i) = b;
    out(2 * f + i) = a - b;
  }
  return out;
}

std::vector<double> PositionChangeDetector::statistic_batch(const std::vector<Vec>& a,
                                                            const std::vector<Vec>& b) const {
  if (a.size() != b.size()) throw std::invalid_argument("batch size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = statistic(a[i], b[i]);
  return out;
}

DnncDetector::DnncDetector(Network<float> net, double threshold, double db_floor)
    : net_(std::move(net)), db_floor_(db_floor) {
  if (net_.input_width() % 3 != 0)
    throw std::invalid_argument("DNNC network input width must be 3F");
  threshold_ = threshold;
}

double DnncDetector::statistic(const Vec& r, const Vec& r_prime) const {
  const Eigen::VectorXf fwd = preprocess(r, r_prime, db_floor_).cast<float>();
  const Eigen::VectorXf rev = preprocess(r_prime, r, db_floor_).cast<float>();
  const double g_fwd = net_.forward(fwd);
  const double g_rev = net_.forward(rev);
  return (g_fwd + g_rev) / 2.0;
}

std::vector<double> DnncDetector::statistic_batch(const std::vector<Vec>& a,
                                                  const std::vector<Vec>& b) const {
  if (a.size() != b.size()) throw std::invalid_argument("batch size mismatch");
  if (a.empty()) return {};
  const Eigen::Index width = net_.input_width();
  Eigen::MatrixXf x(2 * a.size(), width);
  for (std::size_t i = 0; i < a.size(); ++i) {
    x.row(2 * i) = preprocess(a[i], b[i], db_floor_).cast<float>().transpose();
    x.row(2 * i + 1) = preprocess(b[i], a[i], db_floor_).cast<float>().transpose();
  }
  const Eigen::VectorXf logits = net_.forward_batch(x);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = (static_cast<double>(logits(2 * i)) + static_cast<double>(logits(2 * i + 1))) / 2.0;
  return out;
}

json DnncDetector::to_json() const {
  json j = network_to_json(net_);
  j["kind"] = "dnnc";
  j["threshold"] = threshold_;
  j["epsilon_floor"] = db_floor_;
  return j;
}

DbcDetector::DbcDetector(int norm_order, double threshold) : norm_order_(norm_order) {
  if (norm_order_ != 1 && norm_order_ != 2)
    throw std::invalid_argument("DBC norm order must be 1 or 2");
  threshold_ = threshold;
}

double DbcDetector::statistic(const Vec& r, const Vec& r_prime) const {
  if (r.size() != r_prime.size()) throw std::invalid_argument("RSS vector length mismatch");
  const Vec diff = r - r_prime;
  return norm_order_ == 1 ? diff.lpNorm<1>() : diff.norm();
}

json DbcDetector::to_json() const {
  return json{{"kind", "dbc"}, {"q", norm_order_}, {"threshold", threshold_}};
}

KmcDetector::KmcDetector(Mat centroids, double threshold) : centroids_(std::move(centroids)) {
  if (centroids_.rows() < 1) throw std::invalid_argument("KMC needs at least one centroid");
  if (!centroids_.allFinite()) throw std::invalid_argument("KMC centroids must be finite");
  threshold_ = threshold;
}

Vec KmcDetector::centroid_distances(const Vec& v) const {
  Vec out(centroids_.rows());
  for (Eigen::Index c = 0; c < centroids_.rows(); ++c)
    out(c) = (v - centroids_.row(c).transpose()).norm();
  return out;
}

double KmcDetector::statistic(const Vec& r, const Vec& r_prime) const {
  if (r.size() != centroids_.cols() || r_prime.size() != centroids_.cols())
    throw std::invalid_argument("RSS vector length does not match centroids");
  return (centroid_distances(r) - centroid_distances(r_prime)).norm();
}

json KmcDetector::to_json() const {
  json j;
  j["kind"] = "kmc";
  j["threshold"] = threshold_;
  j["rows"] = centroids_.rows();
  j["cols"] = centroids_.cols();
  std::vector<double> flat;
  flat.reserve(centroids_.size());
  for (Eigen::Index r = 0; r < centroids_.rows(); ++r)
    for (Eigen::Index c = 0; c < centroids_.cols(); ++c) flat.push_back(centroids_(r, c));
  j["centroids"] = std::move(flat);
  return j;
}

Mat kmeans_fit(const std::vector<Vec>& vectors, int c, Rng& rng) {
  if (c < 1) throw std::invalid_argument("cluster count must be >= 1");
  if (vectors.empty()) throw std::invalid_argument("no vectors to cluster");
  const Eigen::Index dim = vectors.front().size();

  // Seed from c distinct vectors.
  std::vector<int> order(vectors.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Mat centroids(c, dim);
  int placed = 0;
  for (int idx : order) {
    bool duplicate = false;
    for (int k = 0; k < placed; ++k)
      if ((centroids.row(k).transpose() - vectors[idx]).norm() == 0.0) {
        duplicate = true;
        break;
      }
    if (!duplicate) centroids.row(placed++) = vectors[idx].transpose();
    if (placed == c) break;
  }
  if (placed < c) throw std::invalid_argument("fewer distinct vectors than clusters");

  std::vector<int> assignment(vectors.size(), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool moved = false;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < c; ++k) {
        const double d = (vectors[i] - centroids.row(k).transpose()).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        moved = true;
      }
    }
    if (!moved) break;

    Mat sums = Mat::Zero(c, dim);
    std::vector<int> counts(c, 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      sums.row(assignment[i]) += vectors[i].transpose();
      ++counts[assignment[i]];
    }
    for (int k = 0; k < c; ++k) {
      if (counts[k] > 0) {
        centroids.row(k) = sums.row(k) / counts[k];
      } else {
        // Re-seed an emptied cluster to the point farthest from its centroid.
        double far_d = -1.0;
        std::size_t far_i = 0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
          const double d =
              (vectors[i] - centroids.row(assignment[i]).transpose()).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centroids.row(k) = vectors[far_i].transpose();
      }
    }
  }
  return centroids;
}

Calibration calibrate_threshold(const std::vector<double>& statistics,
                                const std::vector<int>& labels) {
  if (statistics.size() != labels.size())
    throw std::invalid_argument("statistics/labels length mismatch");
  const int n = static_cast<int>(statistics.size());
  const int n_changed = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
  if (n_changed == 0 || n_changed == n)
    throw std::invalid_argument("degenerate calibration: both labels must be present");

  std::vector<double> distinct(statistics);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back((distinct[i] + distinct[i + 1]) / 2.0);
  candidates.push_back(std::numeric_limits<double>::infinity());

  Calibration best;
  best.accuracy = -1.0;
  for (double tau : candidates) {
    int correct = 0;
    for (int i = 0; i < n; ++i)
      if ((statistics[i] > tau ? 1 : 0) == labels[i]) ++correct;
    const double acc = static_cast<double>(correct) / n;
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.threshold = tau;
    }
  }
  return best;
}

namespace {

// Both orientations of every pair, labels SAME -> 0, DIFFERENT -> 1.
void pair_features(const PairSet& pairs, double db_floor, Eigen::MatrixXf* x,
                   Eigen::VectorXf* y) {
  if (pairs.pairs.empty()) throw std::invalid_argument("empty pair set");
  const Eigen::Index f = pairs.pairs.front().first.size();
  x->resize(2 * pairs.pairs.size(), 3 * f);
  y->resize(2 * pairs.pairs.size());
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    const LabeledPair& p = pairs.pairs[i];
    x->row(2 * i) = preprocess(p.first, p.second, db_floor).cast<float>().transpose();
    x->row(2 * i + 1) = preprocess(p.second, p.first, db_floor).cast<float>().transpose();
    const float label = p.label == PairLabel::Different ? 1.0f : 0.0f;
    (*y)(2 * i) = label;
    (*y)(2 * i + 1) = label;
  }
}

}  // namespace

DnncTrainResult train_dnnc(const PairSet& train_pairs, const PairSet& val_pairs,
                           const DnncTrainConfig& cfg) {
  Eigen::MatrixXf x_train, x_val;
  Eigen::VectorXf y_train, y_val;
  pair_features(train_pairs, cfg.db_floor, &x_train, &y_train);
  pair_features(val_pairs, cfg.db_floor, &x_val, &y_val);

  Network<float> net = make_mlp<float>(static_cast<int>(x_train.cols()), cfg.hidden_widths,
                                       cfg.leaky_slope, cfg.train.seed);
  DnncTrainResult result;
  result.report = train(net, x_train, y_train, x_val, y_val, cfg.train);

  // Calibrate on symmetrized validation statistics.
  DnncDetector probe(net, 0.0, cfg.db_floor);
  std::vector<Vec> a, b;
  std::vector<int> labels;
  for (const LabeledPair& p : val_pairs.pairs) {
    a.push_back(p.first);
    b.push_back(p.second);
    labels.push_back(p.label == PairLabel::Different ? 1 : 0);
  }
  const std::vector<double> stats = probe.statistic_batch(a, b);
  result.calibration = calibrate_threshold(stats, labels);
  result.detector =
      std::make_unique<DnncDetector>(std::move(net), result.calibration.threshold, cfg.db_floor);
  return result;
}

double pair_accuracy(const PositionChangeDetector& det, const PairSet& pairs) {
  std::vector<Vec> a, b;
  for (const LabeledPair& p : pairs.pairs) {
    a.push_back(p.first);
    b.push_back(p.second);
  }
  const std::vector<double> stats = det.statistic_batch(a, b);
  int correct = 0;
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    const bool changed = stats[i] > det.threshold();
    if (changed == (pairs.pairs[i].label == PairLabel::Different)) ++correct;
  }
  return pairs.pairs.empty() ? 0.0 : static_cast<double>(correct) / pairs.pairs.size();
}

DecisionMatrix pairwise_decisions(const PositionChangeDetector& det,
                                  const std::vector<Vec>& frames) {
  const int t = static_cast<int>(frames.size());
  if (t < 2) throw std::invalid_argument("need at least 2 frames");
  DecisionMatrix m;
  m.n = t;
  m.cells.assign(static_cast<std::size_t>(t) * t, 0);
  for (int i = 0; i < t; ++i) m.set(i, i, true);

  std::vector<Vec> a, b;
  std::vector<std::pair<int, int>> index;
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) {
      a.push_back(frames[i]);
      b.push_back(frames[j]);
      index.emplace_back(i, j);
    }
  const std::vector<double> stats = det.statistic_batch(a, b);
  for (std::size_t k = 0; k < index.size(); ++k)
    m.set(index[k].first, index[k].second, !(stats[k] > det.threshold()));
  return m;
}

void save_detector(const PositionChangeDetector& det, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write detector file: " + path);
  out << det.to_json().dump() << "\n";
  if (!out) throw IoError("failed writing detector file: " + path);
}

std::unique_ptr<PositionChangeDetector> detector_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const double threshold = j.at("threshold").get<double>();
    if (kind == "dnnc") {
      Network<float> net = network_from_json<float>(j);
      return std::make_unique<DnncDetector>(std::move(net), threshold,
                                            j.value("epsilon_floor", kDefaultDbFloor));
    }
    if (kind == "dbc") return std::make_unique<DbcDetector>(j.at("q").get<int>(), threshold);
    if (kind == "kmc") {
      const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
      const std::vector<double> flat = j.at("centroids").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw SchemaError("centroid block has wrong size");
      Mat centroids(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) centroids(r, c) = flat[r * cols + c];
      return std::make_unique<KmcDetector>(std::move(centroids), threshold);
    }
    throw SchemaError("unknown detector kind: " + kind);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad detector description: ") + e.what());
  }
}

std::unique_ptr<PositionChangeDetector> load_detector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detector file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("detector JSON: ") + e.what());
  }
  return detector_from_json(j);
}

}  // namespace spoofdet

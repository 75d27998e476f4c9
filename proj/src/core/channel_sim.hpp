#pragma once

#include "core/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace spoofdet {

inline constexpr double kSpeedOfLight = 299792458.0;

// Linear-power floor applied before any dB conversion.
inline constexpr double kRssFloorWatts = 1e-15;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const;
  bool finite() const;
};

double distance(const Point3& a, const Point3& b);

struct ReceiverSpec {
  Point3 position;
  std::vector<Point3> antenna_offsets;  // antenna positions relative to the receiver
  double noise_power = 0.0;             // linear watts
};

// One propagation path from the transmitter to an antenna, parameterized by a
// virtual scatterer. Path length is |tx - scatterer| + |scatterer - antenna|;
// per-ray amplitude decays as d^(-alpha/2) and the phase is 2*pi*d/lambda.
struct Ray {
  std::complex<double> gain{1.0, 0.0};
  Point3 scatterer;
};

struct Box3 {
  Point3 min;
  Point3 max;
  bool contains(const Point3& p) const;
};

struct MultipathModelConfig {
  std::vector<ReceiverSpec> receivers;
  double alpha = 2.5;           // path-loss exponent, [1.5, 4]
  double carrier_hz = 2.3e9;
  int rays_per_antenna = 12;    // used when rays are auto-placed
  double scatter_gain = 1.2;    // std of auto-placed complex ray gains
  std::uint64_t rng_seed = 0;   // drives auto ray placement
  Box3 bounds{{0.0, 0.0, 0.0}, {10.0, 6.0, 3.0}};
  double sample_interval = 2e-7;

  // Optional explicit ray table, one entry per antenna; when empty, rays are
  // auto-placed from rng_seed (a line-of-sight ray plus random scatterers).
  std::vector<std::vector<Ray>> rays;
};

struct SampleBlock {
  std::vector<double> values;  // |y|^2 samples, all >= 0
  double sample_interval = 0.0;
};

struct ProfileRow {
  double distance_m = 0.0;
  double rss_db = 0.0;
};

struct LineSpec {
  Point3 start;
  Point3 direction;  // unit vector
  double length_m = 0.0;
  double step_m = 0.0;
};

// Immutable after construction; safe for concurrent reads. Sampling calls take
// a caller-owned Rng so there is no shared mutable state.
class MultipathModel {
 public:
  explicit MultipathModel(MultipathModelConfig config);

  int feature_count() const { return static_cast<int>(antennas_.size()); }
  double noise_power(int antenna) const;
  const Point3& antenna_position(int antenna) const;
  const MultipathModelConfig& config() const { return config_; }
  double wavelength() const { return kSpeedOfLight / config_.carrier_hz; }

  // Complex narrowband channel gain h at `location` seen by `antenna`.
  std::complex<double> channel_gain(const Point3& location, int antenna) const;

  // Noise-free expected received power |h|^2 plus the antenna's noise power.
  double rss_true(const Point3& location, int antenna) const;

  SampleBlock sample_block(const Point3& location, int antenna, int n_samples, Rng& rng) const;

  Vec rss_vector_estimate(const Point3& location, int n_samples, Rng& rng) const;

  std::vector<ProfileRow> spatial_profile(const LineSpec& line, int antenna) const;

  nlohmann::json to_json() const;
  static MultipathModel from_json(const nlohmann::json& j);

 private:
  void check_antenna(int antenna) const;

  MultipathModelConfig config_;
  std::vector<Point3> antennas_;        // flattened antenna positions
  std::vector<int> antenna_receiver_;   // antenna index -> receiver index
};

double rss_estimate(const SampleBlock& block);

double to_db(double linear_power);

// Default environment: 10 m x 6 m room, 4 receivers x 4 antennas at lambda/2
// spacing, 12 rays per antenna, alpha 2.5, 2.3 GHz carrier.
MultipathModel default_environment(std::uint64_t seed);

MultipathModel load_environment(const std::string& path);
void save_environment(const MultipathModel& model, const std::string& path);

}  // namespace spoofdet

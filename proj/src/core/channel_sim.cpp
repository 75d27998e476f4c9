#include "core/channel_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace spoofdet {

using nlohmann::json;

double Point3::norm() const { return std::sqrt(x * x + y * y + z * z); }

bool Point3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }

bool Box3::contains(const Point3& p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

namespace {

std::vector<std::vector<Ray>> auto_place_rays(const MultipathModelConfig& cfg,
                                              const std::vector<Point3>& antennas) {
  Rng rng = make_rng(cfg.rng_seed, 0xba5eba11ULL);
  std::uniform_real_distribution<double> ux(cfg.bounds.min.x, cfg.bounds.max.x);
  std::uniform_real_distribution<double> uy(cfg.bounds.min.y, cfg.bounds.max.y);
  std::uniform_real_distribution<double> uz(cfg.bounds.min.z, cfg.bounds.max.z);
  std::normal_distribution<double> gauss(0.0, cfg.scatter_gain / std::sqrt(2.0));

  std::vector<std::vector<Ray>> rays(antennas.size());
  for (std::size_t a = 0; a < antennas.size(); ++a) {
    rays[a].reserve(cfg.rays_per_antenna);
    // Ray 0 is the line-of-sight path: scatterer collocated with the antenna.
    rays[a].push_back(Ray{{1.0, 0.0}, antennas[a]});
    for (int k = 1; k < cfg.rays_per_antenna; ++k) {
      Ray r;
      r.scatterer = Point3{ux(rng), uy(rng), uz(rng)};
      r.gain = {gauss(rng), gauss(rng)};
      rays[a].push_back(r);
    }
  }
  return rays;
}

}  // namespace

MultipathModel::MultipathModel(MultipathModelConfig config) : config_(std::move(config)) {
  if (config_.receivers.empty()) throw std::invalid_argument("model needs at least one receiver");
  if (config_.alpha < 1.5 || config_.alpha > 4.0)
    throw std::invalid_argument("path-loss exponent must be in [1.5, 4]");
  if (config_.carrier_hz <= 0.0) throw std::invalid_argument("carrier frequency must be positive");
  for (std::size_t r = 0; r < config_.receivers.size(); ++r) {
    const ReceiverSpec& rx = config_.receivers[r];
    if (rx.antenna_offsets.empty())
      throw std::invalid_argument("receiver needs at least one antenna");
    if (rx.noise_power < 0.0) throw std::invalid_argument("noise power must be >= 0");
    for (const Point3& off : rx.antenna_offsets) {
      antennas_.push_back(rx.position + off);
      antenna_receiver_.push_back(static_cast<int>(r));
    }
  }
  if (config_.rays.empty()) {
    if (config_.rays_per_antenna < 1) throw std::invalid_argument("need at least one ray");
    config_.rays = auto_place_rays(config_, antennas_);
  }
  if (config_.rays.size() != antennas_.size())
    throw std::invalid_argument("ray table size must match antenna count");
  for (const auto& per_antenna : config_.rays) {
    if (per_antenna.empty()) throw std::invalid_argument("need at least one ray per antenna");
    for (const Ray& ray : per_antenna) {
      if (!std::isfinite(ray.gain.real()) || !std::isfinite(ray.gain.imag()) ||
          !ray.scatterer.finite())
        throw std::invalid_argument("ray parameters must be finite");
    }
  }
}

void MultipathModel::check_antenna(int antenna) const {
  if (antenna < 0 || antenna >= feature_count())
    throw std::invalid_argument("antenna index out of range");
}

double MultipathModel::noise_power(int antenna) const {
  check_antenna(antenna);
  return config_.receivers[antenna_receiver_[antenna]].noise_power;
}

const Point3& MultipathModel::antenna_position(int antenna) const {
  check_antenna(antenna);
  return antennas_[antenna];
}

std::complex<double> MultipathModel::channel_gain(const Point3& location, int antenna) const {
  check_antenna(antenna);
  const double lambda = wavelength();
  const Point3& ant = antennas_[antenna];
  std::complex<double> h = 0.0;
  for (const Ray& ray : config_.rays[antenna]) {
    const double d = distance(location, ray.scatterer) + distance(ray.scatterer, ant);
    const double d_eff = std::max(d, 1e-3);  // avoid singularity at the antenna itself
    const double amp = std::pow(d_eff, -config_.alpha / 2.0);
    const double phase = 2.0 * std::numbers::pi * d_eff / lambda;
    h += ray.gain * std::polar(amp, -phase);
  }
  return h;
}

double MultipathModel::rss_true(const Point3& location, int antenna) const {
  const std::complex<double> h = channel_gain(location, antenna);
  return std::norm(h) + noise_power(antenna);
}

SampleBlock MultipathModel::sample_block(const Point3& location, int antenna, int n_samples,
                                         Rng& rng) const {
  check_antenna(antenna);
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  const std::complex<double> h = channel_gain(location, antenna);
  const double sigma2 = noise_power(antenna);
  const double noise_comp_std = std::sqrt(sigma2 / 2.0);

  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SampleBlock block;
  block.sample_interval = config_.sample_interval;
  block.values.reserve(n_samples);
  for (int n = 0; n < n_samples; ++n) {
    // Constant-modulus signal with a random phase per sample, plus circular
    // complex Gaussian noise: y = h * e^{j theta} + v.
    const std::complex<double> s = std::polar(1.0, uphase(rng));
    std::complex<double> v{0.0, 0.0};
    if (sigma2 > 0.0) v = {noise_comp_std * gauss(rng), noise_comp_std * gauss(rng)};
    block.values.push_back(std::norm(h * s + v));
  }
  return block;
}

Vec MultipathModel::rss_vector_estimate(const Point3& location, int n_samples, Rng& rng) const {
  const int f = feature_count();
  Vec out(f);
  for (int a = 0; a < f; ++a) out(a) = rss_estimate(sample_block(location, a, n_samples, rng));
  return out;
}

std::vector<ProfileRow> MultipathModel::spatial_profile(const LineSpec& line, int antenna) const {
  check_antenna(antenna);
  if (line.step_m <= 0.0) throw std::invalid_argument("profile step must be > 0");
  if (line.length_m < 0.0) throw std::invalid_argument("profile length must be >= 0");
  std::vector<ProfileRow> rows;
  for (double d = 0.0; d <= line.length_m + 1e-12; d += line.step_m) {
    const Point3 p = line.start + line.direction * d;
    rows.push_back({d, to_db(rss_true(p, antenna))});
    if (line.length_m == 0.0) break;
  }
  return rows;
}

double rss_estimate(const SampleBlock& block) {
  if (block.values.empty()) throw std::invalid_argument("empty sample block");
  double sum = 0.0;
  for (double v : block.values) sum += v;
  return sum / static_cast<double>(block.values.size());
}

double to_db(double linear_power) {
  return 10.0 * std::log10(std::max(linear_power, kRssFloorWatts));
}

namespace {

json point_to_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaError("expected [x, y, z] point");
  return Point3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

json MultipathModel::to_json() const {
  json j;
  j["alpha"] = config_.alpha;
  j["carrier_hz"] = config_.carrier_hz;
  j["rays_per_antenna"] = config_.rays_per_antenna;
  j["scatter_gain"] = config_.scatter_gain;
  j["rng_seed"] = config_.rng_seed;
  j["sample_interval"] = config_.sample_interval;
  j["bounds"] = {{"min", point_to_json(config_.bounds.min)},
                 {"max", point_to_json(config_.bounds.max)}};
  j["receivers"] = json::array();
  for (const ReceiverSpec& rx : config_.receivers) {
    json jr;
    jr["position"] = point_to_json(rx.position);
    jr["noise_power"] = rx.noise_power;
    jr["antenna_offsets"] = json::array();
    for (const Point3& off : rx.antenna_offsets) jr["antenna_offsets"].push_back(point_to_json(off));
    j["receivers"].push_back(jr);
  }
  j["rays"] = json::array();
  for (const auto& per_antenna : config_.rays) {
    json ja = json::array();
    for (const Ray& ray : per_antenna) {
      ja.push_back({{"gain_re", ray.gain.real()},
                    {"gain_im", ray.gain.imag()},
                    {"scatterer", point_to_json(ray.scatterer)}});
    }
    j["rays"].push_back(ja);
  }
  return j;
}

MultipathModel MultipathModel::from_json(const json& j) {
  MultipathModelConfig cfg;
  try {
    cfg.alpha = j.at("alpha").get<double>();
    cfg.carrier_hz = j.at("carrier_hz").get<double>();
    cfg.rays_per_antenna = j.value("rays_per_antenna", 12);
    cfg.scatter_gain = j.value("scatter_gain", 1.2);
    cfg.rng_seed = j.value("rng_seed", std::uint64_t{0});
    cfg.sample_interval = j.value("sample_interval", 2e-7);
    if (j.contains("bounds")) {
      cfg.bounds.min = point_from_json(j.at("bounds").at("min"));
      cfg.bounds.max = point_from_json(j.at("bounds").at("max"));
    }
    for (const json& jr : j.at("receivers")) {
      ReceiverSpec rx;
      rx.position = point_from_json(jr.at("position"));
      rx.noise_power = jr.at("noise_power").get<double>();
      for (const json& jo : jr.at("antenna_offsets")) rx.antenna_offsets.push_back(point_from_json(jo));
      cfg.receivers.push_back(std::move(rx));
    }
    if (j.contains("rays")) {
      for (const json& ja : j.at("rays")) {
        std::vector<Ray> per_antenna;
        for (const json& jray : ja) {
          Ray ray;
          ray.gain = {jray.at("gain_re").get<double>(), jray.at("gain_im").get<double>()};
          ray.scatterer = point_from_json(jray.at("scatterer"));
          per_antenna.push_back(ray);
        }
        cfg.rays.push_back(std::move(per_antenna));
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad environment description: ") + e.what());
  }
  return MultipathModel(std::move(cfg));
}

MultipathModel default_environment(std::uint64_t seed) {
  MultipathModelConfig cfg;
  cfg.rng_seed = seed;
  const double half_lambda = 0.5 * kSpeedOfLight / cfg.carrier_hz;
  const double z = 2.5;
  const std::vector<Point3> rx_pos = {
      {0.5, 0.5, z}, {9.5, 0.5, z}, {0.5, 5.5, z}, {9.5, 5.5, z}};
  // Noise floors differ per receiver, as with real hardware; nearby locations
  // then overlap at the noisy receivers and stay separable at the quiet ones.
  const std::vector<double> noise = {0.03, 0.08, 0.15, 0.3};
  for (std::size_t r = 0; r < rx_pos.size(); ++r) {
    ReceiverSpec rx;
    rx.position = rx_pos[r];
    rx.noise_power = noise[r];
    for (int a = 0; a < 4; ++a) rx.antenna_offsets.push_back({a * half_lambda, 0.0, 0.0});
    cfg.receivers.push_back(std::move(rx));
  }
  return MultipathModel(std::move(cfg));
}

MultipathModel load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open environment file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("environment JSON: ") + e.what());
  }
  return MultipathModel::from_json(j);
}

void save_environment(const MultipathModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write environment file: " + path);
  out << model.to_json().dump(2) << "\n";
  if (!out) throw IoError("failed writing environment file: " + path);
}

}  // namespace spoofdet

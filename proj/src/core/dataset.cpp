#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spoofdet {

int MeasurementGrid::line_count() const {
  int n = 0;
  for (int l : line_of) n = std::max(n, l + 1);
  return n;
}

std::vector<int> MeasurementGrid::line_members(int line) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (line_of[i] == line) out.push_back(i);
  return out;
}

MeasurementGrid generate_grid(int n_lines, int per_line, double line_spacing_m,
                              double point_spacing_m, const Point3& origin) {
  if (n_lines < 1) throw std::invalid_argument("need at least one line");
  if (per_line < 2) throw std::invalid_argument("need at least two points per line");
  if (line_spacing_m <= 0.0 || point_spacing_m <= 0.0)
    throw std::invalid_argument("grid spacings must be > 0");
  MeasurementGrid grid;
  for (int l = 0; l < n_lines; ++l) {
    for (int i = 0; i < per_line; ++i) {
      grid.locations.push_back(origin + Point3{i * point_spacing_m, l * line_spacing_m, 0.0});
      grid.line_of.push_back(l);
    }
  }
  return grid;
}

int default_estimates_per_location(int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  return 4888 / n_samples;
}

LocationDataset collect_dataset(const MultipathModel& model, const MeasurementGrid& grid, int e,
                                int n, std::uint64_t seed) {
  if (e < 2) throw std::invalid_argument("need at least 2 estimates per location");
  if (n < 1) throw std::invalid_argument("need at least 1 sample per estimate");
  LocationDataset ds;
  ds.grid = grid;
  ds.n_samples_per_estimate = n;
  ds.feature_count = model.feature_count();
  ds.estimates.resize(grid.size());
  for (int d = 0; d < grid.size(); ++d) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(d));
    ds.estimates[d].reserve(e);
    for (int i = 0; i < e; ++i)
      ds.estimates[d].push_back(model.rss_vector_estimate(grid.locations[d], n, rng));
  }
  return ds;
}

PairSet build_pairs(const LocationDataset& dataset, int p, Rng& rng) {
  const int d_count = dataset.location_count();
  const int e_count = dataset.estimates_per_location();
  if (p < 1) throw std::invalid_argument("need at least one pair");
  if (d_count < 2) throw std::invalid_argument("pair construction needs at least 2 locations");
  if (e_count < 2) throw std::invalid_argument("pair construction needs at least 2 estimates");

  std::uniform_int_distribution<int> pick_loc(0, d_count - 1);
  std::uniform_int_distribution<int> pick_est(0, e_count - 1);
  auto pick_est_distinct = [&](int other) {
    int e = pick_est(rng);
    while (e == other) e = pick_est(rng);
    return e;
  };

  PairSet set;
  set.p = p;
  set.pairs.reserve(2 * p);
  for (int i = 0; i < p; ++i) {
    LabeledPair pair;
    pair.label = PairLabel::Same;
    pair.loc_a = pair.loc_b = pick_loc(rng);
    pair.est_a = pick_est(rng);
    pair.est_b = pick_est_distinct(pair.est_a);
    pair.first = dataset.estimates[pair.loc_a][pair.est_a];
    pair.second = dataset.estimates[pair.loc_b][pair.est_b];
    set.pairs.push_back(std::move(pair));
  }
  for (int i = 0; i < p; ++i) {
    LabeledPair pair;
    pair.label = PairLabel::Different;
    pair.loc_a = pick_loc(rng);
    pair.loc_b = pick_loc(rng);
    while (pair.loc_b == pair.loc_a) pair.loc_b = pick_loc(rng);
    pair.est_a = pick_est(rng);
    pair.est_b = pick_est_distinct(pair.est_a);
    pair.first = dataset.estimates[pair.loc_a][pair.est_a];
    pair.second = dataset.estimates[pair.loc_b][pair.est_b];
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

std::pair<LocationDataset, LocationDataset> split_train_val(const LocationDataset& dataset,
                                                            double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must be in (0, 1)");
  const int d_count = dataset.location_count();
  if (d_count < 2) throw std::invalid_argument("splitting needs at least 2 locations");
  int d_train = static_cast<int>(std::lround(train_fraction * d_count));
  d_train = std::clamp(d_train, 1, d_count - 1);

  std::vector<int> order(d_count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto subset = [&](int begin, int end) {
    std::vector<int> idx(order.begin() + begin, order.begin() + end);
    std::sort(idx.begin(), idx.end());
    return subset_dataset(dataset, idx);
  };
  return {subset(0, d_train), subset(d_train, d_count)};
}

LocationDataset subset_dataset(const LocationDataset& dataset, const std::vector<int>& indices) {
  LocationDataset out;
  out.n_samples_per_estimate = dataset.n_samples_per_estimate;
  out.feature_count = dataset.feature_count;
  for (int i : indices) {
    if (i < 0 || i >= dataset.location_count())
      throw std::invalid_argument("location index out of range");
    out.grid.locations.push_back(dataset.grid.locations[i]);
    out.grid.line_of.push_back(dataset.grid.line_of[i]);
    out.estimates.push_back(dataset.estimates[i]);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const LocationDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  out << "location_id,line_id,x,y,z,estimate_id";
  for (int f = 0; f < dataset.feature_count; ++f) out << ",f" << f;
  out << "\n";
  for (int d = 0; d < dataset.location_count(); ++d) {
    const Point3& loc = dataset.grid.locations[d];
    for (std::size_t e = 0; e < dataset.estimates[d].size(); ++e) {
      out << d << ',' << dataset.grid.line_of[d] << ',' << fmt_double(loc.x) << ','
          << fmt_double(loc.y) << ',' << fmt_double(loc.z) << ',' << e;
      const Vec& v = dataset.estimates[d][e];
      for (int f = 0; f < dataset.feature_count; ++f) out << ',' << fmt_double(v(f));
      out << "\n";
    }
  }
  if (!out) throw IoError("failed writing dataset file: " + path);
}

LocationDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);

  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
  ++line_no;

  // Header determines F.
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  const std::vector<std::string> fixed = {"location_id", "line_id", "x", "y", "z", "estimate_id"};
  if (header.size() <= fixed.size()) throw SchemaError("dataset header has no feature columns");
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (header[i] != fixed[i]) throw SchemaError("unexpected dataset header column: " + header[i]);
  const int feature_count = static_cast<int>(header.size() - fixed.size());
  for (int f = 0; f < feature_count; ++f)
    if (header[fixed.size() + f] != "f" + std::to_string(f))
      throw SchemaError("unexpected feature column name: " + header[fixed.size() + f]);

  LocationDataset ds;
  ds.feature_count = feature_count;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != header.size())
      throw ParseError("wrong column count in dataset row", line_no);
    try {
      const int d = std::stoi(cols[0]);
      const int line_id = std::stoi(cols[1]);
      const int e = std::stoi(cols[5]);
      if (d < 0 || e < 0) throw ParseError("negative index in dataset row", line_no);
      if (d == static_cast<int>(ds.grid.locations.size())) {
        ds.grid.locations.push_back(
            {std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])});
        ds.grid.line_of.push_back(line_id);
        ds.estimates.emplace_back();
      } else if (d >= static_cast<int>(ds.grid.locations.size())) {
        throw ParseError("location ids must be contiguous and ordered", line_no);
      }
      if (e != static_cast<int>(ds.estimates[d].size()))
        throw ParseError("estimate ids must be contiguous and ordered", line_no);
      Vec v(feature_count);
      for (int f = 0; f < feature_count; ++f) {
        v(f) = std::stod(cols[6 + f]);
        if (v(f) < 0.0) throw ParseError("negative RSS estimate", line_no);
      }
      ds.estimates[d].push_back(std::move(v));
    } catch (const std::invalid_argument&) {
      throw ParseError("malformed number in dataset row", line_no);
    } catch (const std::out_of_range&) {
      throw ParseError("out-of-range number in dataset row", line_no);
    }
  }
  if (ds.estimates.empty()) throw ParseError("dataset has no rows", line_no);
  const std::size_t e_count = ds.estimates.front().size();
  for (const auto& per_loc : ds.estimates)
    if (per_loc.size() != e_count)
      throw ParseError("locations have differing estimate counts", line_no);
  return ds;
}

void save_pairs(const PairSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pair file: " + path);
  out << "pair_id,label,loc_a,est_a,loc_b,est_b\n";
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    const LabeledPair& p = set.pairs[i];
    out << i << ',' << (p.label == PairLabel::Same ? "SAME" : "DIFFERENT") << ',' << p.loc_a << ','
        << p.est_a << ',' << p.loc_b << ',' << p.est_b << "\n";
  }
  if (!out) throw IoError("failed writing pair file: " + path);
}

}  // namespace spoofdet

#pragma once

#include "core/channel_sim.hpp"
#include "core/common.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spoofdet {

struct MeasurementGrid {
  std::vector<Point3> locations;  // grouped by line, sorted along each line
  std::vector<int> line_of;       // location index -> line index

  int size() const { return static_cast<int>(locations.size()); }
  int line_count() const;
  std::vector<int> line_members(int line) const;
};

// n_lines parallel lines along +x, per_line equally spaced points each.
MeasurementGrid generate_grid(int n_lines, int per_line, double line_spacing_m,
                              double point_spacing_m, const Point3& origin = {});

struct LocationDataset {
  MeasurementGrid grid;
  std::vector<std::vector<Vec>> estimates;  // [location][estimate] -> F-vector
  int n_samples_per_estimate = 0;
  int feature_count = 0;

  int location_count() const { return static_cast<int>(estimates.size()); }
  int estimates_per_location() const {
    return estimates.empty() ? 0 : static_cast<int>(estimates.front().size());
  }
};

// E independent RSS vector estimates (N samples each) at every grid location.
// Per-location random substreams are derived from `seed`, so the result does
// not depend on traversal order.
LocationDataset collect_dataset(const MultipathModel& model, const MeasurementGrid& grid, int e,
                                int n, std::uint64_t seed);

// E defaulted so the per-location sample budget is 4888 samples.
int default_estimates_per_location(int n_samples);

enum class PairLabel { Same, Different };

struct LabeledPair {
  Vec first;
  Vec second;
  PairLabel label = PairLabel::Same;
  // Provenance, for label audits; detectors never see these.
  int loc_a = -1;
  int est_a = -1;
  int loc_b = -1;
  int est_b = -1;
};

struct PairSet {
  std::vector<LabeledPair> pairs;  // first p are Same, last p are Different
  int p = 0;
};

PairSet build_pairs(const LocationDataset& dataset, int p, Rng& rng);

std::pair<LocationDataset, LocationDataset> split_train_val(const LocationDataset& dataset,
                                                            double train_fraction, Rng& rng);

// New dataset restricted to the given location indices (kept in given order).
LocationDataset subset_dataset(const LocationDataset& dataset, const std::vector<int>& indices);

// CSV: location_id,line_id,x,y,z,estimate_id,f0,...,f{F-1}
void save_dataset(const LocationDataset& dataset, const std::string& path);
LocationDataset load_dataset(const std::string& path);

void save_pairs(const PairSet& pairs, const std::string& path);

}  // namespace spoofdet

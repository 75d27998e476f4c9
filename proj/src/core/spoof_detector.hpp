#pragma once

#include "core/common.hpp"
#include "core/community.hpp"
#include "core/pcd.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace spoofdet {

// General mode scores every possible revisit (n >= 1); PaperLiteral starts
// the sum at n = 3.
enum class SumMode { General, PaperLiteral };

SumMode sum_mode_from_name(const std::string& name);
std::string sum_mode_name(SumMode mode);

struct RevisitProfile {
  std::vector<double> w;  // per-frame weight, 0 or 1/nu
  std::vector<int> nu;    // distinct regions visited since the previous occurrence
};

// For each frame n: a revisit transition occurs iff c[n] != c[n-1] and the
// region c[n] was visited before; then nu[n] counts the distinct regions
// between the previous occurrence and n, and w[n] = 1/nu[n].
RevisitProfile revisit_profile(const std::vector<int>& seq, SumMode mode);

struct SdStatistic {
  double value = 0.0;
  std::vector<double> w;
  std::vector<int> nu;
};

SdStatistic sd_statistic(const std::vector<int>& seq, SumMode mode);

// Smallest gamma among observed values (or -inf) with empirical
// P(S > gamma) <= target_pfa.
double calibrate_threshold_h0(const std::vector<double>& h0_statistics, double target_pfa);

struct SdModel {
  double threshold = 0.0;
  const PositionChangeDetector* pcd = nullptr;
  std::uint64_t louvain_seed = 0;
  SumMode mode = SumMode::General;
};

struct SdDecision {
  bool attack = false;
  SdStatistic statistic;
  std::vector<int> region_sequence;
};

// pairwise decisions -> frame graph -> Louvain -> region sequence ->
// statistic -> threshold compare.
SdDecision detect(const std::vector<Vec>& frames, const SdModel& model);

nlohmann::json decision_to_json(const SdDecision& decision, double threshold);

}  // namespace spoofdet

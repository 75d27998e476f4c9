#include "core/spoof_detector.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace spoofdet {

SumMode sum_mode_from_name(const std::string& name) {
  if (name == "general") return SumMode::General;
  if (name == "paper-literal") return SumMode::PaperLiteral;
  throw std::invalid_argument("unknown sum mode: " + name);
}

std::string sum_mode_name(SumMode mode) {
  return mode == SumMode::General ? "general" : "paper-literal";
}

RevisitProfile revisit_profile(const std::vector<int>& seq, SumMode mode) {
  const int t = static_cast<int>(seq.size());
  if (t < 1) throw std::invalid_argument("need at least one frame");
  RevisitProfile prof;
  prof.w.assign(t, 0.0);
  prof.nu.assign(t, 0);
  const int first_n = mode == SumMode::PaperLiteral ? 3 : 1;
  for (int n = first_n; n < t; ++n) {
    if (seq[n] == seq[n - 1]) continue;
    int n_star = -1;
    for (int m = n - 1; m >= 0; --m)
      if (seq[m] == seq[n]) {
        n_star = m;
        break;
      }
    if (n_star < 0) continue;
    std::set<int> between(seq.begin() + n_star + 1, seq.begin() + n);
    const int nu = static_cast<int>(between.size());
    prof.nu[n] = nu;
    prof.w[n] = nu > 0 ? 1.0 / nu : 0.0;
  }
  return prof;
}

SdStatistic sd_statistic(const std::vector<int>& seq, SumMode mode) {
  RevisitProfile prof = revisit_profile(seq, mode);
  SdStatistic stat;
  stat.value = 0.0;
  for (double w : prof.w) stat.value += w;
  stat.w = std::move(prof.w);
  stat.nu = std::move(prof.nu);
  return stat;
}

double calibrate_threshold_h0(const std::vector<double>& h0_statistics, double target_pfa) {
  if (h0_statistics.empty()) throw std::invalid_argument("no H0 statistics");
  if (!(target_pfa > 0.0 && target_pfa < 1.0))
    throw std::invalid_argument("target pfa must be in (0, 1)");
  std::vector<double> candidates(h0_statistics);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.insert(candidates.begin(), -std::numeric_limits<double>::infinity());

  const double n = static_cast<double>(h0_statistics.size());
  for (double gamma : candidates) {
    int exceed = 0;
    for (double s : h0_statistics)
      if (s > gamma) ++exceed;
    if (exceed / n <= target_pfa) return gamma;
  }
  return candidates.back();  // unreachable: the max value always satisfies the bound
}

SdDecision detect(const std::vector<Vec>& frames, const SdModel& model) {
  if (frames.size() < 2) throw std::invalid_argument("need at least 2 frames");
  if (model.pcd == nullptr) throw std::invalid_argument("SD model has no PCD");
  const DecisionMatrix decisions = pairwise_decisions(*model.pcd, frames);
  const FrameGraph graph = build_graph(decisions);
  const Partition partition = louvain(graph, model.louvain_seed);
  SdDecision decision;
  decision.region_sequence = region_sequence(partition);
  decision.statistic = sd_statistic(decision.region_sequence, model.mode);
  decision.attack = decision.statistic.value > model.threshold;
  return decision;
}

nlohmann::json decision_to_json(const SdDecision& decision, double threshold) {
  return nlohmann::json{{"decision", decision.attack ? "ATTACK" : "NO_ATTACK"},
                        {"statistic", decision.statistic.value},
                        {"threshold", threshold},
                        {"region_sequence", decision.region_sequence},
                        {"weights", decision.statistic.w}};
}

}  // namespace spoofdet

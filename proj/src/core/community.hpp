#pragma once

#include "core/common.hpp"
#include "core/pcd.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spoofdet {

struct FrameGraph {
  int node_count = 0;
  std::vector<std::vector<int>> adjacency;  // no self loops; all edge weights 1
  int edge_count = 0;
};

// Edge (n, n') for n != n' iff the PCD judged the frames SAME.
FrameGraph build_graph(const DecisionMatrix& decisions);

struct Partition {
  std::vector<int> community_of;
  int community_count = 0;
};

// Newman modularity at resolution 1; 0 by convention for edgeless graphs.
double modularity(const FrameGraph& graph, const Partition& partition);

// Two-phase greedy modularity maximization: seeded-order local moves until no
// move improves, then graph aggregation; stops when an aggregation pass yields
// no modularity increase. Ties in gain break toward the smallest community id.
Partition louvain(const FrameGraph& graph, std::uint64_t seed);

// Canonical first-appearance relabeling of the per-frame community ids.
std::vector<int> region_sequence(const Partition& partition);

// Debug export: one "n n'" line per edge.
void save_edge_list(const FrameGraph& graph, const std::string& path);

}  // namespace spoofdet

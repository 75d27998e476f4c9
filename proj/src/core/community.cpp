#include "core/community.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace spoofdet {

FrameGraph build_graph(const DecisionMatrix& decisions) {
  const int t = decisions.n;
  if (t < 1) throw std::invalid_argument("need at least one frame");
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j)
      if (decisions.same(i, j) != decisions.same(j, i))
        throw std::invalid_argument("decision matrix must be symmetric");

  FrameGraph g;
  g.node_count = t;
  g.adjacency.resize(t);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j)
      if (decisions.same(i, j)) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
        ++g.edge_count;
      }
  return g;
}

double modularity(const FrameGraph& graph, const Partition& partition) {
  if (static_cast<int>(partition.community_of.size()) != graph.node_count)
    throw std::invalid_argument("partition does not cover the graph");
  if (graph.edge_count == 0) return 0.0;
  const double two_m = 2.0 * graph.edge_count;

  std::unordered_map<int, double> intra;   // community -> intra-edge weight (each edge once)
  std::unordered_map<int, double> degree;  // community -> total degree
  for (int i = 0; i < graph.node_count; ++i) {
    degree[partition.community_of[i]] += graph.adjacency[i].size();
    for (int j : graph.adjacency[i])
      if (j > i && partition.community_of[i] == partition.community_of[j])
        intra[partition.community_of[i]] += 1.0;
  }
  double q = 0.0;
  for (const auto& [comm, deg] : degree) {
    const double e_ii = intra.count(comm) ? intra[comm] / graph.edge_count : 0.0;
    const double a_i = deg / two_m;
    q += e_ii - a_i * a_i;
  }
  return q;
}

namespace {

// Aggregated graph used between Louvain levels: weighted edges + self loops.
struct WeightedGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;  // neighbor, weight (each edge stored twice)
  std::vector<double> self_loop;                         // loop weight, counted once
  double m = 0.0;                                        // total edge weight incl. loops

  std::vector<double> degrees() const {
    std::vector<double> k(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (const auto& [j, w] : adj[i]) k[i] += w;
      k[i] += 2.0 * self_loop[i];
    }
    return k;
  }
};

double wmodularity(const WeightedGraph& g, const std::vector<int>& comm) {
  if (g.m <= 0.0) return 0.0;
  std::unordered_map<int, double> intra, deg;
  const std::vector<double> k = g.degrees();
  for (int i = 0; i < g.n; ++i) {
    deg[comm[i]] += k[i];
    intra[comm[i]] += g.self_loop[i];
    for (const auto& [j, w] : g.adj[i])
      if (j > i && comm[i] == comm[j]) intra[comm[i]] += w;
  }
  double q = 0.0;
  const double two_m = 2.0 * g.m;
  for (const auto& [c, d] : deg) {
    q += intra[c] / g.m - (d / two_m) * (d / two_m);
  }
  return q;
}

// One local-moving phase; returns the node -> community map.
std::vector<int> local_moving(const WeightedGraph& g, Rng& rng) {
  std::vector<int> comm(g.n);
  std::iota(comm.begin(), comm.end(), 0);
  const std::vector<double> k = g.degrees();
  std::vector<double> sigma_tot = k;  // community total degree

  std::vector<int> order(g.n);
  std::iota(order.begin(), order.end(), 0);

  bool improved = true;
  while (improved) {
    improved = false;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) {
      const int old_comm = comm[i];
      sigma_tot[old_comm] -= k[i];

      // Link weight from i to each neighboring community.
      std::unordered_map<int, double> k_in;
      k_in[old_comm] += 0.0;  // staying put is always a candidate
      for (const auto& [j, w] : g.adj[i]) k_in[comm[j]] += w;

      int best_comm = old_comm;
      double best_gain = k_in[old_comm] - sigma_tot[old_comm] * k[i] / (2.0 * g.m);
      for (const auto& [c, kin] : k_in) {
        const double gain = kin - sigma_tot[c] * k[i] / (2.0 * g.m);
        if (gain > best_gain + 1e-12 ||
            (std::abs(gain - best_gain) <= 1e-12 && c < best_comm)) {
          best_gain = gain;
          best_comm = c;
        }
      }
      sigma_tot[best_comm] += k[i];
      comm[i] = best_comm;
      if (best_comm != old_comm) improved = true;
    }
  }
  return comm;
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& comm,
                        std::vector<int>* relabel) {
  // Compact community ids.
  relabel->assign(g.n, -1);
  int next = 0;
  std::unordered_map<int, int> compact;
  for (int i = 0; i < g.n; ++i) {
    auto [it, inserted] = compact.try_emplace(comm[i], next);
    if (inserted) ++next;
    (*relabel)[i] = it->second;
  }

  WeightedGraph out;
  out.n = next;
  out.adj.resize(next);
  out.self_loop.assign(next, 0.0);
  std::vector<std::unordered_map<int, double>> acc(next);
  for (int i = 0; i < g.n; ++i) {
    const int ci = (*relabel)[i];
    out.self_loop[ci] += g.self_loop[i];
    for (const auto& [j, w] : g.adj[i]) {
      const int cj = (*relabel)[j];
      if (ci == cj) {
        if (j > i) out.self_loop[ci] += w;
      } else {
        acc[ci][cj] += w;
      }
    }
  }
  for (int c = 0; c < next; ++c)
    for (const auto& [d, w] : acc[c]) out.adj[c].emplace_back(d, w);
  out.m = g.m;
  return out;
}

}  // namespace

Partition louvain(const FrameGraph& graph, std::uint64_t seed) {
  Partition result;
  result.community_of.resize(graph.node_count);
  std::iota(result.community_of.begin(), result.community_of.end(), 0);
  result.community_count = graph.node_count;
  if (graph.node_count == 0) return result;
  if (graph.edge_count == 0) return result;  // all singletons

  WeightedGraph g;
  g.n = graph.node_count;
  g.adj.resize(g.n);
  g.self_loop.assign(g.n, 0.0);
  for (int i = 0; i < g.n; ++i)
    for (int j : graph.adjacency[i]) g.adj[i].emplace_back(j, 1.0);
  g.m = graph.edge_count;

  Rng rng = make_rng(seed, 0x10a1ULL);
  std::vector<int> node_to_comm(g.n);
  std::iota(node_to_comm.begin(), node_to_comm.end(), 0);
  double q = wmodularity(g, node_to_comm);

  while (true) {
    const std::vector<int> comm = local_moving(g, rng);
    std::vector<int> relabel;
    WeightedGraph next = aggregate(g, comm, &relabel);

    std::vector<int> next_comm(next.n);
    std::iota(next_comm.begin(), next_comm.end(), 0);
    const double next_q = wmodularity(next, next_comm);
    if (next_q <= q + 1e-12) break;
    q = next_q;

    for (int i = 0; i < graph.node_count; ++i) node_to_comm[i] = relabel[node_to_comm[i]];
    g = std::move(next);
    if (g.n <= 1) break;
  }

  // Compact final ids.
  std::unordered_map<int, int> compact;
  int next_id = 0;
  result.community_of.resize(graph.node_count);
  for (int i = 0; i < graph.node_count; ++i) {
    auto [it, inserted] = compact.try_emplace(node_to_comm[i], next_id);
    if (inserted) ++next_id;
    result.community_of[i] = it->second;
  }
  result.community_count = next_id;
  return result;
}

std::vector<int> region_sequence(const Partition& partition) {
  std::unordered_map<int, int> relabel;
  std::vector<int> seq;
  seq.reserve(partition.community_of.size());
  int next = 0;
  for (int c : partition.community_of) {
    auto [it, inserted] = relabel.try_emplace(c, next);
    if (inserted) ++next;
    seq.push_back(it->second);
  }
  return seq;
}

void save_edge_list(const FrameGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write edge list: " + path);
  for (int i = 0; i < graph.node_count; ++i)
    for (int j : graph.adjacency[i])
      if (j > i) out << i << ' ' << j << "\n";
}

}  // namespace spoofdet

#include "qising/graph.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace qising {

void SiteGraph::finalize() {
  if (n_free <= 0) throw std::invalid_argument("graph needs a free vertex");
  if (n_frozen < 0) throw std::invalid_argument("negative frozen count");
  adj.assign(total(), {});
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= total() || v >= total() || u == v)
      throw std::invalid_argument("edge out of range");
    if (is_frozen(u) && is_frozen(v))
      throw std::invalid_argument("edge between two frozen vertices");
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());

  // depth labels from vertex 0 through free edges only; meaningful for trees,
  // harmless elsewhere (unreached free vertices keep -1)
  depth.assign(n_free, -1);
  parent.assign(n_free, -1);
  std::queue<int> q;
  depth[0] = 0;
  q.push(0);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (is_free(v) && depth[v] < 0) {
        depth[v] = depth[u] + 1;
        parent[v] = u;
        q.push(v);
      }
  }
}

SiteGraph make_graph(int n_free, int n_frozen,
                     std::vector<std::pair<int, int>> edges) {
  SiteGraph g;
  g.n_free = n_free;
  g.n_frozen = n_frozen;
  g.edges = std::move(edges);
  g.finalize();
  return g;
}

SiteGraph build_tree(const TreeSpec& spec) {
  if (spec.b < 1 || spec.depth < 0) throw std::invalid_argument("bad tree spec");
  SiteGraph g;
  // free vertices in BFS order: depth d occupies a contiguous block
  std::vector<int> level_start{0};
  int count = 1;
  for (int d = 0; d < spec.depth; ++d) {
    level_start.push_back(count);
    int width = 1;
    for (int i = 0; i < d + 1; ++i) width *= spec.b;
    count += width;
  }
  g.n_free = count;
  for (int d = 0; d < spec.depth; ++d) {
    int width = level_start[d + 1] - level_start[d];
    for (int i = 0; i < width; ++i) {
      int u = level_start[d] + i;
      for (int c = 0; c < spec.b; ++c)
        g.edges.emplace_back(u, level_start[d + 1] + i * spec.b + c);
    }
  }
  int frozen_next = g.n_free;
  if (spec.ghost_parent) g.edges.emplace_back(0, frozen_next++);
  int leaves_start = level_start[spec.depth];
  for (int u = leaves_start; u < g.n_free; ++u)
    for (int c = 0; c < spec.b; ++c) g.edges.emplace_back(u, frozen_next++);
  g.n_frozen = frozen_next - g.n_free;
  g.finalize();
  return g;
}

SiteGraph build_path(int n_free) {
  SiteGraph g;
  g.n_free = n_free;
  for (int i = 0; i + 1 < n_free; ++i) g.edges.emplace_back(i, i + 1);
  g.finalize();
  return g;
}

SiteGraph build_cycle(int n_free) {
  if (n_free < 3) throw std::invalid_argument("cycle needs 3 vertices");
  SiteGraph g;
  g.n_free = n_free;
  for (int i = 0; i < n_free; ++i) g.edges.emplace_back(i, (i + 1) % n_free);
  g.finalize();
  return g;
}

std::vector<Trajectory> BoundarySpec::materialize(const SiteGraph& g,
                                                  double beta) const {
  if (kind == Kind::custom) {
    if ((int)custom.size() != g.n_frozen)
      throw std::invalid_argument("custom boundary size mismatch");
    for (const auto& t : custom)
      if (t.beta() != beta)
        throw std::invalid_argument("custom boundary beta mismatch");
    return custom;
  }
  int sign = kind == Kind::all_plus ? 1 : -1;
  std::vector<Trajectory> out;
  out.reserve(g.n_frozen);
  for (int i = 0; i < g.n_frozen; ++i) out.emplace_back(sign, std::vector<double>{}, beta);
  return out;
}

PiecewiseField local_field(const SiteGraph& g, const SpinConfigMap& config,
                           const std::vector<Trajectory>& frozen,
                           const PiecewiseField& base, int site) {
  if (!g.is_free(site)) throw std::invalid_argument("local_field wants a free site");
  if ((int)config.size() != g.n_free || (int)frozen.size() != g.n_frozen)
    throw std::invalid_argument("configuration size mismatch");
  std::vector<const Trajectory*> nbrs;
  nbrs.reserve(g.adj[site].size());
  for (int v : g.adj[site])
    nbrs.push_back(g.is_free(v) ? &config[v] : &frozen[v - g.n_free]);
  return assemble_field(base, nbrs);
}

SpinConfigMap constant_config(const SiteGraph& g, int sign, double beta) {
  SpinConfigMap out;
  out.reserve(g.n_free);
  for (int i = 0; i < g.n_free; ++i) out.emplace_back(sign, std::vector<double>{}, beta);
  return out;
}

}  // namespace qising

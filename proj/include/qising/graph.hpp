#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qising/trajectory.hpp"

namespace qising {

// Finite interaction graph. Vertices 0..n_free-1 carry dynamical spins,
// vertices n_free..n_free+n_frozen-1 are frozen boundary sites whose
// trajectories are supplied externally. Frozen vertices never touch each
// other, so every edge has at least one free endpoint.
struct SiteGraph {
  int n_free = 0;
  int n_frozen = 0;
  std::vector<std::pair<int, int>> edges;

  // derived, filled by finalize()
  std::vector<std::vector<int>> adj;
  std::vector<int> depth;   // per free vertex; -1 when the graph is not a tree
  std::vector<int> parent;  // per free vertex; -1 at the root / non-trees

  int total() const { return n_free + n_frozen; }
  bool is_free(int v) const { return v >= 0 && v < n_free; }
  bool is_frozen(int v) const { return v >= n_free && v < total(); }

  void finalize();  // build adjacency, validate roles and ranges
};

SiteGraph make_graph(int n_free, int n_frozen,
                     std::vector<std::pair<int, int>> edges);

// Rooted regular tree: root 0, every free vertex has b children, free depths
// 0..depth. Each depth-`depth` leaf gets b frozen ghost children; when
// ghost_parent is set the root gets one extra frozen neighbor (used to feed a
// boundary trajectory into the root from above). Frozen vertices are numbered
// ghost parent first (if present), then leaf ghosts in leaf order.
struct TreeSpec {
  int b = 2;
  int depth = 2;
  bool ghost_parent = false;
};

SiteGraph build_tree(const TreeSpec& spec);

SiteGraph build_path(int n_free);
SiteGraph build_cycle(int n_free);

// Fixed trajectories for the frozen vertices.
struct BoundarySpec {
  enum class Kind { all_plus, all_minus, custom };
  Kind kind = Kind::all_plus;
  std::vector<Trajectory> custom;  // one per frozen vertex when kind==custom

  static BoundarySpec all_plus() { return {Kind::all_plus, {}}; }
  static BoundarySpec all_minus() { return {Kind::all_minus, {}}; }

  // concrete trajectory list, one per frozen vertex
  std::vector<Trajectory> materialize(const SiteGraph& g, double beta) const;
};

using SpinConfigMap = std::vector<Trajectory>;  // indexed by free vertex

// The field experienced by `site`: base field plus the trajectories of all
// neighbors, free ones read from the configuration and frozen ones from the
// materialized boundary.
PiecewiseField local_field(const SiteGraph& g, const SpinConfigMap& config,
                           const std::vector<Trajectory>& frozen,
                           const PiecewiseField& base, int site);

// all-equal starting configuration
SpinConfigMap constant_config(const SiteGraph& g, int sign, double beta);

}  // namespace qising

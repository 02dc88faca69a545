#include "qising/graph.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"

using namespace qising;

TEST_CASE("regular tree vertex and edge counts") {
  // b=2, depth 3: 1+2+4+8 = 15 free, 8 leaves * 2 ghosts = 16 frozen
  auto g = build_tree({2, 3, false});
  CHECK(g.n_free == 15);
  CHECK(g.n_frozen == 16);
  CHECK((int)g.edges.size() == 14 + 16);

  // b=3, depth 2: 1+3+9 = 13 free, 9*3 = 27 frozen
  auto g3 = build_tree({3, 2, false});
  CHECK(g3.n_free == 13);
  CHECK(g3.n_frozen == 27);

  // ghost parent adds one frozen neighbor at the root
  auto gp = build_tree({2, 2, true});
  CHECK(gp.n_free == 7);
  CHECK(gp.n_frozen == 1 + 8);
  CHECK(gp.adj[0].size() == 3);
  CHECK(std::count(gp.adj[0].begin(), gp.adj[0].end(), gp.n_free) == 1);

  // depth 0: a single free vertex with b frozen children
  auto g0 = build_tree({2, 0, false});
  CHECK(g0.n_free == 1);
  CHECK(g0.n_frozen == 2);
}

TEST_CASE("tree degrees, depths and parents") {
  auto g = build_tree({2, 3, false});
  // every free vertex: root degree b, interior b+1, leaves 1 free parent + b ghosts
  CHECK(g.adj[0].size() == 2);
  for (int v = 1; v < g.n_free; ++v) CHECK(g.adj[v].size() == 3);
  for (int v = g.n_free; v < g.total(); ++v) CHECK(g.adj[v].size() == 1);

  std::vector<int> count_at_depth(4, 0);
  for (int v = 0; v < g.n_free; ++v) {
    REQUIRE(g.depth[v] >= 0);
    REQUIRE(g.depth[v] <= 3);
    ++count_at_depth[g.depth[v]];
    if (v == 0)
      CHECK(g.parent[v] == -1);
    else
      CHECK(g.depth[g.parent[v]] == g.depth[v] - 1);
  }
  CHECK(count_at_depth == std::vector<int>{1, 2, 4, 8});

  // children of v sit in a contiguous block in BFS order
  for (int v = 0; v < g.n_free; ++v)
    if (g.depth[v] < 3) {
      std::vector<int> kids;
      for (int u : g.adj[v])
        if (g.is_free(u) && u != g.parent[v]) kids.push_back(u);
      REQUIRE(kids.size() == 2);
      CHECK(kids[1] == kids[0] + 1);
    }
}

TEST_CASE("path and cycle shapes") {
  auto p = build_path(4);
  CHECK(p.n_free == 4);
  CHECK(p.n_frozen == 0);
  CHECK(p.edges.size() == 3);
  CHECK(p.adj[0].size() == 1);
  CHECK(p.adj[1].size() == 2);

  auto c = build_cycle(5);
  CHECK(c.edges.size() == 5);
  for (int v = 0; v < 5; ++v) CHECK(c.adj[v].size() == 2);
  CHECK_THROWS(build_cycle(2));
}

TEST_CASE("graph validation") {
  CHECK_THROWS(make_graph(0, 0, {}));
  CHECK_THROWS(make_graph(2, 0, {{0, 2}}));
  CHECK_THROWS(make_graph(2, 0, {{0, 0}}));
  // frozen-frozen edge rejected
  CHECK_THROWS(make_graph(1, 2, {{1, 2}}));
  auto g = make_graph(2, 1, {{0, 1}, {0, 2}});
  CHECK(g.adj[0] == std::vector<int>{1, 2});
}

TEST_CASE("boundary materialization") {
  auto g = build_tree({2, 1, false});
  auto plus = BoundarySpec::all_plus().materialize(g, 2.0);
  REQUIRE((int)plus.size() == g.n_frozen);
  for (const auto& t : plus) {
    CHECK(t.value(1.3) == 1);
    CHECK(t.flips().empty());
  }
  auto minus = BoundarySpec::all_minus().materialize(g, 2.0);
  CHECK(minus[0].value(0.0) == -1);

  BoundarySpec custom{BoundarySpec::Kind::custom, {}};
  custom.custom.assign(g.n_frozen, Trajectory(1, {0.5}, 2.0));
  auto mats = custom.materialize(g, 2.0);
  CHECK(mats[2].value(1.0) == -1);
  custom.custom.pop_back();
  CHECK_THROWS(custom.materialize(g, 2.0));
}

TEST_CASE("local field assembles neighbor trajectories") {
  // path 0-1-2 plus one frozen neighbor 3 attached to site 1
  auto g = make_graph(3, 1, {{0, 1}, {1, 2}, {1, 3}});
  double beta = 1.0;
  SpinConfigMap config;
  config.emplace_back(1, std::vector<double>{0.25}, beta);   // +1 then -1
  config.emplace_back(1, std::vector<double>{}, beta);       // constant +1
  config.emplace_back(-1, std::vector<double>{0.75}, beta);  // -1 then +1
  std::vector<Trajectory> frozen{Trajectory(-1, {}, beta)};
  auto base = PiecewiseField::constant(0.4, beta);

  auto f1 = local_field(g, config, frozen, base, 1);
  // neighbors of 1: sites 0, 2 and frozen 3
  CHECK(f1.value(0.1) == doctest::Approx(0.4 + 1 - 1 - 1));
  CHECK(f1.value(0.5) == doctest::Approx(0.4 - 1 - 1 - 1));
  CHECK(f1.value(0.9) == doctest::Approx(0.4 - 1 + 1 - 1));

  auto f0 = local_field(g, config, frozen, base, 0);  // only neighbor is 1
  CHECK(f0.value(0.6) == doctest::Approx(1.4));

  CHECK_THROWS(local_field(g, config, frozen, base, 3));
  auto cc = constant_config(g, -1, beta);
  CHECK((int)cc.size() == 3);
  CHECK(cc[2].value(0.2) == -1);
}

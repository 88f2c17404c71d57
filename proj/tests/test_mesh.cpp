#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pme/mesh.hpp"

using namespace pme;

TEST_CASE("structured mesh 1D counts") {
  Mesh mesh = build_structured_mesh(1, {0.0, 0.0}, {1.0, 0.0}, 0.25);
  CHECK(mesh.num_nodes() == 5);
  CHECK(mesh.num_elements() == 4);
  CHECK(mesh.dim() == 1);
  for (int e = 0; e < mesh.num_elements(); ++e)
    CHECK(signed_measure(mesh, e) == doctest::Approx(0.25));
}

TEST_CASE("structured mesh 2D counts and orientation") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.5);
  CHECK(mesh.num_nodes() == 9);
  CHECK(mesh.num_elements() == 8);
  double total = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    double a = signed_measure(mesh, e);
    CHECK(a > 0.0);
    total += a;
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("structured mesh rejects oversized h") {
  CHECK_THROWS_WITH_AS(build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 2.0),
                       "degenerate mesh", std::invalid_argument);
}

TEST_CASE("signed measure of a triangle") {
  Mesh mesh(2, {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {{{0, 1, 2}}});
  CHECK(signed_measure(mesh, 0) == doctest::Approx(0.5));

  // Orientation flip and collinear degeneracy, via external coordinates.
  std::vector<Vec> flipped = {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
  CHECK(signed_measure(mesh, flipped, 0) == doctest::Approx(-0.5));
  std::vector<Vec> collinear = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
  CHECK(signed_measure(mesh, collinear, 0) == doctest::Approx(0.0));
}

TEST_CASE("node patch counts on the 9-node unit square") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.5);
  // Center node of a 3x3 grid.
  int center = -1;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    const Vec& x = mesh.coords()[p];
    if (x[0] == 0.5 && x[1] == 0.5) center = p;
  }
  REQUIRE(center >= 0);
  NodePatch patch = node_patch(mesh, center);
  CHECK(patch.elements.size() == 6);
  CHECK(patch.neighbor_nodes.size() == 6);

  int corner_min = 100, corner_max = 0;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    const Vec& x = mesh.coords()[p];
    bool corner = (x[0] == 0.0 || x[0] == 1.0) && (x[1] == 0.0 || x[1] == 1.0);
    if (!corner) continue;
    int ne = static_cast<int>(node_patch(mesh, p).elements.size());
    corner_min = std::min(corner_min, ne);
    corner_max = std::max(corner_max, ne);
  }
  CHECK(corner_min == 1);
  CHECK(corner_max == 2);
}

TEST_CASE("node patch in 1D") {
  Mesh mesh = build_structured_mesh(1, {0.0, 0.0}, {1.0, 0.0}, 0.25);
  NodePatch patch = node_patch(mesh, 2);
  CHECK(patch.elements.size() == 2);
  CHECK(patch.neighbor_nodes.size() == 2);
}

TEST_CASE("node patch matches brute force") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.25);
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    NodePatch patch = node_patch(mesh, p);
    std::set<int> elems, nbrs;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const auto& el = mesh.element(e);
      bool has = el[0] == p || el[1] == p || el[2] == p;
      if (!has) continue;
      elems.insert(e);
      for (int v : el)
        if (v != p && v >= 0) nbrs.insert(v);
    }
    CHECK(std::set<int>(patch.elements.begin(), patch.elements.end()) == elems);
    CHECK(std::set<int>(patch.neighbor_nodes.begin(), patch.neighbor_nodes.end()) == nbrs);
  }
}

TEST_CASE("boundary flags on the structured square") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.5);
  int boundary = 0;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    const Vec& x = mesh.coords()[p];
    bool on_edge = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0;
    CHECK(mesh.is_boundary_node(p) == on_edge);
    boundary += on_edge;
  }
  CHECK(boundary == 8);
}

TEST_CASE("fix_inverted_elements leaves a clean mesh alone") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.5);
  std::vector<Vec> X = mesh.coords();
  auto flattened = fix_inverted_elements(mesh, X, 0);
  CHECK(flattened.empty());
  CHECK(X == mesh.coords());
}

TEST_CASE("fix_inverted_elements flattens a crossed triangle") {
  // Two triangles sharing edge 1-2; node 0 is pushed across that edge.
  Mesh mesh(2, {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}},
            {{{0, 1, 2}}, {{1, 3, 2}}});
  std::vector<Vec> X = mesh.coords();
  X[0] = {0.8, 0.8};
  CHECK(signed_measure(mesh, X, 0) < 0.0);
  auto flattened = fix_inverted_elements(mesh, X, 0, 1);
  REQUIRE(flattened.size() == 1);
  CHECK(flattened[0] == 0);
  for (int e = 0; e < mesh.num_elements(); ++e) CHECK(signed_measure(mesh, X, e) >= 0.0);
  CHECK(std::abs(signed_measure(mesh, X, 0)) <= 1e-14);
  // The moved node and its target stayed put; the third vertex was repaired.
  CHECK(X[0][0] == 0.8);
  CHECK(X[1] == mesh.coords()[1]);
  CHECK(X[3] == mesh.coords()[3]);
}

TEST_CASE("fix_inverted_elements in 1D") {
  Mesh mesh = build_structured_mesh(1, {0.0, 0.0}, {1.0, 0.0}, 0.25);
  std::vector<Vec> X = mesh.coords();
  // Node 1 moved past node 2: segment (1,2) inverts.
  X[1] = {0.6, 0.0};
  CHECK(signed_measure(mesh, X, 1) < 0.0);
  auto flattened = fix_inverted_elements(mesh, X, 1, 2);
  REQUIRE(flattened.size() == 1);
  CHECK(flattened[0] == 1);
  CHECK(X[2][0] == doctest::Approx(0.6));
  for (int e = 0; e < mesh.num_elements(); ++e) CHECK(signed_measure(mesh, X, e) >= 0.0);
}

TEST_CASE("mesh construction rejects inverted elements") {
  CHECK_THROWS(Mesh(2, {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}}, {{{0, 1, 2}}}));
}

TEST_CASE("topology is immutable under coordinate motion") {
  Mesh mesh = build_structured_mesh(2, {0.0, 0.0}, {1.0, 1.0}, 0.5);
  auto elements = mesh.elements();
  auto nbrs4 = mesh.node_neighbors(4);
  mesh.coords()[4] = {0.4, 0.6};
  CHECK(mesh.elements() == elements);
  CHECK(mesh.node_neighbors(4) == nbrs4);
  CHECK(mesh.ref_coords()[4][0] == 0.5);
}

TEST_CASE("snapshot writer emits node and element tables") {
  Mesh mesh = build_structured_mesh(1, {0.0, 0.0}, {1.0, 0.0}, 0.5);
  NodalField U = {1.0, 2.0, 3.0};
  std::ostringstream os;
  write_snapshot(os, mesh, mesh.coords(), 0.25, {{"u", &U}});
  std::string text = os.str();
  CHECK(text.find("u") != std::string::npos);
  CHECK(text.find("0.25") != std::string::npos);
  // One line per node and per element at minimum.
  CHECK(std::count(text.begin(), text.end(), '\n') >= 5);
}

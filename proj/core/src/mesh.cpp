#include "pme/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <ostream>
#include <set>
#include <stdexcept>

namespace pme {

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

Mesh::Mesh(int dim, std::vector<Vec> nodes, std::vector<std::array<int, 3>> elements)
    : dim_(dim), coords_(std::move(nodes)), elements_(std::move(elements)) {
  if (dim_ != 1 && dim_ != 2) throw std::invalid_argument("mesh dim must be 1 or 2");
  ref_coords_ = coords_;

  const int n = num_nodes();
  node_to_elements_.resize(n);
  for (int e = 0; e < num_elements(); ++e) {
    for (int k = 0; k < nodes_per_element(); ++k) {
      int p = elements_[e][k];
      if (p < 0 || p >= n) throw std::invalid_argument("element node index out of range");
      node_to_elements_[p].push_back(e);
    }
    if (signed_measure(*this, e) < 0.0)
      throw std::invalid_argument("negative signed measure at construction");
  }

  node_to_nodes_.resize(n);
  std::vector<std::set<int>> nbr(n);
  for (const auto& el : elements_) {
    for (int a = 0; a < nodes_per_element(); ++a)
      for (int b = 0; b < nodes_per_element(); ++b)
        if (a != b) nbr[el[a]].insert(el[b]);
  }
  for (int p = 0; p < n; ++p) node_to_nodes_[p].assign(nbr[p].begin(), nbr[p].end());

  // Boundary detection: a facet (node in 1D, edge in 2D) shared by a single
  // element is a boundary facet.
  boundary_node_.assign(n, 0);
  if (dim_ == 1) {
    for (int p = 0; p < n; ++p)
      if (node_to_elements_[p].size() == 1) boundary_node_[p] = 1;
  } else {
    std::set<std::pair<int, int>> seen, twice;
    for (const auto& el : elements_) {
      for (int k = 0; k < 3; ++k) {
        int a = el[k], b = el[(k + 1) % 3];
        auto key = std::minmax(a, b);
        if (!seen.insert(key).second) twice.insert(key);
      }
    }
    for (const auto& [a, b] : seen) {
      if (!twice.count({a, b})) {
        boundary_node_[a] = 1;
        boundary_node_[b] = 1;
      }
    }
  }

  double hsum = 0.0;
  int hcount = 0;
  for (const auto& el : elements_) {
    for (int a = 0; a < nodes_per_element(); ++a)
      for (int b = a + 1; b < nodes_per_element(); ++b) {
        hsum += norm(coords_[el[a]] - coords_[el[b]]);
        ++hcount;
      }
  }
  h_ = hcount ? hsum / hcount : 0.0;
}

Mesh build_structured_mesh(int dim, const Vec& lo, const Vec& hi, double h) {
  if (h <= 0.0) throw std::invalid_argument("degenerate mesh");
  for (int d = 0; d < dim; ++d)
    if (hi[d] <= lo[d] || h > hi[d] - lo[d]) throw std::invalid_argument("degenerate mesh");

  auto subdivisions = [&](int d) {
    int n = static_cast<int>(std::round((hi[d] - lo[d]) / h));
    if (n < 1) throw std::invalid_argument("degenerate mesh");
    return n;
  };

  if (dim == 1) {
    int nx = subdivisions(0);
    std::vector<Vec> nodes(nx + 1);
    for (int i = 0; i <= nx; ++i) nodes[i] = {lo[0] + (hi[0] - lo[0]) * i / nx, 0.0};
    std::vector<std::array<int, 3>> elems(nx);
    for (int i = 0; i < nx; ++i) elems[i] = {i, i + 1, -1};
    return Mesh(1, std::move(nodes), std::move(elems));
  }

  int nx = subdivisions(0), ny = subdivisions(1);
  std::vector<Vec> nodes((nx + 1) * (ny + 1));
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      nodes[id(i, j)] = {lo[0] + (hi[0] - lo[0]) * i / nx, lo[1] + (hi[1] - lo[1]) * j / ny};

  std::vector<std::array<int, 3>> elems;
  elems.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      // Same diagonal in every cell, both triangles counterclockwise.
      elems.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      elems.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return Mesh(2, std::move(nodes), std::move(elems));
}

double signed_measure(const Mesh& mesh, const std::vector<Vec>& X, int element_index) {
  const auto& el = mesh.element(element_index);
  if (mesh.dim() == 1) return X[el[1]][0] - X[el[0]][0];
  const Vec& a = X[el[0]];
  const Vec& b = X[el[1]];
  const Vec& c = X[el[2]];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

double signed_measure(const Mesh& mesh, int element_index) {
  return signed_measure(mesh, mesh.coords(), element_index);
}

NodePatch node_patch(const Mesh& mesh, int p) {
  return NodePatch{mesh.node_elements(p), mesh.node_neighbors(p)};
}

namespace {

// Moves X[c] onto the affine span of the element's other vertices so the
// element measure becomes 0. A final nudge along the measure gradient removes
// rounding of the projection itself.
void flatten_element(const Mesh& mesh, std::vector<Vec>& X, int e, int c) {
  const auto& el = mesh.element(e);
  if (mesh.dim() == 1) {
    int other = (el[0] == c) ? el[1] : el[0];
    X[c] = X[other];
    return;
  }
  int a = -1, b = -1;
  for (int k = 0; k < 3; ++k) {
    if (el[k] == c) continue;
    (a < 0 ? a : b) = el[k];
  }
  Vec ab = X[b] - X[a];
  double len2 = dot(ab, ab);
  if (len2 > 0.0) {
    double s = dot(X[c] - X[a], ab) / len2;
    X[c] = X[a] + s * ab;
    // Kill the projection's rounding error in the signed area.
    for (int iter = 0; iter < 4; ++iter) {
      double area = signed_measure(mesh, X, e);
      if (area >= 0.0) break;
      Vec n{-ab[1], ab[0]};
      X[c] = X[c] - (2.0 * area / len2) * n;
    }
    if (signed_measure(mesh, X, e) < 0.0) X[c] = X[a];
  } else {
    X[c] = X[a];
  }
}

int repair_vertex(const Mesh& mesh, int e, int moved, std::optional<int> target) {
  const auto& el = mesh.element(e);
  int best = -1;
  for (int k = 0; k < mesh.nodes_per_element(); ++k) {
    int p = el[k];
    if (p == moved) continue;
    if (target && p == *target) continue;
    if (best < 0 || p < best) best = p;
  }
  if (best < 0) {
    // Element is {moved, target} degenerate pairing; fall back to any vertex
    // that is not the moved one.
    for (int k = 0; k < mesh.nodes_per_element(); ++k)
      if (el[k] != moved) return el[k];
  }
  return best;
}

}  // namespace

std::vector<int> fix_inverted_elements(const Mesh& mesh, std::vector<Vec>& X,
                                       int recently_moved, std::optional<int> target) {
  std::vector<int> flattened;
  std::deque<std::pair<int, std::optional<int>>> work;
  work.push_back({recently_moved, target});
  int moves = 0;

  while (!work.empty()) {
    auto [moved, tgt] = work.front();
    work.pop_front();
    // Ascending element index around the moved node.
    for (int e : mesh.node_elements(moved)) {
      if (signed_measure(mesh, X, e) >= 0.0) continue;
      int c = repair_vertex(mesh, e, moved, tgt);
      flatten_element(mesh, X, e, c);
      flattened.push_back(e);
      if (++moves > mesh.num_nodes()) throw std::runtime_error("mesh tangling");
      work.push_back({c, std::nullopt});
    }
  }
  return flattened;
}

void write_snapshot(std::ostream& os, const Mesh& mesh, const std::vector<Vec>& X,
                    double t, const std::vector<std::pair<std::string, const NodalField*>>& fields) {
  std::string line;
  line = "# pme snapshot t=";
  append_number(line, t);
  line += "\n# dim ";
  append_number(line, mesh.dim());
  line += " nodes ";
  append_number(line, mesh.num_nodes());
  line += " elements ";
  append_number(line, mesh.num_elements());
  line += "\n# columns: index x";
  if (mesh.dim() == 2) line += " y";
  for (const auto& [name, f] : fields) {
    line += " ";
    line += name;
  }
  line += "\n";
  os << line;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    line.clear();
    append_number(line, p);
    for (int d = 0; d < mesh.dim(); ++d) {
      line += " ";
      append_number(line, X[p][d]);
    }
    for (const auto& [name, f] : fields) {
      line += " ";
      append_number(line, (*f)[p]);
    }
    line += "\n";
    os << line;
  }
  os << "# elements\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    line.clear();
    const auto& el = mesh.element(e);
    for (int k = 0; k < mesh.nodes_per_element(); ++k) {
      if (k) line += " ";
      append_number(line, el[k]);
    }
    line += "\n";
    os << line;
  }
}

}  // namespace pme

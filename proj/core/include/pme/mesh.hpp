#ifndef PME_MESH_HPP
#define PME_MESH_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pme {

// Coordinates are stored as 2-vectors; in 1D the second component is 0.
using Vec = std::array<double, 2>;

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1]}; }
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// One scalar per mesh node, aligned with node indexing.
using NodalField = std::vector<double>;

// Fixed-topology simplex mesh in 1 or 2 dimensions. Topology (elements,
// adjacency, boundary flags) is immutable after construction; only the node
// coordinates move. Elements are segments (1D, third index -1) or triangles
// with non-negative signed measure.
class Mesh {
public:
  Mesh(int dim, std::vector<Vec> nodes, std::vector<std::array<int, 3>> elements);

  int dim() const { return dim_; }
  int num_nodes() const { return static_cast<int>(coords_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }

  const std::vector<Vec>& coords() const { return coords_; }
  std::vector<Vec>& coords() { return coords_; }
  // Coordinates the mesh was built with (the reference configuration).
  const std::vector<Vec>& ref_coords() const { return ref_coords_; }

  const std::array<int, 3>& element(int e) const { return elements_[e]; }
  const std::vector<std::array<int, 3>>& elements() const { return elements_; }
  int nodes_per_element() const { return dim_ + 1; }

  bool is_boundary_node(int p) const { return boundary_node_[p] != 0; }
  const std::vector<int>& node_elements(int p) const { return node_to_elements_[p]; }
  const std::vector<int>& node_neighbors(int p) const { return node_to_nodes_[p]; }

  // Typical edge length of the reference configuration.
  double mesh_size() const { return h_; }

private:
  int dim_;
  std::vector<Vec> coords_;
  std::vector<Vec> ref_coords_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<char> boundary_node_;
  std::vector<std::vector<int>> node_to_elements_;
  std::vector<std::vector<int>> node_to_nodes_;
  double h_ = 0.0;
};

// Uniform mesh of an axis-aligned box. In 2D every grid cell is split into
// two triangles along the same diagonal, all oriented counterclockwise.
// Throws "degenerate mesh" if h does not fit inside the box.
Mesh build_structured_mesh(int dim, const Vec& lo, const Vec& hi, double h);

// Length (1D) or signed area (2D) of element e under the given coordinates.
double signed_measure(const Mesh& mesh, const std::vector<Vec>& X, int element_index);
double signed_measure(const Mesh& mesh, int element_index);

struct NodePatch {
  std::vector<int> elements;
  std::vector<int> neighbor_nodes;
};
NodePatch node_patch(const Mesh& mesh, int p);

// Flattens any inverted element reachable from a just-moved node. Each
// inverted element is repaired by projecting exactly one of its vertices (the
// one that is neither `recently_moved` nor `target`) onto the affine span of
// the element's other vertices, giving the element measure 0. Repairs may
// cascade; more than num_nodes() vertex moves throws "mesh tangling".
// Returns the indices of the flattened elements.
std::vector<int> fix_inverted_elements(const Mesh& mesh, std::vector<Vec>& X,
                                       int recently_moved,
                                       std::optional<int> target = std::nullopt);

// Plain-text snapshot: node table (index, coordinates, one column per field),
// then the element table.
void write_snapshot(std::ostream& os, const Mesh& mesh, const std::vector<Vec>& X,
                    double t, const std::vector<std::pair<std::string, const NodalField*>>& fields);

}  // namespace pme

#endif

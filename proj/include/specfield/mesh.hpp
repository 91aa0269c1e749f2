#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace specfield {

/// Simplicial mesh of an interval, a planar polygon or an embedded surface.
///
/// Vertices carry ambient coordinates (embed_dim columns), elements are
/// (dim+1)-tuples of vertex indices. Orientation consistency is not required;
/// assembly works with absolute simplex volumes. Boundary flags are always
/// derived topologically (facets incident to exactly one element), never from
/// coordinates. Immutable after construction by the builders/loaders below.
struct Mesh {
  int dim = 0;        // intrinsic dimension d (1 or 2)
  int embed_dim = 0;  // ambient dimension m, m >= dim
  Eigen::MatrixXd vertices;                   // n_vertices x embed_dim
  Eigen::MatrixXi elements;                   // n_elements x (dim+1)
  std::vector<std::uint8_t> boundary_vertex;  // 1 iff on the topological boundary

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
  int n_elements() const { return static_cast<int>(elements.rows()); }

  /// Absolute d-volume of element e (length / area), sqrt(det(E^T E)) / d!.
  double element_volume(int e) const;

  /// Order-independent fingerprint of the mesh contents, for sample provenance.
  std::uint64_t content_hash() const;
};

struct MeshStats {
  double h = 0.0;  // max edge length
  int n_vertices = 0;
  int n_elements = 0;
  int n_interior = 0;
};

/// Uniform partition of [a, b] into n_cells edges. Endpoints are boundary.
Mesh build_interval_mesh(double a, double b, int n_cells);

/// Structured triangulation of [0,lx] x [0,ly]; each of the nx*ny cells is
/// split into two triangles. Perimeter vertices are boundary.
Mesh build_rectangle_mesh(double lx, double ly, int nx, int ny);

/// Icosahedron refined `subdivisions` times, vertices projected onto the
/// sphere of given radius. Closed surface: no boundary vertices.
Mesh build_icosphere_mesh(double radius, int subdivisions);

enum class MeshFormat { Auto, Off, NodeElement };

/// Reads OFF or node-element text (see README for the exact layouts).
/// Auto picks OFF for a leading "OFF" header and node-element otherwise.
Mesh load_mesh(const std::string& path, MeshFormat format = MeshFormat::Auto);

MeshStats mesh_stats(const Mesh& mesh);

/// Indices of non-boundary vertices, ascending.
std::vector<int> interior_vertices(const Mesh& mesh);

/// Sum of element volumes.
double total_volume(const Mesh& mesh);

/// Recomputes boundary_vertex from facet incidence counts.
/// A facet of a valid simplicial mesh belongs to exactly 1 or 2 elements.
void compute_boundary_flags(Mesh& mesh);

/// Checks index ranges, element volumes and facet incidence; throws
/// std::invalid_argument with a description on the first violation.
void validate_mesh(const Mesh& mesh);

}  // namespace specfield

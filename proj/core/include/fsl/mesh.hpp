#pragma once

#include <array>
#include <iosfwd>
#include <vector>

namespace fsl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

enum class DomainKind { Rectangle, LShape, Custom };

/// Boundary tags for rectangle domains (unit square, Mandel strip).
namespace tag {
inline constexpr int bottom = 0;
inline constexpr int right = 1;
inline constexpr int top = 2;
inline constexpr int left = 3;
/// Boundary segments of the L-shaped domain, counted as in the
/// experiment catalog: left, bottom, lower right, inner horizontal,
/// inner vertical, upper left top.
inline constexpr int gamma1 = 1;
inline constexpr int gamma2 = 2;
inline constexpr int gamma3 = 3;
inline constexpr int gamma4 = 4;
inline constexpr int gamma5 = 5;
inline constexpr int gamma6 = 6;
}  // namespace tag

struct BoundaryEdge {
  int v0 = -1;
  int v1 = -1;
  int tag = 0;
};

/// Conforming triangle mesh with counterclockwise elements and tagged
/// boundary edges. Edge connectivity (unique edges sorted by vertex
/// pair, per-triangle edge ids) is derived by finalize_mesh and is the
/// base for quadratic mid-edge nodes.
struct Mesh {
  DomainKind kind = DomainKind::Custom;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  // derived connectivity
  std::vector<std::array<int, 2>> edges;           // (min,max), lexicographic
  std::vector<std::array<int, 3>> triangle_edges;  // local edge i = (v_i, v_{i+1})

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

struct MeshStats {
  int num_vertices = 0;
  int num_triangles = 0;
  double max_edge_length = 0.0;
  double total_area = 0.0;
};

/// Axis-aligned rectangle (0,width)x(0,height) on an nx-by-ny grid,
/// each cell split along the bottom-left to top-right diagonal.
/// Throws std::invalid_argument for non-positive sizes or counts.
Mesh build_rectangle_mesh(double width, double height, int nx, int ny);

/// Unit square minus the open upper-right quadrant (0.5,1)x(0.5,1),
/// built from the n-by-n structured square grid (n even) by dropping
/// triangles whose centroid lies in the removed quadrant. Boundary
/// edges carry tag::gamma1..gamma6.
Mesh build_l_shape_mesh(int n);

/// Computes derived connectivity and validates the mesh: positive
/// element areas, each edge shared by at most two triangles, boundary
/// edges exactly the singly-shared ones. Builders call this; call it
/// directly for hand-made meshes (boundary tags default to 0).
void finalize_mesh(Mesh& mesh);

double triangle_area(const Mesh& mesh, int t);

MeshStats mesh_statistics(const Mesh& mesh);

/// Plain text export: counts header, vertex coordinates, triangle
/// vertex ids, tagged boundary edges. 0-based, one record per line.
void write_mesh_text(const Mesh& mesh, std::ostream& out);

}  // namespace fsl

#include "fsl/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace fsl {

namespace {

constexpr double kGeomTol = 1e-12;

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

int rectangle_tag(const Vec2& mid, double width, double height) {
  if (std::abs(mid.y) < kGeomTol) return tag::bottom;
  if (std::abs(mid.x - width) < kGeomTol) return tag::right;
  if (std::abs(mid.y - height) < kGeomTol) return tag::top;
  if (std::abs(mid.x) < kGeomTol) return tag::left;
  throw std::runtime_error("rectangle boundary edge off the outline");
}

int l_shape_tag(const Vec2& mid) {
  if (std::abs(mid.x) < kGeomTol) return tag::gamma1;
  if (std::abs(mid.y) < kGeomTol) return tag::gamma2;
  if (std::abs(mid.x - 1.0) < kGeomTol && mid.y <= 0.5 + kGeomTol) return tag::gamma3;
  if (std::abs(mid.y - 0.5) < kGeomTol && mid.x >= 0.5 - kGeomTol) return tag::gamma4;
  if (std::abs(mid.x - 0.5) < kGeomTol && mid.y >= 0.5 - kGeomTol) return tag::gamma5;
  if (std::abs(mid.y - 1.0) < kGeomTol && mid.x > kGeomTol && mid.x < 0.5 - kGeomTol)
    return tag::gamma6;
  throw std::runtime_error("L-shape boundary edge off the outline");
}

}  // namespace

void finalize_mesh(Mesh& mesh) {
  const int nv = mesh.num_vertices();
  if (nv < 3 || mesh.triangles.empty())
    throw std::invalid_argument("mesh needs at least one triangle");

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int v : tri)
      if (v < 0 || v >= nv) throw std::invalid_argument("triangle vertex id out of range");
    if (signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) <= 0.0)
      throw std::invalid_argument("triangle with non-positive orientation");
  }

  // unique edge list, sorted by (min,max) vertex pair
  std::map<std::array<int, 2>, int> edge_id;
  std::map<std::array<int, 2>, int> edge_count;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      edge_count[key] += 1;
    }
  }
  mesh.edges.clear();
  mesh.edges.reserve(edge_count.size());
  for (const auto& [key, cnt] : edge_count) {
    if (cnt > 2) throw std::invalid_argument("edge shared by more than two triangles");
    edge_id[key] = static_cast<int>(mesh.edges.size());
    mesh.edges.push_back(key);
  }
  mesh.triangle_edges.assign(mesh.triangles.size(), {-1, -1, -1});
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      mesh.triangle_edges[t][e] = edge_id.at({std::min(a, b), std::max(a, b)});
    }
  }

  // boundary = edges with exactly one incident triangle
  std::map<std::array<int, 2>, int> given;
  for (int i = 0; i < static_cast<int>(mesh.boundary_edges.size()); ++i) {
    const auto& be = mesh.boundary_edges[i];
    given[{std::min(be.v0, be.v1), std::max(be.v0, be.v1)}] = be.tag;
  }
  std::vector<BoundaryEdge> boundary;
  for (const auto& [key, cnt] : edge_count) {
    if (cnt != 1) continue;
    auto it = given.find(key);
    boundary.push_back({key[0], key[1], it == given.end() ? 0 : it->second});
  }
  if (!given.empty() && given.size() != boundary.size())
    throw std::invalid_argument("boundary edge list does not match mesh incidence");
  mesh.boundary_edges = std::move(boundary);
}

Mesh build_rectangle_mesh(double width, double height, int nx, int ny) {
  if (!(width > 0.0) || !(height > 0.0))
    throw std::invalid_argument("rectangle sides must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("cell counts must be positive");

  Mesh mesh;
  mesh.kind = DomainKind::Rectangle;
  mesh.vertices.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.push_back({width * i / nx, height * j / ny});

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int v00 = vid(i, j), v10 = vid(i + 1, j);
      int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  finalize_mesh(mesh);
  for (auto& be : mesh.boundary_edges) {
    Vec2 mid{0.5 * (mesh.vertices[be.v0].x + mesh.vertices[be.v1].x),
             0.5 * (mesh.vertices[be.v0].y + mesh.vertices[be.v1].y)};
    be.tag = rectangle_tag(mid, width, height);
  }
  return mesh;
}

Mesh build_l_shape_mesh(int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("L-shape needs an even n >= 2");

  Mesh square = build_rectangle_mesh(1.0, 1.0, n, n);
  Mesh mesh;
  mesh.kind = DomainKind::LShape;

  std::vector<int> remap(square.vertices.size(), -1);
  for (const auto& tri : square.triangles) {
    Vec2 c{(square.vertices[tri[0]].x + square.vertices[tri[1]].x + square.vertices[tri[2]].x) / 3.0,
           (square.vertices[tri[0]].y + square.vertices[tri[1]].y + square.vertices[tri[2]].y) / 3.0};
    if (c.x > 0.5 && c.y > 0.5) continue;
    std::array<int, 3> mapped{};
    for (int k = 0; k < 3; ++k) {
      int v = tri[k];
      if (remap[v] < 0) {
        remap[v] = mesh.num_vertices();
        mesh.vertices.push_back(square.vertices[v]);
      }
      mapped[k] = remap[v];
    }
    mesh.triangles.push_back(mapped);
  }

  finalize_mesh(mesh);
  for (auto& be : mesh.boundary_edges) {
    Vec2 mid{0.5 * (mesh.vertices[be.v0].x + mesh.vertices[be.v1].x),
             0.5 * (mesh.vertices[be.v0].y + mesh.vertices[be.v1].y)};
    be.tag = l_shape_tag(mid);
  }
  return mesh;
}

double triangle_area(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles.at(t);
  return signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
}

MeshStats mesh_statistics(const Mesh& mesh) {
  MeshStats s;
  s.num_vertices = mesh.num_vertices();
  s.num_triangles = mesh.num_triangles();
  for (int t = 0; t < mesh.num_triangles(); ++t) s.total_area += triangle_area(mesh, t);
  for (const auto& e : mesh.edges) {
    double dx = mesh.vertices[e[0]].x - mesh.vertices[e[1]].x;
    double dy = mesh.vertices[e[0]].y - mesh.vertices[e[1]].y;
    s.max_edge_length = std::max(s.max_edge_length, std::hypot(dx, dy));
  }
  return s;
}

void write_mesh_text(const Mesh& mesh, std::ostream& out) {
  out.precision(17);
  out << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' '
      << mesh.boundary_edges.size() << '\n';
  for (const auto& v : mesh.vertices) out << v.x << ' ' << v.y << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& b : mesh.boundary_edges) out << b.v0 << ' ' << b.v1 << ' ' << b.tag << '\n';
}

}  // namespace fsl

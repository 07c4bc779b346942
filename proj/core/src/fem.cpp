#include "fsl/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsl {

namespace {

struct RefShapes {
  int n = 0;
  double N[6];
  double dxi[6];   // d/dxi in reference coordinates
  double deta[6];  // d/deta
};

// P1: barycentric coordinates themselves. P2: vertex functions
// l(2l-1) plus edge bubbles 4*l_i*l_j on edges (0,1), (1,2), (2,0).
RefShapes ref_shapes(bool quadratic, const QuadratureRule::Point& q) {
  RefShapes s;
  const double l0 = q.l0, l1 = q.l1, l2 = q.l2;
  // gradients of (l0, l1, l2) are (-1,-1), (1,0), (0,1)
  if (!quadratic) {
    s.n = 3;
    s.N[0] = l0; s.N[1] = l1; s.N[2] = l2;
    s.dxi[0] = -1; s.deta[0] = -1;
    s.dxi[1] = 1;  s.deta[1] = 0;
    s.dxi[2] = 0;  s.deta[2] = 1;
    return s;
  }
  s.n = 6;
  s.N[0] = l0 * (2 * l0 - 1);
  s.N[1] = l1 * (2 * l1 - 1);
  s.N[2] = l2 * (2 * l2 - 1);
  s.N[3] = 4 * l0 * l1;
  s.N[4] = 4 * l1 * l2;
  s.N[5] = 4 * l2 * l0;
  s.dxi[0] = -(4 * l0 - 1); s.deta[0] = -(4 * l0 - 1);
  s.dxi[1] = 4 * l1 - 1;    s.deta[1] = 0;
  s.dxi[2] = 0;             s.deta[2] = 4 * l2 - 1;
  s.dxi[3] = 4 * (l0 - l1); s.deta[3] = -4 * l1;
  s.dxi[4] = 4 * l2;        s.deta[4] = 4 * l1;
  s.dxi[5] = -4 * l2;       s.deta[5] = 4 * (l0 - l2);
  return s;
}

struct ElementGeometry {
  double j00, j01, j10, j11;  // Jacobian columns = edge vectors
  double det;                 // = 2 * area, positive for CCW elements
  // physical gradient of a reference gradient (gx, gy)
  Vec2 push_gradient(double dxi, double deta) const {
    // J^{-T} * (dxi, deta)
    return {(j11 * dxi - j10 * deta) / det, (-j01 * dxi + j00 * deta) / det};
  }
};

ElementGeometry element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2& a = mesh.vertices[tri[0]];
  const Vec2& b = mesh.vertices[tri[1]];
  const Vec2& c = mesh.vertices[tri[2]];
  ElementGeometry g;
  g.j00 = b.x - a.x;
  g.j10 = b.y - a.y;
  g.j01 = c.x - a.x;
  g.j11 = c.y - a.y;
  g.det = g.j00 * g.j11 - g.j01 * g.j10;
  return g;
}

Vec2 map_point(const Mesh& mesh, int t, const QuadratureRule::Point& q) {
  const auto& tri = mesh.triangles[t];
  const Vec2& a = mesh.vertices[tri[0]];
  const Vec2& b = mesh.vertices[tri[1]];
  const Vec2& c = mesh.vertices[tri[2]];
  return {q.l0 * a.x + q.l1 * b.x + q.l2 * c.x, q.l0 * a.y + q.l1 * b.y + q.l2 * c.y};
}

void require_pressure_space(const FunctionSpace& p) {
  if (p.kind() != SpaceKind::P1Scalar)
    throw std::invalid_argument("pressure space must be P1Scalar");
}

void require_displacement_space(const FunctionSpace& u) {
  if (u.components() != 2)
    throw std::invalid_argument("displacement space must be a vector space");
}

}  // namespace

// ---- FunctionSpace ----

FunctionSpace::FunctionSpace(const Mesh& mesh, SpaceKind kind) : mesh_(&mesh), kind_(kind) {
  if (mesh.triangle_edges.size() != mesh.triangles.size())
    throw std::invalid_argument("mesh connectivity missing, call finalize_mesh first");
  num_nodes_ = mesh.num_vertices() + (quadratic() ? mesh.num_edges() : 0);
}

int FunctionSpace::element_node(int t, int k) const {
  const auto& tri = mesh_->triangles[t];
  if (k < 3) return tri[k];
  return mesh_->num_vertices() + mesh_->triangle_edges[t][k - 3];
}

Vec2 FunctionSpace::node_position(int node) const {
  const int nv = mesh_->num_vertices();
  if (node < nv) return mesh_->vertices[node];
  const auto& e = mesh_->edges[node - nv];
  return {0.5 * (mesh_->vertices[e[0]].x + mesh_->vertices[e[1]].x),
          0.5 * (mesh_->vertices[e[0]].y + mesh_->vertices[e[1]].y)};
}

std::vector<int> FunctionSpace::boundary_edge_nodes(const BoundaryEdge& be) const {
  std::vector<int> nodes{be.v0, be.v1};
  if (quadratic()) {
    std::array<int, 2> key{std::min(be.v0, be.v1), std::max(be.v0, be.v1)};
    auto it = std::lower_bound(mesh_->edges.begin(), mesh_->edges.end(), key);
    if (it == mesh_->edges.end() || *it != key)
      throw std::invalid_argument("boundary edge not in mesh edge table");
    nodes.push_back(mesh_->num_vertices() +
                    static_cast<int>(it - mesh_->edges.begin()));
  }
  return nodes;
}

// ---- quadrature ----

const QuadratureRule& QuadratureRule::assembly() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    r.degree = 5;
    const double s15 = std::sqrt(15.0);
    const double wc = 9.0 / 80.0;
    const double a1 = (6.0 + s15) / 21.0, w1 = (155.0 + s15) / 2400.0;
    const double a2 = (6.0 - s15) / 21.0, w2 = (155.0 - s15) / 2400.0;
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, wc});
    for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double b = 1.0 - 2.0 * a;
      r.points.push_back({b, a, a, w});
      r.points.push_back({a, b, a, w});
      r.points.push_back({a, a, b, w});
    }
    return r;
  }();
  return rule;
}

const QuadratureRule& QuadratureRule::error_norm() {
  static const QuadratureRule rule = [] {
    // 6-point Gauss-Legendre on [0,1], collapsed onto the triangle via
    // (x, y) = (u, v(1-u)) with weight factor (1-u).
    const double gx[6] = {0.033765242898423986, 0.16939530676686776, 0.38069040695840156,
                          0.61930959304159844, 0.83060469323313224, 0.96623475710157601};
    const double gw[6] = {0.085662246189585178, 0.18038078652406930, 0.23395696728634552,
                          0.23395696728634552, 0.18038078652406930, 0.085662246189585178};
    QuadratureRule r;
    r.degree = 10;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const double x = gx[i];
        const double y = gx[j] * (1.0 - x);
        r.points.push_back({1.0 - x - y, x, y, gw[i] * gw[j] * (1.0 - x)});
      }
    return r;
  }();
  return rule;
}

// ---- DirichletSet ----

DirichletSet DirichletSet::from_pairs(std::vector<std::pair<int, double>> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  DirichletSet set;
  for (const auto& [dof, value] : pairs) {
    if (dof < 0) throw std::invalid_argument("negative dof in constraint set");
    if (!set.dofs_.empty() && set.dofs_.back() == dof) {
      const double prev = set.values_.back();
      if (std::abs(prev - value) > 1e-12 * std::max(1.0, std::abs(prev)))
        throw std::invalid_argument("conflicting Dirichlet values for one dof");
      continue;
    }
    set.dofs_.push_back(dof);
    set.values_.push_back(value);
  }
  return set;
}

bool DirichletSet::contains(int dof) const {
  return std::binary_search(dofs_.begin(), dofs_.end(), dof);
}

void DirichletSet::set_values(std::vector<double> values) {
  if (values.size() != values_.size())
    throw std::invalid_argument("constraint value count mismatch");
  values_ = std::move(values);
}

// ---- assembly ----

SpMat assemble_elasticity(const FunctionSpace& u_space, double mu, double lambda) {
  require_displacement_space(u_space);
  const Mesh& mesh = u_space.mesh();
  const auto& rule = QuadratureRule::assembly();
  const int npe = u_space.nodes_per_element();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_triangles() * npe * npe * 4);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geo = element_geometry(mesh, t);
    double el[12][12] = {};
    for (const auto& q : rule.points) {
      const auto s = ref_shapes(u_space.quadratic(), q);
      Vec2 g[6];
      for (int k = 0; k < s.n; ++k) g[k] = geo.push_gradient(s.dxi[k], s.deta[k]);
      const double w = q.w * geo.det;
      for (int k = 0; k < s.n; ++k) {
        for (int l = 0; l < s.n; ++l) {
          const double gkx = g[k].x, gky = g[k].y, glx = g[l].x, gly = g[l].y;
          el[2 * k][2 * l] += w * ((2 * mu + lambda) * gkx * glx + mu * gky * gly);
          el[2 * k][2 * l + 1] += w * (mu * gky * glx + lambda * gkx * gly);
          el[2 * k + 1][2 * l] += w * (mu * gkx * gly + lambda * gky * glx);
          el[2 * k + 1][2 * l + 1] += w * (mu * gkx * glx + (2 * mu + lambda) * gky * gly);
        }
      }
    }
    for (int k = 0; k < npe; ++k) {
      const int nk = u_space.element_node(t, k);
      for (int l = 0; l < npe; ++l) {
        const int nl = u_space.element_node(t, l);
        for (int ck = 0; ck < 2; ++ck)
          for (int cl = 0; cl < 2; ++cl)
            trip.emplace_back(u_space.dof(nk, ck), u_space.dof(nl, cl),
                              el[2 * k + ck][2 * l + cl]);
      }
    }
  }
  SpMat A(u_space.num_dofs(), u_space.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SpMat assemble_coupling(const FunctionSpace& u_space, const FunctionSpace& p_space) {
  require_displacement_space(u_space);
  require_pressure_space(p_space);
  if (&u_space.mesh() != &p_space.mesh())
    throw std::invalid_argument("coupling requires spaces on the same mesh");
  const Mesh& mesh = u_space.mesh();
  const auto& rule = QuadratureRule::assembly();

  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geo = element_geometry(mesh, t);
    double el[3][12] = {};
    for (const auto& q : rule.points) {
      const auto su = ref_shapes(u_space.quadratic(), q);
      const auto sp = ref_shapes(false, q);
      Vec2 g[6];
      for (int k = 0; k < su.n; ++k) g[k] = geo.push_gradient(su.dxi[k], su.deta[k]);
      const double w = q.w * geo.det;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < su.n; ++k) {
          el[j][2 * k] += w * sp.N[j] * g[k].x;
          el[j][2 * k + 1] += w * sp.N[j] * g[k].y;
        }
    }
    for (int j = 0; j < 3; ++j) {
      const int nj = p_space.element_node(t, j);
      for (int k = 0; k < u_space.nodes_per_element(); ++k) {
        const int nk = u_space.element_node(t, k);
        trip.emplace_back(nj, u_space.dof(nk, 0), el[j][2 * k]);
        trip.emplace_back(nj, u_space.dof(nk, 1), el[j][2 * k + 1]);
      }
    }
  }
  SpMat D(p_space.num_dofs(), u_space.num_dofs());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

SpMat assemble_pressure_mass(const FunctionSpace& p_space) {
  require_pressure_space(p_space);
  const Mesh& mesh = p_space.mesh();
  const auto& rule = QuadratureRule::assembly();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geo = element_geometry(mesh, t);
    double el[3][3] = {};
    for (const auto& q : rule.points) {
      const auto s = ref_shapes(false, q);
      const double w = q.w * geo.det;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) el[j][k] += w * s.N[j] * s.N[k];
    }
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        trip.emplace_back(p_space.element_node(t, j), p_space.element_node(t, k), el[j][k]);
  }
  SpMat M(p_space.num_dofs(), p_space.num_dofs());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

SpMat assemble_pressure_stiffness(const FunctionSpace& p_space, double kappa) {
  require_pressure_space(p_space);
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be nonnegative");
  const Mesh& mesh = p_space.mesh();
  const auto& rule = QuadratureRule::assembly();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geo = element_geometry(mesh, t);
    double el[3][3] = {};
    for (const auto& q : rule.points) {
      const auto s = ref_shapes(false, q);
      Vec2 g[3];
      for (int k = 0; k < 3; ++k) g[k] = geo.push_gradient(s.dxi[k], s.deta[k]);
      const double w = q.w * geo.det * kappa;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) el[j][k] += w * (g[j].x * g[k].x + g[j].y * g[k].y);
    }
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        trip.emplace_back(p_space.element_node(t, j), p_space.element_node(t, k), el[j][k]);
  }
  SpMat K(p_space.num_dofs(), p_space.num_dofs());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

Loads assemble_loads(const FunctionSpace& u_space, const FunctionSpace& p_space,
                     const VectorField& f, const ScalarField& source, Vec2 kappa_g_rho,
                     double t) {
  require_displacement_space(u_space);
  require_pressure_space(p_space);
  const Mesh& mesh = u_space.mesh();
  const auto& rule = QuadratureRule::assembly();

  Loads out;
  out.F = Vector::Zero(u_space.num_dofs());
  out.Sv = Vector::Zero(p_space.num_dofs());
  out.Gv = Vector::Zero(p_space.num_dofs());

  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const auto geo = element_geometry(mesh, e);
    for (const auto& q : rule.points) {
      const Vec2 x = map_point(mesh, e, q);
      const double w = q.w * geo.det;
      const auto su = ref_shapes(u_space.quadratic(), q);
      const auto sp = ref_shapes(false, q);
      if (f) {
        const Vec2 fx = f(x.x, x.y, t);
        for (int k = 0; k < su.n; ++k) {
          const int nk = u_space.element_node(e, k);
          out.F[u_space.dof(nk, 0)] += w * fx.x * su.N[k];
          out.F[u_space.dof(nk, 1)] += w * fx.y * su.N[k];
        }
      }
      if (source) {
        const double s = source(x.x, x.y, t);
        for (int j = 0; j < 3; ++j) out.Sv[p_space.element_node(e, j)] += w * s * sp.N[j];
      }
      if (kappa_g_rho.x != 0.0 || kappa_g_rho.y != 0.0) {
        for (int j = 0; j < 3; ++j) {
          const Vec2 g = geo.push_gradient(sp.dxi[j], sp.deta[j]);
          out.Gv[p_space.element_node(e, j)] +=
              w * (kappa_g_rho.x * g.x + kappa_g_rho.y * g.y);
        }
      }
    }
  }
  return out;
}

// ---- elimination ----

EliminatedOperator::EliminatedOperator(const SpMat& K, DirichletSet bc) : bc_(std::move(bc)) {
  if (K.rows() != K.cols()) throw std::invalid_argument("elimination needs a square operator");
  const int n = static_cast<int>(K.rows());
  for (int d : bc_.dofs())
    if (d >= n) throw std::invalid_argument("constraint dof out of range");

  std::vector<char> constrained(n, 0);
  std::vector<int> slot(n, -1);
  for (int i = 0; i < bc_.size(); ++i) {
    constrained[bc_.dofs()[i]] = 1;
    slot[bc_.dofs()[i]] = i;
  }

  std::vector<Eigen::Triplet<double>> keep, drop;
  for (int c = 0; c < K.outerSize(); ++c) {
    for (SpMat::InnerIterator it(K, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (constrained[c]) {
        if (!constrained[r]) drop.emplace_back(r, slot[c], it.value());
      } else if (!constrained[r]) {
        keep.emplace_back(r, c, it.value());
      }
    }
  }
  for (int d : bc_.dofs()) keep.emplace_back(d, d, 1.0);

  elim_.resize(n, n);
  elim_.setFromTriplets(keep.begin(), keep.end());
  dropped_cols_.resize(n, bc_.size());
  dropped_cols_.setFromTriplets(drop.begin(), drop.end());
}

Vector EliminatedOperator::apply_rhs(const Vector& b) const {
  if (b.size() != elim_.rows()) throw std::invalid_argument("rhs size mismatch");
  Vector vals = Eigen::Map<const Vector>(bc_.values().data(), bc_.size());
  Vector r = b - dropped_cols_ * vals;
  for (int i = 0; i < bc_.size(); ++i) r[bc_.dofs()[i]] = bc_.values()[i];
  return r;
}

// ---- interpolation and norms ----

Vector interpolate(const FunctionSpace& space, const ScalarField& field, double t) {
  if (space.components() != 1)
    throw std::invalid_argument("scalar interpolation needs a scalar space");
  Vector v(space.num_dofs());
  for (int n = 0; n < space.num_nodes(); ++n) {
    const Vec2 x = space.node_position(n);
    v[n] = field(x.x, x.y, t);
  }
  return v;
}

Vector interpolate(const FunctionSpace& space, const VectorField& field, double t) {
  if (space.components() != 2)
    throw std::invalid_argument("vector interpolation needs a vector space");
  Vector v(space.num_dofs());
  for (int n = 0; n < space.num_nodes(); ++n) {
    const Vec2 x = space.node_position(n);
    const Vec2 fx = field(x.x, x.y, t);
    v[space.dof(n, 0)] = fx.x;
    v[space.dof(n, 1)] = fx.y;
  }
  return v;
}

namespace {

template <class Eval>
double l2_error_impl(const FunctionSpace& space, const Vector& dofs, Eval&& diff2) {
  if (dofs.size() != space.num_dofs()) throw std::invalid_argument("dof vector size mismatch");
  const Mesh& mesh = space.mesh();
  const auto& rule = QuadratureRule::error_norm();
  double acc = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geo = element_geometry(mesh, t);
    for (const auto& q : rule.points) {
      const auto s = ref_shapes(space.quadratic(), q);
      const Vec2 x = map_point(mesh, t, q);
      acc += q.w * geo.det * diff2(t, s, x);
    }
  }
  return std::sqrt(acc);
}

}  // namespace

double l2_error(const FunctionSpace& space, const Vector& dofs, const ScalarField& field,
                double t) {
  if (space.components() != 1) throw std::invalid_argument("scalar l2_error needs a scalar space");
  return l2_error_impl(space, dofs, [&](int e, const RefShapes& s, const Vec2& x) {
    double uh = 0.0;
    for (int k = 0; k < s.n; ++k) uh += dofs[space.element_node(e, k)] * s.N[k];
    const double d = uh - field(x.x, x.y, t);
    return d * d;
  });
}

double l2_error(const FunctionSpace& space, const Vector& dofs, const VectorField& field,
                double t) {
  if (space.components() != 2) throw std::invalid_argument("vector l2_error needs a vector space");
  return l2_error_impl(space, dofs, [&](int e, const RefShapes& s, const Vec2& x) {
    double ux = 0.0, uy = 0.0;
    for (int k = 0; k < s.n; ++k) {
      const int n = space.element_node(e, k);
      ux += dofs[space.dof(n, 0)] * s.N[k];
      uy += dofs[space.dof(n, 1)] * s.N[k];
    }
    const Vec2 fx = field(x.x, x.y, t);
    const double dx = ux - fx.x, dy = uy - fx.y;
    return dx * dx + dy * dy;
  });
}

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::vector<std::pair<int, double>> boundary_constraints(const FunctionSpace& space,
                                                         const std::vector<int>& tags,
                                                         int comp, const ScalarField& value,
                                                         double t) {
  if (comp < 0 || comp >= space.components())
    throw std::invalid_argument("component out of range for space");
  std::vector<std::pair<int, double>> out;
  for (const auto& be : space.mesh().boundary_edges) {
    if (std::find(tags.begin(), tags.end(), be.tag) == tags.end()) continue;
    for (int node : space.boundary_edge_nodes(be)) {
      const Vec2 x = space.node_position(node);
      out.emplace_back(space.dof(node, comp), value ? value(x.x, x.y, t) : 0.0);
    }
  }
  return out;
}

}  // namespace fsl

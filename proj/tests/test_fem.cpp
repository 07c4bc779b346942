#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "fsl/fem.hpp"
#include "fsl/linalg.hpp"
#include "fsl/mesh.hpp"

using namespace fsl;

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// integral of x^p y^q over the reference triangle x,y >= 0, x+y <= 1
double monomial_integral(int p, int q) {
  return factorial(p) * factorial(q) / factorial(p + q + 2);
}

// barycentric gradients of a physical triangle
std::array<Vec2, 3> bary_gradients(const Mesh& m, int t) {
  const Vec2 a = m.vertices[m.triangles[t][0]];
  const Vec2 b = m.vertices[m.triangles[t][1]];
  const Vec2 c = m.vertices[m.triangles[t][2]];
  const double two_area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  return {Vec2{(b.y - c.y) / two_area, (c.x - b.x) / two_area},
          Vec2{(c.y - a.y) / two_area, (a.x - c.x) / two_area},
          Vec2{(a.y - b.y) / two_area, (b.x - a.x) / two_area}};
}

// values of the 6 quadratic scalar basis functions at a barycentric point,
// local order: vertices, then midpoints of edges (v0,v1), (v1,v2), (v2,v0)
std::array<double, 6> p2_values(double l0, double l1, double l2) {
  return {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
          4 * l0 * l1,       4 * l1 * l2,       4 * l2 * l0};
}

Mesh reference_triangle() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  finalize_mesh(m);
  return m;
}

double max_abs(const SpMat& K) {
  double v = 0.0;
  for (int c = 0; c < K.outerSize(); ++c)
    for (SpMat::InnerIterator it(K, c); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

double symmetry_gap(const SpMat& K) {
  SpMat diff = SpMat(K.transpose()) - K;
  return max_abs(diff);
}

}  // namespace

TEST_CASE("assembly quadrature integrates monomials exactly through its degree") {
  const QuadratureRule& rule = QuadratureRule::assembly();
  double wsum = 0.0;
  for (const auto& pt : rule.points) wsum += pt.w;
  CHECK(wsum == doctest::Approx(0.5).epsilon(1e-14));
  for (int p = 0; p + 0 <= rule.degree; ++p) {
    for (int q = 0; p + q <= rule.degree; ++q) {
      double sum = 0.0;
      for (const auto& pt : rule.points)
        sum += pt.w * std::pow(pt.l1, p) * std::pow(pt.l2, q);
      CHECK(sum == doctest::Approx(monomial_integral(p, q)).epsilon(1e-13));
    }
  }
}

TEST_CASE("error-norm quadrature is exact well beyond the assembly rule") {
  const QuadratureRule& rule = QuadratureRule::error_norm();
  REQUIRE(rule.degree >= 10);
  for (int p = 0; p <= rule.degree; ++p) {
    for (int q = 0; p + q <= rule.degree; ++q) {
      double sum = 0.0;
      for (const auto& pt : rule.points)
        sum += pt.w * std::pow(pt.l1, p) * std::pow(pt.l2, q);
      CHECK(sum == doctest::Approx(monomial_integral(p, q)).epsilon(1e-12));
    }
  }
}

TEST_CASE("function spaces expose nodal dof layout") {
  Mesh m = build_rectangle_mesh(1, 1, 2, 2);
  FunctionSpace p1(m, SpaceKind::P1Scalar);
  FunctionSpace v1(m, SpaceKind::P1Vector2);
  FunctionSpace v2(m, SpaceKind::P2Vector2);
  CHECK(p1.num_dofs() == m.num_vertices());
  CHECK(v1.num_dofs() == 2 * m.num_vertices());
  CHECK(v2.num_dofs() == 2 * (m.num_vertices() + m.num_edges()));
  CHECK(v2.nodes_per_element() == 6);
  // quadratic mid-edge nodes sit at edge midpoints
  for (int e = 0; e < m.num_edges(); ++e) {
    const Vec2 a = m.vertices[m.edges[e][0]];
    const Vec2 b = m.vertices[m.edges[e][1]];
    const Vec2 mid = v2.node_position(m.num_vertices() + e);
    CHECK(mid.x == doctest::Approx(0.5 * (a.x + b.x)));
    CHECK(mid.y == doctest::Approx(0.5 * (a.y + b.y)));
  }
}

TEST_CASE("interpolation reproduces functions contained in the space") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace p1(m, SpaceKind::P1Scalar);
  ScalarField affine = [](double x, double y, double) { return 2.0 - 3.0 * x + 0.5 * y; };
  Vector dofs = interpolate(p1, affine, 0.0);
  CHECK(l2_error(p1, dofs, affine, 0.0) <= 1e-14);

  FunctionSpace v2(m, SpaceKind::P2Vector2);
  VectorField quad = [](double x, double y, double) {
    return Vec2{x * x - y + 0.25 * x * y, y * y + 2.0 * x};
  };
  Vector vdofs = interpolate(v2, quad, 0.0);
  CHECK(l2_error(v2, vdofs, quad, 0.0) <= 1e-13);

  CHECK(inf_norm(Vector::Zero(5)) == 0.0);
}

TEST_CASE("elasticity matrix kills rigid motions before constraints") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  for (SpaceKind kind : {SpaceKind::P1Vector2, SpaceKind::P2Vector2}) {
    FunctionSpace u(m, kind);
    SpMat A = assemble_elasticity(u, 3.0, 2.0);
    CHECK(symmetry_gap(A) <= 1e-12 * max_abs(A));
    Vector tx = interpolate(u, VectorField([](double, double, double) {
                              return Vec2{1.0, 0.0};
                            }),
                            0.0);
    Vector rot = interpolate(u, VectorField([](double x, double y, double) {
                               return Vec2{-y, x};
                             }),
                             0.0);
    const double scale = max_abs(A);
    CHECK((A * tx).cwiseAbs().maxCoeff() <= 1e-10 * scale);
    CHECK((A * rot).cwiseAbs().maxCoeff() <= 1e-10 * scale);
  }
  FunctionSpace p(m, SpaceKind::P1Scalar);
  CHECK_THROWS_AS(assemble_elasticity(p, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("linear element stiffness matches the hand-assembled strain form") {
  Mesh m = reference_triangle();
  FunctionSpace u(m, SpaceKind::P1Vector2);
  const double mu = 1.0, lambda = 0.0, area = 0.5;
  SpMat A = assemble_elasticity(u, mu, lambda);
  auto g = bary_gradients(m, 0);
  Eigen::MatrixXd oracle(6, 6);
  for (int k = 0; k < 6; ++k) {
    for (int j = 0; j < 6; ++j) {
      const Vec2 gk = g[k / 2], gj = g[j / 2];
      const int c = k % 2, d = j % 2;
      Eigen::Matrix2d ek = Eigen::Matrix2d::Zero(), ej = Eigen::Matrix2d::Zero();
      ek(c, 0) += 0.5 * gk.x; ek(c, 1) += 0.5 * gk.y;
      ek(0, c) += 0.5 * gk.x; ek(1, c) += 0.5 * gk.y;
      ej(d, 0) += 0.5 * gj.x; ej(d, 1) += 0.5 * gj.y;
      ej(0, d) += 0.5 * gj.x; ej(1, d) += 0.5 * gj.y;
      const double div_k = (c == 0 ? gk.x : gk.y), div_j = (d == 0 ? gj.x : gj.y);
      oracle(j, k) = area * (2.0 * mu * (ek.cwiseProduct(ej)).sum() + lambda * div_k * div_j);
    }
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd(A);
  CHECK((dense - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());
}

TEST_CASE("coupling matrix integrates the divergence against pressure functions") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace u(m, SpaceKind::P2Vector2);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  SpMat D = assemble_coupling(u, p);
  SpMat Mp = assemble_pressure_mass(p);

  Vector lin = interpolate(u, VectorField([](double x, double y, double) {
                             return Vec2{x, y};
                           }),
                           0.0);
  Vector lhs = D * lin;
  Vector rhs = 2.0 * (Mp * Vector::Ones(p.num_dofs()));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * rhs.cwiseAbs().maxCoeff());

  Vector t = interpolate(u, VectorField([](double, double, double) {
                           return Vec2{0.7, -0.3};
                         }),
                         0.0);
  CHECK((D * t).cwiseAbs().maxCoeff() <= 1e-13);

  Vector vortex = interpolate(u, VectorField([](double x, double y, double) {
                                return Vec2{-y, x};
                              }),
                              0.0);
  CHECK((D * vortex).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("coupling form equals minus the gradient form for interior fields") {
  Mesh m = build_rectangle_mesh(1, 1, 3, 3);
  FunctionSpace us(m, SpaceKind::P1Vector2);
  FunctionSpace ps(m, SpaceKind::P1Scalar);
  SpMat D = assemble_coupling(us, ps);

  // u_h: nodal bump at an interior vertex (zero on the boundary), q_h: any dofs
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector uh = Vector::Zero(us.num_dofs());
  for (int v = 0; v < m.num_vertices(); ++v) {
    const Vec2 pos = us.node_position(v);
    const bool interior = pos.x > 1e-9 && pos.x < 1 - 1e-9 && pos.y > 1e-9 && pos.y < 1 - 1e-9;
    if (!interior) continue;
    uh[us.dof(v, 0)] = unit(rng);
    uh[us.dof(v, 1)] = unit(rng);
  }
  Vector qh(ps.num_dofs());
  for (int i = 0; i < qh.size(); ++i) qh[i] = unit(rng);

  const double via_divergence = qh.dot(D * uh);
  // independent quadrature of -int u_h . grad q_h
  const QuadratureRule& rule = QuadratureRule::assembly();
  double via_gradient = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    auto g = bary_gradients(m, t);
    const double two_area = 2.0 * triangle_area(m, t);
    Vec2 grad_q{0, 0};
    for (int k = 0; k < 3; ++k) {
      grad_q.x += qh[m.triangles[t][k]] * g[k].x;
      grad_q.y += qh[m.triangles[t][k]] * g[k].y;
    }
    for (const auto& pt : rule.points) {
      const double l[3] = {pt.l0, pt.l1, pt.l2};
      Vec2 uval{0, 0};
      for (int k = 0; k < 3; ++k) {
        uval.x += uh[us.dof(m.triangles[t][k], 0)] * l[k];
        uval.y += uh[us.dof(m.triangles[t][k], 1)] * l[k];
      }
      via_gradient -= pt.w * two_area * (uval.x * grad_q.x + uval.y * grad_q.y);
    }
  }
  CHECK(via_divergence == doctest::Approx(via_gradient).epsilon(1e-12));
}

TEST_CASE("pressure mass and stiffness have the expected kernels and sums") {
  Mesh m = build_rectangle_mesh(1, 1, 8, 8);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  SpMat Mp = assemble_pressure_mass(p);
  SpMat Kp = assemble_pressure_stiffness(p, 2.5);
  CHECK(symmetry_gap(Mp) <= 1e-14 * max_abs(Mp));
  CHECK(symmetry_gap(Kp) <= 1e-12 * max_abs(Kp));
  double total = 0.0;
  for (int c = 0; c < Mp.outerSize(); ++c)
    for (SpMat::InnerIterator it(Mp, c); it; ++it) total += it.value();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  Vector ones = Vector::Ones(p.num_dofs());
  CHECK((Kp * ones).cwiseAbs().maxCoeff() <= 1e-12 * max_abs(Kp));
  // kappa enters linearly
  SpMat Kp1 = assemble_pressure_stiffness(p, 1.0);
  SpMat diff = Kp - SpMat(2.5 * Kp1);
  CHECK(max_abs(diff) <= 1e-12 * max_abs(Kp));
}

TEST_CASE("smallest constrained pressure Laplace eigenvalue approaches 2 pi^2") {
  Mesh m = build_rectangle_mesh(1, 1, 8, 8);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  SpMat Mp = assemble_pressure_mass(p);
  SpMat Kp = assemble_pressure_stiffness(p, 1.0);
  auto pairs = boundary_constraints(p, {tag::bottom, tag::right, tag::top, tag::left}, 0,
                                    nullptr, 0.0);
  DirichletSet bc = DirichletSet::from_pairs(pairs);
  std::vector<int> keep = complement_indices(p.num_dofs(), bc.dofs());
  SpMat K0 = restrict_rows_cols(Kp, keep, keep);
  SpMat M0 = restrict_rows_cols(Mp, keep, keep);
  EigenEstimate est = smallest_pencil_eigenvalue(K0, M0);
  CHECK(est.converged);
  CHECK(est.value == doctest::Approx(2.0 * M_PI * M_PI).epsilon(0.05));
  CHECK(est.value >= 2.0 * M_PI * M_PI);  // conforming spaces overshoot the minimum
}

TEST_CASE("load assembly handles zero data and constant sources") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace u(m, SpaceKind::P2Vector2);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  Loads zero = assemble_loads(u, p, nullptr, nullptr, Vec2{0, 0}, 0.0);
  CHECK(zero.F.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.Sv.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.Gv.cwiseAbs().maxCoeff() == 0.0);

  Loads unit = assemble_loads(u, p, nullptr,
                              [](double, double, double) { return 1.0; }, Vec2{0, 0}, 0.0);
  CHECK(unit.Sv.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("polynomial source loads match an independent fine quadrature") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace us(m, SpaceKind::P2Vector2);
  FunctionSpace ps(m, SpaceKind::P1Scalar);
  // quartic bump data shaped like the manufactured catalog sources
  ScalarField source = [](double x, double y, double) {
    double w = x * y * (1 - x) * (1 - y);
    return w + (1 - 2 * x) * y * (1 - y) + (1 - 2 * y) * x * (1 - x);
  };
  VectorField force = [](double x, double y, double) {
    double wx = (1 - 2 * x) * y * (1 - y);
    double wy = (1 - 2 * y) * x * (1 - x);
    return Vec2{2 * y * (1 - y) + wx + wy, 2 * x * (1 - x) + wx - wy};
  };
  Loads loads = assemble_loads(us, ps, force, source, Vec2{0, 0}, 0.0);

  const QuadratureRule& fine = QuadratureRule::error_norm();
  Vector Sv = Vector::Zero(ps.num_dofs());
  Vector F = Vector::Zero(us.num_dofs());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const double two_area = 2.0 * triangle_area(m, t);
    for (const auto& pt : fine.points) {
      const double l[3] = {pt.l0, pt.l1, pt.l2};
      Vec2 x{0, 0};
      for (int k = 0; k < 3; ++k) {
        x.x += m.vertices[m.triangles[t][k]].x * l[k];
        x.y += m.vertices[m.triangles[t][k]].y * l[k];
      }
      const double sval = source(x.x, x.y, 0.0) * pt.w * two_area;
      for (int k = 0; k < 3; ++k) Sv[m.triangles[t][k]] += sval * l[k];
      const Vec2 fval = force(x.x, x.y, 0.0);
      auto phi = p2_values(pt.l0, pt.l1, pt.l2);
      for (int k = 0; k < 6; ++k) {
        const int node = us.element_node(t, k);
        F[us.dof(node, 0)] += fval.x * phi[k] * pt.w * two_area;
        F[us.dof(node, 1)] += fval.y * phi[k] * pt.w * two_area;
      }
    }
  }
  CHECK((loads.Sv - Sv).cwiseAbs().maxCoeff() <= 1e-10 * Sv.cwiseAbs().maxCoeff());
  CHECK((loads.F - F).cwiseAbs().maxCoeff() <= 1e-10 * F.cwiseAbs().maxCoeff());
}

TEST_CASE("gravity flux vector integrates the constant drift against gradients") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace us(m, SpaceKind::P1Vector2);
  FunctionSpace ps(m, SpaceKind::P1Scalar);
  const Vec2 drift{0.3, -1.1};
  Loads loads = assemble_loads(us, ps, nullptr, nullptr, drift, 0.0);
  // against any q_h: Gv . q = int drift . grad q_h
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector qh(ps.num_dofs());
  for (int i = 0; i < qh.size(); ++i) qh[i] = unit(rng);
  double oracle = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    auto g = bary_gradients(m, t);
    Vec2 grad_q{0, 0};
    for (int k = 0; k < 3; ++k) {
      grad_q.x += qh[m.triangles[t][k]] * g[k].x;
      grad_q.y += qh[m.triangles[t][k]] * g[k].y;
    }
    oracle += triangle_area(m, t) * (drift.x * grad_q.x + drift.y * grad_q.y);
  }
  CHECK(loads.Gv.dot(qh) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("constraint sets merge duplicates and reject conflicts") {
  DirichletSet ok = DirichletSet::from_pairs({{3, 1.0}, {1, 2.0}, {3, 1.0}});
  CHECK(ok.size() == 2);
  CHECK(ok.dofs() == std::vector<int>{1, 3});
  CHECK(ok.values() == std::vector<double>{2.0, 1.0});
  CHECK(ok.contains(3));
  CHECK(!ok.contains(0));
  CHECK_THROWS_AS(DirichletSet::from_pairs({{3, 1.0}, {3, 1.5}}),
                  std::invalid_argument);
  ok.set_values({4.0, 5.0});
  CHECK(ok.values() == std::vector<double>{4.0, 5.0});
}

TEST_CASE("eliminated systems attain constrained values exactly") {
  Mesh m = build_rectangle_mesh(1, 1, 2, 2);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  SpMat K = assemble_pressure_stiffness(p, 1.0);
  SpMat Mp = assemble_pressure_mass(p);
  SpMat shifted = K + Mp;  // definite without constraints

  SUBCASE("all dofs pinned to zero give the zero solution") {
    std::vector<std::pair<int, double>> pairs;
    for (int i = 0; i < p.num_dofs(); ++i) pairs.emplace_back(i, 0.0);
    EliminatedOperator elim(shifted, DirichletSet::from_pairs(pairs));
    SpdSolver solver(elim.matrix());
    Vector b = Vector::Constant(p.num_dofs(), 3.0);
    Vector x = solver.solve(elim.apply_rhs(b));
    CHECK(x.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("a prescribed boundary value is attained exactly") {
    EliminatedOperator elim(shifted, DirichletSet::from_pairs({{0, 2.5}}));
    SpdSolver solver(elim.matrix());
    Vector x = solver.solve(elim.apply_rhs(Vector::Zero(p.num_dofs())));
    CHECK(x[0] == 2.5);
  }
}

TEST_CASE("elimination agrees with a dense saddle-point oracle") {
  Mesh m = build_rectangle_mesh(1, 1, 2, 2);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  SpMat K = assemble_pressure_stiffness(p, 1.0);
  SpMat Mp = assemble_pressure_mass(p);
  SpMat sys = K + Mp;
  const int n = p.num_dofs();

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<std::pair<int, double>> pairs = {{0, unit(rng)}, {4, unit(rng)}, {7, unit(rng)}};
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = unit(rng);

  EliminatedOperator elim(sys, DirichletSet::from_pairs(pairs));
  SpdSolver solver(elim.matrix());
  Vector x = solver.solve(elim.apply_rhs(b));

  const int c = static_cast<int>(pairs.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + c, n + c);
  kkt.topLeftCorner(n, n) = Eigen::MatrixXd(sys);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + c);
  rhs.head(n) = b;
  for (int i = 0; i < c; ++i) {
    kkt(n + i, pairs[i].first) = 1.0;
    kkt(pairs[i].first, n + i) = 1.0;
    rhs[n + i] = pairs[i].second;
  }
  Eigen::VectorXd full = kkt.fullPivLu().solve(rhs);
  CHECK((x - full.head(n)).cwiseAbs().maxCoeff() <= 1e-10 * full.head(n).cwiseAbs().maxCoeff());
}

TEST_CASE("interpolation error of the parabola bump matches a direct quadrature") {
  Mesh m = build_rectangle_mesh(1, 1, 8, 8);
  FunctionSpace p(m, SpaceKind::P1Scalar);
  ScalarField bump = [](double x, double y, double) { return x * y * (1 - x) * (1 - y); };
  Vector dofs = interpolate(p, bump, 0.0);
  const double err = l2_error(p, dofs, bump, 0.0);

  const QuadratureRule& fine = QuadratureRule::error_norm();
  double sq = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const double two_area = 2.0 * triangle_area(m, t);
    for (const auto& pt : fine.points) {
      const double l[3] = {pt.l0, pt.l1, pt.l2};
      double x = 0, y = 0, interp = 0;
      for (int k = 0; k < 3; ++k) {
        x += m.vertices[m.triangles[t][k]].x * l[k];
        y += m.vertices[m.triangles[t][k]].y * l[k];
        interp += dofs[m.triangles[t][k]] * l[k];
      }
      const double d = interp - bump(x, y, 0.0);
      sq += pt.w * two_area * d * d;
    }
  }
  CHECK(err == doctest::Approx(std::sqrt(sq)).epsilon(1e-10));
  CHECK(err > 0.0);
}

TEST_CASE("assembly does not depend on triangle order or starting vertex") {
  Mesh a = build_rectangle_mesh(1, 1, 3, 3);
  Mesh b = a;
  // reverse triangle order, rotate vertex order (keeps orientation)
  std::reverse(b.triangles.begin(), b.triangles.end());
  for (size_t i = 0; i < b.triangles.size(); i += 2) {
    auto& tri = b.triangles[i];
    tri = {tri[1], tri[2], tri[0]};
  }
  b.edges.clear();
  b.triangle_edges.clear();
  finalize_mesh(b);

  FunctionSpace pa(a, SpaceKind::P1Scalar), pb(b, SpaceKind::P1Scalar);
  SpMat diff_m = assemble_pressure_mass(pa) - assemble_pressure_mass(pb);
  CHECK(max_abs(diff_m) <= 1e-14);
  FunctionSpace va(a, SpaceKind::P1Vector2), vb(b, SpaceKind::P1Vector2);
  SpMat Aa = assemble_elasticity(va, 2.0, 1.0);
  SpMat diff_a = Aa - assemble_elasticity(vb, 2.0, 1.0);
  CHECK(max_abs(diff_a) <= 1e-12 * max_abs(Aa));

  // quadratic spaces: compare through the node positions (edge ids may differ)
  FunctionSpace qa(a, SpaceKind::P2Vector2), qb(b, SpaceKind::P2Vector2);
  auto key = [](Vec2 v) {
    return std::make_pair(std::llround(v.x * 1e9), std::llround(v.y * 1e9));
  };
  std::map<std::pair<long long, long long>, int> node_of;
  for (int nb = 0; nb < qb.num_nodes(); ++nb) node_of[key(qb.node_position(nb))] = nb;
  std::vector<int> map(qa.num_dofs());
  for (int na = 0; na < qa.num_nodes(); ++na) {
    const int nb = node_of.at(key(qa.node_position(na)));
    map[qa.dof(na, 0)] = qb.dof(nb, 0);
    map[qa.dof(na, 1)] = qb.dof(nb, 1);
  }
  SpMat Qa = assemble_elasticity(qa, 2.0, 1.0);
  SpMat Qb = assemble_elasticity(qb, 2.0, 1.0);
  Eigen::MatrixXd db = Eigen::MatrixXd(Qb);
  double gap = 0.0;
  for (int c = 0; c < Qa.outerSize(); ++c)
    for (SpMat::InnerIterator it(Qa, c); it; ++it)
      gap = std::max(gap, std::abs(it.value() - db(map[it.row()], map[it.col()])));
  CHECK(gap <= 1e-12 * max_abs(Qa));
}

TEST_CASE("boundary constraint collection visits each boundary node once") {
  Mesh m = build_rectangle_mesh(1, 1, 4, 4);
  FunctionSpace v2(m, SpaceKind::P2Vector2);
  ScalarField xcoord = [](double x, double, double) { return x; };
  DirichletSet bottom =
      DirichletSet::from_pairs(boundary_constraints(v2, {tag::bottom}, 0, xcoord, 0.0));
  // 4 edges: 5 vertices + 4 midpoints
  CHECK(bottom.size() == 9);
  for (int i = 0; i < bottom.size(); ++i) {
    const int dof = bottom.dofs()[i];
    CHECK(v2.component_of_dof(dof) == 0);
    CHECK(bottom.values()[i] == doctest::Approx(v2.node_position(v2.node_of_dof(dof)).x));
  }

  FunctionSpace p1(m, SpaceKind::P1Scalar);
  auto all = boundary_constraints(p1, {tag::bottom, tag::right, tag::top, tag::left}, 0,
                                  nullptr, 0.0);
  DirichletSet bc = DirichletSet::from_pairs(all);
  CHECK(bc.size() == 16);
  for (double v : bc.values()) CHECK(v == 0.0);
}

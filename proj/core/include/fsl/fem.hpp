#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "fsl/mesh.hpp"

namespace fsl {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Space-time scalar field, evaluated as f(x, y, t).
using ScalarField = std::function<double(double, double, double)>;
/// Space-time vector field.
using VectorField = std::function<Vec2(double, double, double)>;

enum class SpaceKind { P1Scalar, P1Vector2, P2Vector2 };

/// Lagrange space on a triangle mesh. Nodes are the mesh vertices,
/// followed (for quadratic spaces) by the edge midpoints in edge-id
/// order. Vector spaces interleave components: dof = 2*node + comp.
class FunctionSpace {
 public:
  FunctionSpace(const Mesh& mesh, SpaceKind kind);

  const Mesh& mesh() const { return *mesh_; }
  SpaceKind kind() const { return kind_; }
  int components() const { return kind_ == SpaceKind::P1Scalar ? 1 : 2; }
  bool quadratic() const { return kind_ == SpaceKind::P2Vector2; }
  int num_nodes() const { return num_nodes_; }
  int num_dofs() const { return num_nodes_ * components(); }
  int nodes_per_element() const { return quadratic() ? 6 : 3; }

  /// Global node id of local node `k` on triangle `t`. Local order:
  /// the three vertices, then (P2) the midpoints of local edges
  /// (v0,v1), (v1,v2), (v2,v0).
  int element_node(int t, int k) const;
  Vec2 node_position(int node) const;
  int dof(int node, int comp) const { return node * components() + comp; }
  int node_of_dof(int d) const { return d / components(); }
  int component_of_dof(int d) const { return d % components(); }

  /// Nodes lying on a boundary edge: its two endpoints plus (P2) the
  /// edge midpoint node.
  std::vector<int> boundary_edge_nodes(const BoundaryEdge& be) const;

 private:
  const Mesh* mesh_;
  SpaceKind kind_;
  int num_nodes_;
};

/// Symmetric quadrature rule on the reference triangle, barycentric
/// points with weights summing to 1/2 (reference area).
struct QuadratureRule {
  struct Point {
    double l0, l1, l2, w;
  };
  std::vector<Point> points;
  int degree = 0;

  /// 7-point degree-5 rule used for all bilinear form and load
  /// assembly; exact for every integrand of the quadratic-linear
  /// displacement-pressure system and for the quartic manufactured
  /// sources against linear and quadratic test functions.
  static const QuadratureRule& assembly();
  /// Collapsed 6x6 Gauss rule, degree 10; used for error norms where
  /// squared differences exceed the assembly degree.
  static const QuadratureRule& error_norm();
};

/// Sorted dof-value constraint set. Building it merges duplicates and
/// rejects contradictory values for the same dof.
class DirichletSet {
 public:
  DirichletSet() = default;
  static DirichletSet from_pairs(std::vector<std::pair<int, double>> pairs);

  const std::vector<int>& dofs() const { return dofs_; }
  const std::vector<double>& values() const { return values_; }
  int size() const { return static_cast<int>(dofs_.size()); }
  bool empty() const { return dofs_.empty(); }
  bool contains(int dof) const;
  /// Replace constraint values keeping the dof structure (used when
  /// boundary data changes between time steps).
  void set_values(std::vector<double> values);

 private:
  std::vector<int> dofs_;
  std::vector<double> values_;
};

// ---- bilinear forms ----

/// Elasticity stiffness: integral of 2 mu eps(u):eps(v) + lambda div u div v.
SpMat assemble_elasticity(const FunctionSpace& u_space, double mu, double lambda);

/// Pressure-displacement coupling, rows = pressure dofs, cols =
/// displacement dofs: D[j,k] = integral of div(phi_k) psi_j.
SpMat assemble_coupling(const FunctionSpace& u_space, const FunctionSpace& p_space);

SpMat assemble_pressure_mass(const FunctionSpace& p_space);

/// Pressure stiffness scaled by the permeability: kappa * integral of
/// grad psi . grad psi.
SpMat assemble_pressure_stiffness(const FunctionSpace& p_space, double kappa);

struct Loads {
  Vector F;   // body force against displacement basis
  Vector Sv;  // fluid source against pressure basis
  Vector Gv;  // gravity flux: integral of kappa*g*rho . grad psi
};

/// Load vectors at time t. `kappa_g_rho` is the constant vector
/// kappa * g * rho entering the gravity flux term.
Loads assemble_loads(const FunctionSpace& u_space, const FunctionSpace& p_space,
                     const VectorField& f, const ScalarField& source, Vec2 kappa_g_rho,
                     double t);

// ---- Dirichlet elimination ----

/// Symmetric elimination of constrained dofs from a square operator:
/// constrained rows/cols are zeroed with a unit diagonal, and the
/// dropped columns are kept to fold prescribed values into right-hand
/// sides. Rebuilding rhs for new constraint values needs no matrix
/// work, so one elimination serves a whole time-dependent run.
class EliminatedOperator {
 public:
  EliminatedOperator(const SpMat& K, DirichletSet bc);

  const SpMat& matrix() const { return elim_; }
  const DirichletSet& constraints() const { return bc_; }
  void set_values(std::vector<double> values) { bc_.set_values(std::move(values)); }

  /// b -> b - K[:,c]*values with constrained entries pinned to the
  /// prescribed values.
  Vector apply_rhs(const Vector& b) const;

 private:
  SpMat elim_;
  SpMat dropped_cols_;  // n x m, original columns at constrained dofs
  DirichletSet bc_;
};

// ---- interpolation and norms ----

Vector interpolate(const FunctionSpace& space, const ScalarField& field, double t);
Vector interpolate(const FunctionSpace& space, const VectorField& field, double t);

/// L2 distance between a finite element function (dof vector) and an
/// analytic field, integrated with the error-norm rule.
double l2_error(const FunctionSpace& space, const Vector& dofs, const ScalarField& field,
                double t);
double l2_error(const FunctionSpace& space, const Vector& dofs, const VectorField& field,
                double t);

double inf_norm(const Vector& v);

/// Collect Dirichlet constraints for the listed boundary tags.
/// For vector spaces `comp` selects the component; values come from
/// evaluating `value` at the node position and time t.
std::vector<std::pair<int, double>> boundary_constraints(const FunctionSpace& space,
                                                         const std::vector<int>& tags,
                                                         int comp, const ScalarField& value,
                                                         double t);

}  // namespace fsl

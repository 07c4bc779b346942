#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <stdexcept>
#include <vector>

#include "fsl/fem.hpp"

namespace fsl {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse Cholesky with iterative refinement. Refinement runs until
/// the relative residual drops below `rel_tol` or stagnates, which
/// keeps the two-norm residual contract independent of the raw
/// factorization quality.
class SpdSolver {
 public:
  explicit SpdSolver(const SpMat& K);

  Vector solve(const Vector& b, double rel_tol = 1e-14) const;
  double last_relative_residual() const { return last_res_; }

 private:
  SpMat K_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  mutable double last_res_ = 0.0;
};

/// Sparse LU with symmetric Jacobi equilibration and iterative
/// refinement, for the coupled two-field matrix whose blocks differ by
/// many orders of magnitude.
class EquilibratedLuSolver {
 public:
  explicit EquilibratedLuSolver(const SpMat& K);

  Vector solve(const Vector& b, double rel_tol = 1e-13) const;
  double last_relative_residual() const { return last_res_; }

 private:
  SpMat K_;
  Vector scale_;
  Eigen::SparseLU<SpMat> lu_;
  mutable double last_res_ = 0.0;
};

/// Indices 0..n-1 not contained in the sorted list `remove`.
std::vector<int> complement_indices(int n, const std::vector<int>& remove);

SpMat restrict_rows_cols(const SpMat& K, const std::vector<int>& keep_rows,
                         const std::vector<int>& keep_cols);

struct EigenEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Smallest eigenvalue of the pencil K x = lambda M x (K SPD, M SPD)
/// by shift-free inverse iteration with M-orthonormalized iterates.
EigenEstimate smallest_pencil_eigenvalue(const SpMat& K, const SpMat& M, double tol = 1e-6,
                                         int max_iter = 10000);

/// Conjugate gradients on an abstract SPD operator. `project`, when
/// given, is applied to the rhs and every iterate to keep the
/// iteration inside an invariant subspace (kernel deflation).
template <class Op, class Proj>
Vector conjugate_gradient(const Op& apply, Vector b, double rel_tol, int max_iter,
                          const Proj& project) {
  project(b);
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  const double stop = rel_tol * rel_tol * rr;
  if (rr == 0.0) return x;
  for (int it = 0; it < max_iter && rr > stop; ++it) {
    Vector Ap = apply(p);
    project(Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) throw SolverError("conjugate gradients hit a non-positive direction");
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  project(x);
  return x;
}

}  // namespace fsl

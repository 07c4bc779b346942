#include "fsl/linalg.hpp"

#include <cmath>
#include <random>

namespace fsl {

SpdSolver::SpdSolver(const SpMat& K) : K_(K) {
  ldlt_.compute(K_);
  if (ldlt_.info() != Eigen::Success)
    throw SolverError("sparse Cholesky factorization failed");
}

Vector SpdSolver::solve(const Vector& b, double rel_tol) const {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    last_res_ = 0.0;
    return Vector::Zero(b.size());
  }
  Vector x = ldlt_.solve(b);
  double res = (b - K_ * x).norm() / bnorm;
  for (int it = 0; it < 4 && res > rel_tol; ++it) {
    const Vector r = b - K_ * x;
    x += ldlt_.solve(r);
    const double res_new = (b - K_ * x).norm() / bnorm;
    if (res_new >= 0.5 * res) {
      res = std::min(res, res_new);
      break;
    }
    res = res_new;
  }
  last_res_ = res;
  return x;
}

EquilibratedLuSolver::EquilibratedLuSolver(const SpMat& K) : K_(K) {
  const int n = static_cast<int>(K.rows());
  scale_ = Vector::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(K.coeff(i, i));
    if (d > 0.0) scale_[i] = 1.0 / std::sqrt(d);
  }
  SpMat scaled = scale_.asDiagonal() * K * scale_.asDiagonal();
  scaled.makeCompressed();
  lu_.compute(scaled);
  if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
}

Vector EquilibratedLuSolver::solve(const Vector& b, double rel_tol) const {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    last_res_ = 0.0;
    return Vector::Zero(b.size());
  }
  auto apply_inverse = [&](const Vector& r) -> Vector {
    Vector y = lu_.solve((scale_.asDiagonal() * r).eval());
    return scale_.asDiagonal() * y;
  };
  Vector x = apply_inverse(b);
  double res = (b - K_ * x).norm() / bnorm;
  for (int it = 0; it < 5 && res > rel_tol; ++it) {
    const Vector r = b - K_ * x;
    x += apply_inverse(r);
    const double res_new = (b - K_ * x).norm() / bnorm;
    if (res_new >= 0.5 * res) {
      res = std::min(res, res_new);
      break;
    }
    res = res_new;
  }
  last_res_ = res;
  return x;
}

std::vector<int> complement_indices(int n, const std::vector<int>& remove) {
  std::vector<int> keep;
  keep.reserve(n - static_cast<int>(remove.size()));
  size_t j = 0;
  for (int i = 0; i < n; ++i) {
    if (j < remove.size() && remove[j] == i) {
      ++j;
      continue;
    }
    keep.push_back(i);
  }
  return keep;
}

SpMat restrict_rows_cols(const SpMat& K, const std::vector<int>& keep_rows,
                         const std::vector<int>& keep_cols) {
  std::vector<int> row_map(K.rows(), -1), col_map(K.cols(), -1);
  for (int i = 0; i < static_cast<int>(keep_rows.size()); ++i) row_map[keep_rows[i]] = i;
  for (int i = 0; i < static_cast<int>(keep_cols.size()); ++i) col_map[keep_cols[i]] = i;
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < K.outerSize(); ++c) {
    if (col_map[c] < 0) continue;
    for (SpMat::InnerIterator it(K, c); it; ++it) {
      const int r = row_map[it.row()];
      if (r >= 0) trip.emplace_back(r, col_map[c], it.value());
    }
  }
  SpMat out(static_cast<int>(keep_rows.size()), static_cast<int>(keep_cols.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

EigenEstimate smallest_pencil_eigenvalue(const SpMat& K, const SpMat& M, double tol,
                                         int max_iter) {
  const int n = static_cast<int>(K.rows());
  if (n == 0) throw SolverError("empty pencil");
  SpdSolver ksolver(K);

  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = unif(rng);
  x /= std::sqrt(x.dot(M * x));

  EigenEstimate est;
  double lambda = x.dot(K * x);
  for (int it = 1; it <= max_iter; ++it) {
    Vector y = ksolver.solve(M * x, 1e-14);
    const double mnorm = std::sqrt(y.dot(M * y));
    if (!(mnorm > 0.0)) throw SolverError("inverse iteration collapsed to zero");
    x = y / mnorm;
    const double lambda_new = x.dot(K * x) / x.dot(M * x);
    est.iterations = it;
    if (std::abs(lambda_new - lambda) <= tol * std::abs(lambda_new)) {
      est.value = lambda_new;
      est.converged = true;
      return est;
    }
    lambda = lambda_new;
  }
  est.value = lambda;
  return est;
}

}  // namespace fsl

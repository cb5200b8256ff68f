#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <memory>
#include <stdexcept>

namespace fpe {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  int n_dofs() const { return static_cast<int>(rhs.size()); }
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public SolverError {
 public:
  SingularMatrix(int pivot, const std::string& what) : SolverError(what), pivot_(pivot) {}
  int pivot() const { return pivot_; }

 private:
  int pivot_;
};

class IndefiniteSystem : public SolverError {
 public:
  using SolverError::SolverError;
};

// Sparse direct factorization. General matrices go through LU with partial
// pivoting, symmetric positive definite ones may use Cholesky instead.
class SparseFactor {
 public:
  enum class Kind { LU, Cholesky };

  SparseFactor(const SparseMatrix& a, Kind kind = Kind::LU);
  ~SparseFactor();
  SparseFactor(SparseFactor&&) noexcept;
  SparseFactor& operator=(SparseFactor&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  int size() const { return n_; }
  Kind kind() const { return kind_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Kind kind_;
  int n_ = 0;
};

SparseFactor factor(const LinearSystem& sys);
SparseFactor factor_spd(const SparseMatrix& a);
Eigen::VectorXd solve(const LinearSystem& sys);

// max-norm residual relative to ||A|| ||x|| + ||b||
double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

}  // namespace fpe

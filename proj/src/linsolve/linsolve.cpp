#include "fpe/linsolve.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/UmfPackSupport>
#include <cmath>
#include <sstream>

namespace fpe {

struct SparseFactor::Impl {
  Eigen::UmfPackLU<SparseMatrix> lu;
  Eigen::CholmodSupernodalLLT<SparseMatrix> llt;
};

namespace {

double inf_norm(const SparseMatrix& a) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

// first zero (or negligible) pivot of U, reported as an original column index
int zero_pivot(Eigen::UmfPackLU<SparseMatrix>& lu, double scale) {
  auto U = lu.matrixU();
  auto Q = lu.permutationQ();
  SparseMatrix u = U;
  for (int j = 0; j < u.cols(); ++j) {
    double d = u.coeff(j, j);
    if (std::abs(d) <= 1e-14 * scale) return Q[j];
  }
  return -1;
}

}  // namespace

SparseFactor::SparseFactor(const SparseMatrix& a, Kind kind)
    : impl_(std::make_unique<Impl>()), kind_(kind), n_(static_cast<int>(a.rows())) {
  if (a.rows() != a.cols()) throw SolverError("matrix is not square");
  if (kind == Kind::Cholesky) {
    impl_->llt.cholmod().print = 0;
    impl_->llt.compute(a);
    const int st = impl_->llt.cholmod().status;
    if (st == CHOLMOD_OUT_OF_MEMORY) throw SolverError("Cholesky factorization ran out of memory");
    if (impl_->llt.info() != Eigen::Success || st == CHOLMOD_NOT_POSDEF)
      throw IndefiniteSystem("Cholesky factorization failed: matrix not SPD");
    if (st < 0) throw SolverError("Cholesky factorization failed");
    return;
  }
  impl_->lu.compute(a);
  if (impl_->lu.info() != Eigen::Success) {
    int piv = zero_pivot(impl_->lu, inf_norm(a));
    std::ostringstream os;
    os << "SingularMatrix: zero pivot at index " << piv;
    throw SingularMatrix(piv, os.str());
  }
  int piv = zero_pivot(impl_->lu, inf_norm(a));
  if (piv >= 0) {
    std::ostringstream os;
    os << "SingularMatrix: zero pivot at index " << piv;
    throw SingularMatrix(piv, os.str());
  }
}

SparseFactor::~SparseFactor() = default;
SparseFactor::SparseFactor(SparseFactor&&) noexcept = default;
SparseFactor& SparseFactor::operator=(SparseFactor&&) noexcept = default;

Eigen::VectorXd SparseFactor::solve(const Eigen::VectorXd& b) const {
  if (b.size() != n_) throw SolverError("right-hand side has wrong length");
  Eigen::VectorXd x = kind_ == Kind::Cholesky ? Eigen::VectorXd(impl_->llt.solve(b)) : Eigen::VectorXd(impl_->lu.solve(b));
  if (!x.allFinite()) throw SolverError("solve produced non-finite values");
  return x;
}

SparseFactor factor(const LinearSystem& sys) { return SparseFactor(sys.matrix, SparseFactor::Kind::LU); }
SparseFactor factor_spd(const SparseMatrix& a) { return SparseFactor(a, SparseFactor::Kind::Cholesky); }

Eigen::VectorXd solve(const LinearSystem& sys) { return factor(sys).solve(sys.rhs); }

double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  Eigen::VectorXd r = a * x - b;
  double denom = inf_norm(a) * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  return denom > 0 ? r.lpNorm<Eigen::Infinity>() / denom : r.lpNorm<Eigen::Infinity>();
}

}  // namespace fpe

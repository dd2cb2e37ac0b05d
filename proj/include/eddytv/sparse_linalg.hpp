// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_SPARSE_LINALG_HPP
#define EDDYTV_SPARSE_LINALG_HPP

#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>
#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace eddytv
{

using Complex = std::complex<double>;
using ComplexSparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor, int>;
using RealSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

class SingularMatrixError : public std::runtime_error
{
public:
  SingularMatrixError(long pivot, const std::string &what)
    : std::runtime_error(what), pivot_(pivot)
  {
  }
  // Elimination step at which a zero pivot was met.
  long pivot() const { return pivot_; }

private:
  long pivot_;
};

class DimensionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Sorts indices, sums duplicates and drops explicit zeros.
void finalize(ComplexSparseMatrix &M);

// Ordering and symbolic factorization for a fixed sparsity pattern. Can be shared by
// numeric factorizations of matrices with the same pattern.
class SymbolicAnalysis
{
public:
  explicit SymbolicAnalysis(const ComplexSparseMatrix &M);
  ~SymbolicAnalysis();
  SymbolicAnalysis(const SymbolicAnalysis &) = delete;
  SymbolicAnalysis &operator=(const SymbolicAnalysis &) = delete;

  bool Matches(const ComplexSparseMatrix &M) const;
  void *Handle() const { return symbolic_; }

private:
  void *symbolic_ = nullptr;
  std::vector<int> outer_, inner_;
};

//
// Sparse LU factorization (nested-dissection ordering, threshold pivoting) of a
// square complex matrix. Immutable once built; solve() may be called for any number of
// right-hand sides and applies one step of iterative refinement.
//
class Factorization
{
public:
  Factorization(const ComplexSparseMatrix &M,
                std::shared_ptr<const SymbolicAnalysis> symbolic = nullptr);
  ~Factorization();
  Factorization(const Factorization &) = delete;
  Factorization &operator=(const Factorization &) = delete;

  Eigen::VectorXcd Solve(const Eigen::VectorXcd &b) const;

  int Size() const { return static_cast<int>(matrix_.rows()); }
  const ComplexSparseMatrix &Matrix() const { return matrix_; }
  const std::shared_ptr<const SymbolicAnalysis> &Symbolic() const { return symbolic_; }

private:
  ComplexSparseMatrix matrix_;
  std::shared_ptr<const SymbolicAnalysis> symbolic_;
  void *numeric_ = nullptr;

  Eigen::VectorXcd SolveOnce(const Eigen::VectorXcd &b) const;
};

// Throws SingularMatrixError on a zero pivot, DimensionError for non-square input.
std::shared_ptr<const Factorization>
factorize(const ComplexSparseMatrix &M,
          std::shared_ptr<const SymbolicAnalysis> symbolic = nullptr);

Eigen::VectorXcd solve(const Factorization &f, const Eigen::VectorXcd &b);

// ||M x - b|| / ||b|| (0 when b = 0 and x = 0).
double relative_residual(const ComplexSparseMatrix &M, const Eigen::VectorXcd &x,
                         const Eigen::VectorXcd &b);

struct CgResult
{
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

// Conjugate gradients for a symmetric positive definite operator. Stops when
// ||b - A x|| <= tol ||b||; non-convergence is reported, not thrown.
CgResult cg_solve(const LinearOperator &apply, const Eigen::VectorXd &b, double tol,
                  int max_iter);
CgResult cg_solve(const LinearOperator &apply, const Eigen::VectorXd &b, double tol,
                  int max_iter, const Eigen::VectorXd &x0);

}  // namespace eddytv

#endif  // EDDYTV_SPARSE_LINALG_HPP

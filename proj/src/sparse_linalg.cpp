// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/sparse_linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <umfpack.h>

namespace eddytv
{

namespace
{

// The row-major arrays of M are the column-major arrays of M^T; solves use the
// non-conjugate transpose system so that M itself is inverted.
const double *PackedValues(const ComplexSparseMatrix &M)
{
  return reinterpret_cast<const double *>(M.valuePtr());
}

std::array<double, UMFPACK_CONTROL> DefaultControl()
{
  std::array<double, UMFPACK_CONTROL> control;
  umfpack_zi_defaults(control.data());
  control[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
  // Nested dissection: AMD fill on 3D edge-element systems exhausts memory already at
  // ~60k unknowns.
  control[UMFPACK_ORDERING] = UMFPACK_ORDERING_METIS;
  control[UMFPACK_IRSTEP] = 0;
  return control;
}

void RequireCompressed(const ComplexSparseMatrix &M)
{
  if (!M.isCompressed())
  {
    throw std::invalid_argument("sparse matrix must be compressed before factorization");
  }
  if (M.rows() != M.cols())
  {
    throw DimensionError(
        fmt::format("matrix must be square, got {} x {}", M.rows(), M.cols()));
  }
}

}  // namespace

void finalize(ComplexSparseMatrix &M)
{
  M.makeCompressed();
  M.prune(Complex(0.0, 0.0));
  M.makeCompressed();
}

SymbolicAnalysis::SymbolicAnalysis(const ComplexSparseMatrix &M)
{
  RequireCompressed(M);
  const int n = static_cast<int>(M.rows());
  outer_.assign(M.outerIndexPtr(), M.outerIndexPtr() + n + 1);
  inner_.assign(M.innerIndexPtr(), M.innerIndexPtr() + M.nonZeros());
  const auto control = DefaultControl();
  std::array<double, UMFPACK_INFO> info;
  const int status = umfpack_zi_symbolic(n, n, outer_.data(), inner_.data(), PackedValues(M),
                                         nullptr, &symbolic_, control.data(), info.data());
  if (status != UMFPACK_OK)
  {
    throw std::runtime_error(fmt::format("symbolic factorization failed (status {})", status));
  }
}

SymbolicAnalysis::~SymbolicAnalysis()
{
  if (symbolic_)
  {
    umfpack_zi_free_symbolic(&symbolic_);
  }
}

bool SymbolicAnalysis::Matches(const ComplexSparseMatrix &M) const
{
  const auto n = static_cast<std::size_t>(M.rows());
  return M.isCompressed() && outer_.size() == n + 1 &&
         inner_.size() == static_cast<std::size_t>(M.nonZeros()) &&
         std::equal(outer_.begin(), outer_.end(), M.outerIndexPtr()) &&
         std::equal(inner_.begin(), inner_.end(), M.innerIndexPtr());
}

Factorization::Factorization(const ComplexSparseMatrix &M,
                             std::shared_ptr<const SymbolicAnalysis> symbolic)
  : matrix_(M)
{
  matrix_.makeCompressed();
  RequireCompressed(matrix_);
  for (Eigen::Index k = 0; k < matrix_.nonZeros(); k++)
  {
    const Complex v = matrix_.valuePtr()[k];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    {
      throw std::domain_error("matrix contains non-finite entries");
    }
  }
  if (!symbolic || !symbolic->Matches(matrix_))
  {
    symbolic = std::make_shared<const SymbolicAnalysis>(matrix_);
  }
  symbolic_ = std::move(symbolic);

  const auto control = DefaultControl();
  std::array<double, UMFPACK_INFO> info;
  const int status =
      umfpack_zi_numeric(matrix_.outerIndexPtr(), matrix_.innerIndexPtr(),
                         PackedValues(matrix_), nullptr, symbolic_->Handle(), &numeric_,
                         control.data(), info.data());
  if (status == UMFPACK_WARNING_singular_matrix)
  {
    const int n = Size();
    std::vector<double> dx(n), dz(n);
    umfpack_zi_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr,
                           nullptr, nullptr, nullptr, dx.data(), dz.data(), nullptr, nullptr,
                           numeric_);
    long pivot = 0;
    while (pivot < n && (dx[pivot] != 0.0 || dz[pivot] != 0.0))
    {
      pivot++;
    }
    umfpack_zi_free_numeric(&numeric_);
    throw SingularMatrixError(pivot, fmt::format("matrix is singular: zero pivot at "
                                                 "elimination step {} of {}",
                                                 pivot, n));
  }
  if (status != UMFPACK_OK)
  {
    if (numeric_)
    {
      umfpack_zi_free_numeric(&numeric_);
    }
    throw std::runtime_error(fmt::format("numeric factorization failed (status {})", status));
  }
}

Factorization::~Factorization()
{
  if (numeric_)
  {
    umfpack_zi_free_numeric(&numeric_);
  }
}

Eigen::VectorXcd Factorization::SolveOnce(const Eigen::VectorXcd &b) const
{
  Eigen::VectorXcd x(b.size());
  const auto control = DefaultControl();
  std::array<double, UMFPACK_INFO> info;
  const int status = umfpack_zi_solve(
      UMFPACK_Aat, matrix_.outerIndexPtr(), matrix_.innerIndexPtr(), PackedValues(matrix_),
      nullptr, reinterpret_cast<double *>(x.data()), nullptr,
      reinterpret_cast<const double *>(b.data()), nullptr, numeric_, control.data(),
      info.data());
  if (status != UMFPACK_OK)
  {
    throw std::runtime_error(fmt::format("triangular solve failed (status {})", status));
  }
  return x;
}

Eigen::VectorXcd Factorization::Solve(const Eigen::VectorXcd &b) const
{
  if (b.size() != Size())
  {
    throw DimensionError(
        fmt::format("right-hand side has size {}, matrix has size {}", b.size(), Size()));
  }
  Eigen::VectorXcd x = SolveOnce(b);
  const Eigen::VectorXcd r = b - matrix_ * x;
  x += SolveOnce(r);
  return x;
}

std::shared_ptr<const Factorization> factorize(const ComplexSparseMatrix &M,
                                               std::shared_ptr<const SymbolicAnalysis> symbolic)
{
  return std::make_shared<const Factorization>(M, std::move(symbolic));
}

Eigen::VectorXcd solve(const Factorization &f, const Eigen::VectorXcd &b)
{
  return f.Solve(b);
}

double relative_residual(const ComplexSparseMatrix &M, const Eigen::VectorXcd &x,
                         const Eigen::VectorXcd &b)
{
  const double nb = b.norm();
  const double nr = (M * x - b).norm();
  return nb > 0.0 ? nr / nb : nr;
}

CgResult cg_solve(const LinearOperator &apply, const Eigen::VectorXd &b, double tol,
                  int max_iter)
{
  return cg_solve(apply, b, tol, max_iter, Eigen::VectorXd::Zero(b.size()));
}

CgResult cg_solve(const LinearOperator &apply, const Eigen::VectorXd &b, double tol,
                  int max_iter, const Eigen::VectorXd &x0)
{
  CgResult res;
  res.x = x0;
  const double nb = b.norm();
  if (nb == 0.0)
  {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = b - apply(res.x);
  double rr = r.squaredNorm();
  if (std::sqrt(rr) <= tol * nb)
  {
    res.relative_residual = std::sqrt(rr) / nb;
    res.converged = true;
    return res;
  }
  Eigen::VectorXd p = r;
  for (res.iterations = 1; res.iterations <= max_iter; res.iterations++)
  {
    const Eigen::VectorXd Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
    {
      break;  // operator not positive definite on the Krylov space
    }
    const double step = rr / pAp;
    res.x += step * p;
    r -= step * Ap;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= tol * nb)
    {
      res.relative_residual = std::sqrt(rr_new) / nb;
      res.converged = true;
      return res;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  res.iterations = std::min(res.iterations, max_iter);
  res.relative_residual = (b - apply(res.x)).norm() / nb;
  res.converged = res.relative_residual <= tol;
  return res;
}

}  // namespace eddytv

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_TV_OPS_HPP
#define EDDYTV_TV_OPS_HPP

#include "eddytv/fem_assembly.hpp"

namespace eddytv
{

// Nodal box constraint m <= v <= M on the V_h coefficients.
struct BoxBounds
{
  double lower = 0.0;
  double upper = 15.0;

  // Throws ConfigError unless upper > lower > -sigma0.
  void Validate(double sigma0) const;
};

struct InnerAdmmConfig
{
  double rho = 0.0;  // penalty of the splitting d = grad s; <= 0 selects beta
  int iterations = 40;
  double cg_tol = 1e-10;
  int cg_max_iter = 2000;
  bool anisotropic = false;  // per-component instead of Euclidean cell norm
};

// Auxiliary variables carried between calls (warm start).
struct InnerAdmmState
{
  CellVectorField d, u;
  bool Empty() const { return d.rows() == 0; }
};

// sum_T |T| |(grad v)_T|; the anisotropic variant uses the l1 norm per cell.
double tv_seminorm(const CellGradient &grad, const NodalField &v, bool anisotropic = false);

// Per-cell minimizer of kappa |d| + 1/2 |d - w|^2.
CellVectorField shrink(const CellVectorField &w, double kappa);
CellVectorField shrink_anisotropic(const CellVectorField &w, double kappa);

NodalField project_box(const NodalField &v, const BoxBounds &b);

// alpha TV(s) + y^T s + beta/2 ||grad s - grad sigma||^2 with y a dual vector.
double s_objective(const CellGradient &grad, const NodalField &sigma, const NodalField &y,
                   const NodalField &s, double alpha, double beta, bool anisotropic = false);

struct SSubproblemResult
{
  NodalField s;
  double primal_residual = 0.0;  // ||d - grad s||_{L2}
  double objective_start = 0.0;  // s_objective at the warm start
  double objective_end = 0.0;
  int cg_iterations = 0;         // summed over the inner iterations
  bool cg_converged = true;
};

//
// Inner ADMM for min over the box of s_objective, splitting d = grad s:
//   d <- shrink((beta grad sigma + rho (grad s - u)) / (beta + rho), alpha / (beta + rho))
//   s <- clip(argmin y^T s + rho/2 ||d + u - grad s||^2)
//   u <- u + d - grad s
// The s-step solves rho G^T W G s = rho G^T W (d + u) - y by CG and then clips to the box,
// which is not the exact constrained minimizer once a bound is active.
//
SSubproblemResult s_subproblem(const CellGradient &grad, const NodalField &sigma_next,
                               const NodalField &y, const NodalField &s_start,
                               InnerAdmmState &inner, const InnerAdmmConfig &cfg,
                               double alpha, double beta, const BoxBounds &bounds);

}  // namespace eddytv

#endif  // EDDYTV_TV_OPS_HPP

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/tv_ops.hpp"

#include <cmath>
#include <fmt/format.h>

namespace eddytv
{

void BoxBounds::Validate(double sigma0) const
{
  if (!(upper > lower))
  {
    throw ConfigError(fmt::format("bounds.upper ({}) must exceed bounds.lower ({})", upper,
                                  lower));
  }
  if (!(lower > -sigma0))
  {
    throw ConfigError(fmt::format("bounds.lower ({}) must exceed -sigma0 ({})", lower,
                                  -sigma0));
  }
}

double tv_seminorm(const CellGradient &grad, const NodalField &v, bool anisotropic)
{
  const CellVectorField g = grad.Apply(v);
  double sum = 0.0;
  for (int c = 0; c < g.rows(); c++)
  {
    sum += grad.volumes[c] * (anisotropic ? g.row(c).lpNorm<1>() : g.row(c).norm());
  }
  return sum;
}

CellVectorField shrink(const CellVectorField &w, double kappa)
{
  CellVectorField d(w.rows(), 3);
  for (int c = 0; c < w.rows(); c++)
  {
    const double n = w.row(c).norm();
    if (n > kappa)
    {
      d.row(c) = ((n - kappa) / n) * w.row(c);
    }
    else
    {
      d.row(c).setZero();
    }
  }
  return d;
}

CellVectorField shrink_anisotropic(const CellVectorField &w, double kappa)
{
  return w.unaryExpr([kappa](double x)
                     { return std::copysign(std::max(std::abs(x) - kappa, 0.0), x); });
}

NodalField project_box(const NodalField &v, const BoxBounds &b)
{
  return v.cwiseMax(b.lower).cwiseMin(b.upper);
}

double s_objective(const CellGradient &grad, const NodalField &sigma, const NodalField &y,
                   const NodalField &s, double alpha, double beta, bool anisotropic)
{
  const double r = grad.Norm(grad.Apply(s - sigma));
  return alpha * tv_seminorm(grad, s, anisotropic) + y.dot(s) + 0.5 * beta * r * r;
}

SSubproblemResult s_subproblem(const CellGradient &grad, const NodalField &sigma_next,
                               const NodalField &y, const NodalField &s_start,
                               InnerAdmmState &inner, const InnerAdmmConfig &cfg,
                               double alpha, double beta, const BoxBounds &bounds)
{
  const double rho = cfg.rho > 0.0 ? cfg.rho : beta;
  if (!(rho > 0.0) || beta < 0.0 || alpha < 0.0)
  {
    throw ConfigError("inner ADMM needs rho > 0 and non-negative alpha, beta");
  }
  SSubproblemResult res;
  res.s = s_start;
  res.objective_start = s_objective(grad, sigma_next, y, s_start, alpha, beta, cfg.anisotropic);

  const CellVectorField grad_sigma = grad.Apply(sigma_next);
  CellVectorField grad_s = grad.Apply(res.s);
  if (inner.Empty())
  {
    inner.d = grad_s;
    inner.u = CellVectorField::Zero(grad_s.rows(), 3);
  }
  const double kappa = alpha / (beta + rho);
  const LinearOperator normal = [&grad, rho](const Eigen::VectorXd &v) -> Eigen::VectorXd
  { return rho * grad.ApplyAdjoint(grad.Apply(v)); };

  for (int it = 0; it < cfg.iterations; it++)
  {
    const CellVectorField w = (beta * grad_sigma + rho * (grad_s - inner.u)) / (beta + rho);
    inner.d = cfg.anisotropic ? shrink_anisotropic(w, kappa) : shrink(w, kappa);

    const Eigen::VectorXd rhs = rho * grad.ApplyAdjoint(inner.d + inner.u) - y;
    const CgResult cg = cg_solve(normal, rhs, cfg.cg_tol, cfg.cg_max_iter, res.s);
    res.cg_iterations += cg.iterations;
    res.cg_converged = res.cg_converged && cg.converged;
    res.s = project_box(cg.x, bounds);
    grad_s = grad.Apply(res.s);

    inner.u += inner.d - grad_s;
  }
  res.primal_residual = grad.Norm(inner.d - grad_s);
  res.objective_end = s_objective(grad, sigma_next, y, res.s, alpha, beta, cfg.anisotropic);
  return res;
}

}  // namespace eddytv

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/eddy_solver.hpp"

#include <cmath>
#include "eddytv/tv_ops.hpp"

namespace eddytv
{

EddyProblem::EddyProblem(std::shared_ptr<const FeSpace> space, const PhysicalParams &params,
                         const SourceSpec &source, BoundaryTrace observed)
  : space_(std::move(space)), params_(params), source_(source), observed_(std::move(observed))
{
  source_load_ = assemble_dipole_load(*space_, source_, params_.omega);
  divergence_ = assemble_divergence_coupling(*space_, params_.epsilon);
  gram_ = hcurl_gram_matrix(*space_);
}

double EddyProblem::HcurlNorm(const EdgeField &E) const
{
  const Eigen::VectorXd re = E.real(), im = E.imag();
  return std::sqrt(std::max(0.0, re.dot(gram_ * re) + im.dot(gram_ * im)));
}

std::shared_ptr<const Factorization> EddyProblem::Factorize(const NodalField &sigma) const
{
  const ComplexSparseMatrix M = assemble_state_matrix(*space_, sigma, params_);
  std::shared_ptr<const SymbolicAnalysis> symbolic;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    symbolic = symbolic_;
  }
  auto f = factorize(M, symbolic);
  std::lock_guard<std::mutex> lock(mutex_);
  symbolic_ = f->Symbolic();
  factorizations_++;
  return f;
}

long EddyProblem::FactorizationCount() const
{
  std::lock_guard<std::mutex> lock(mutex_);
  return factorizations_;
}

namespace
{

double DivergenceResidual(const EddyProblem &problem, const EdgeField &E)
{
  const double nE = E.norm();
  if (nE == 0.0)
  {
    return 0.0;
  }
  const RealSparseMatrix &B = problem.DivergenceBlock();
  const Eigen::VectorXcd BtE = B.transpose().cast<Complex>() * E;
  return BtE.norm() / nE;
}

}  // namespace

StateSolution solve_state(const EddyProblem &problem, const NodalField &sigma,
                          const EdgeField &load)
{
  const FeSpace &space = problem.Space();
  StateSolution st;
  st.sigma = sigma;
  st.factorization = problem.Factorize(sigma);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(space.NumSaddleDofs());
  b.head(space.NumEdgeDofs()) = load;
  const Eigen::VectorXcd x = st.factorization->Solve(b);
  st.residual_norm = relative_residual(st.factorization->Matrix(), x, b);
  st.E = x.head(space.NumEdgeDofs());
  st.phi = x.tail(space.NumMultiplierDofs());
  st.divergence_residual = DivergenceResidual(problem, st.E);
  st.hcurl_norm = problem.HcurlNorm(st.E);
  return st;
}

StateSolution solve_state(const EddyProblem &problem, const NodalField &sigma)
{
  return solve_state(problem, sigma, problem.SourceLoad());
}

AdjointSolution solve_adjoint(const EddyProblem &problem, const StateSolution &state)
{
  const FeSpace &space = problem.Space();
  AdjointSolution adj;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(space.NumSaddleDofs());
  b.head(space.NumEdgeDofs()) = assemble_adjoint_load(space, state.E, problem.Observed());
  const Eigen::VectorXcd x = state.factorization->Solve(b);
  adj.residual_norm = relative_residual(state.factorization->Matrix(), x, b);
  adj.F = x.head(space.NumEdgeDofs());
  adj.psi = x.tail(space.NumMultiplierDofs());
  adj.divergence_residual = DivergenceResidual(problem, adj.F);
  adj.hcurl_norm = problem.HcurlNorm(adj.F);
  return adj;
}

double misfit(const EddyProblem &problem, const StateSolution &state)
{
  return trace_misfit(problem.Space(), evaluate_trace(problem.Space(), state.E),
                      problem.Observed());
}

NodalField gradient(const EddyProblem &problem, const StateSolution &state,
                    const AdjointSolution &adjoint)
{
  const FeSpace &space = problem.Space();
  const Mesh &m = space.GetMesh();
  NodalField g = NodalField::Zero(space.NumConductorDofs());
  for (int t : space.ConductorTets())
  {
    const auto &geo = space.Geometry(t);
    // E = sum_a lambda_a P_a and F = sum_b lambda_b Q_b on the tet.
    std::array<Eigen::Vector3cd, 4> P, Q;
    for (int a = 0; a < 4; a++)
    {
      P[a].setZero();
      Q[a].setZero();
    }
    for (int le = 0; le < 6; le++)
    {
      const int dof = space.EdgeDof(m.tet_edges[t][le]);
      if (dof < 0)
      {
        continue;
      }
      const auto [i, j] = kTetEdges[le];
      const double s = space.EdgeSign(t, le);
      const Eigen::Vector3cd gi = geo.grad[i].cast<Complex>(), gj = geo.grad[j].cast<Complex>();
      P[i] += s * state.E[dof] * gj;
      P[j] -= s * state.E[dof] * gi;
      Q[i] += s * adjoint.F[dof] * gj;
      Q[j] -= s * adjoint.F[dof] * gi;
    }
    double PQ[4][4];
    for (int a = 0; a < 4; a++)
    {
      for (int b = 0; b < 4; b++)
      {
        PQ[a][b] = P[a].cwiseProduct(Q[b]).sum().imag();
      }
    }
    for (int c = 0; c < 4; c++)
    {
      const int dof = space.ConductorDof(m.tets[t][c]);
      if (dof < 0)
      {
        continue;
      }
      double sum = 0.0;
      for (int a = 0; a < 4; a++)
      {
        for (int b = 0; b < 4; b++)
        {
          const bool aa = a == b, ac = a == c, bc = b == c;
          const double w = (aa && ac) ? 1.0 / 20.0
                           : (aa || ac || bc) ? 1.0 / 60.0
                                              : 1.0 / 120.0;
          sum += w * PQ[a][b];
        }
      }
      g[dof] += problem.Params().omega * geo.volume * sum;
    }
  }
  return g;
}

MisfitEvaluation evaluate_misfit(const EddyProblem &problem, const NodalField &sigma,
                                 bool with_gradient)
{
  MisfitEvaluation ev;
  ev.state = solve_state(problem, sigma);
  ev.value = misfit(problem, ev.state);
  if (with_gradient)
  {
    ev.grad = gradient(problem, ev.state, solve_adjoint(problem, ev.state));
  }
  return ev;
}

LagrangianTerms augmented_lagrangian(double misfit_value, const NodalField &sigma,
                                     const NodalField &s, const NodalField &y, double alpha,
                                     double beta, const CellGradient &grad,
                                     bool anisotropic_tv)
{
  LagrangianTerms L;
  L.misfit = misfit_value;
  L.tv = alpha * tv_seminorm(grad, s, anisotropic_tv);
  L.coupling = y.dot(s - sigma);
  const double d = grad.Norm(grad.Apply(s - sigma));
  L.penalty = 0.5 * beta * d * d;
  return L;
}

}  // namespace eddytv

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_EDDY_SOLVER_HPP
#define EDDYTV_EDDY_SOLVER_HPP

#include <memory>
#include <mutex>
#include "eddytv/fem_assembly.hpp"

namespace eddytv
{

struct StateSolution
{
  NodalField sigma;           // conductivity the system was assembled with
  EdgeField E;                // edge coefficients
  Eigen::VectorXcd phi;       // multiplier on U_h
  double residual_norm = 0.0; // relative residual of the saddle system
  double divergence_residual = 0.0;  // ||B^T E|| / ||E|| (0 for E = 0)
  double hcurl_norm = 0.0;
  std::shared_ptr<const Factorization> factorization;
};

struct AdjointSolution
{
  EdgeField F;
  Eigen::VectorXcd psi;
  double residual_norm = 0.0;
  double divergence_residual = 0.0;
  double hcurl_norm = 0.0;
};

//
// Forward model: mesh, physical constants, dipole source and the observed trace. The
// source load, divergence block and H(curl) Gram matrix are built once; the symbolic
// factorization is shared by every conductivity on this mesh.
//
class EddyProblem
{
public:
  EddyProblem(std::shared_ptr<const FeSpace> space, const PhysicalParams &params,
              const SourceSpec &source, BoundaryTrace observed = {});

  const FeSpace &Space() const { return *space_; }
  const std::shared_ptr<const FeSpace> &SpacePtr() const { return space_; }
  const PhysicalParams &Params() const { return params_; }
  const SourceSpec &Source() const { return source_; }
  const BoundaryTrace &Observed() const { return observed_; }
  void SetObserved(BoundaryTrace observed) { observed_ = std::move(observed); }

  const EdgeField &SourceLoad() const { return source_load_; }
  const RealSparseMatrix &DivergenceBlock() const { return divergence_; }
  double HcurlNorm(const EdgeField &E) const;

  // Factorizes the state matrix for sigma, reusing the cached ordering.
  std::shared_ptr<const Factorization> Factorize(const NodalField &sigma) const;

  // Number of numeric factorizations performed so far.
  long FactorizationCount() const;

private:
  std::shared_ptr<const FeSpace> space_;
  PhysicalParams params_;
  SourceSpec source_;
  BoundaryTrace observed_;
  EdgeField source_load_;
  RealSparseMatrix divergence_, gram_;
  mutable std::mutex mutex_;
  mutable std::shared_ptr<const SymbolicAnalysis> symbolic_;
  mutable long factorizations_ = 0;
};

// Solves the saddle system for sigma. Errors from assembly (sigma below the positivity
// floor) and factorization (SingularMatrixError) propagate.
StateSolution solve_state(const EddyProblem &problem, const NodalField &sigma);

// Same as solve_state with a caller-supplied edge load in place of the dipole source.
StateSolution solve_state(const EddyProblem &problem, const NodalField &sigma,
                          const EdgeField &load);

// Adjoint system with load from the mismatch between the observed and computed traces;
// reuses the state's factorization (the matrix is complex symmetric).
AdjointSolution solve_adjoint(const EddyProblem &problem, const StateSolution &state);

// 1/2 ||E x n - E_obs x n||^2 on Gamma.
double misfit(const EddyProblem &problem, const StateSolution &state);

// Dual vector g_i = omega int_{OmegaC} Im(E . F) phi_i over V_h, with the unconjugated
// product; g^T v is the directional derivative of the misfit along v.
NodalField gradient(const EddyProblem &problem, const StateSolution &state,
                    const AdjointSolution &adjoint);

// Misfit and gradient with one factorization.
struct MisfitEvaluation
{
  double value = 0.0;
  NodalField grad;
  StateSolution state;
};
MisfitEvaluation evaluate_misfit(const EddyProblem &problem, const NodalField &sigma,
                                 bool with_gradient = true);

struct LagrangianTerms
{
  double misfit = 0.0;
  double tv = 0.0;        // alpha times the TV seminorm of s
  double coupling = 0.0;  // y^T (s - sigma)
  double penalty = 0.0;   // beta/2 ||grad s - grad sigma||^2
  double Total() const { return misfit + tv + coupling + penalty; }
};

// Augmented Lagrangian for given misfit value G(sigma). y is a dual vector, so the
// coupling term is the plain pairing y^T (s - sigma).
LagrangianTerms augmented_lagrangian(double misfit_value, const NodalField &sigma,
                                     const NodalField &s, const NodalField &y, double alpha,
                                     double beta, const CellGradient &grad,
                                     bool anisotropic_tv = false);

}  // namespace eddytv

#endif  // EDDYTV_EDDY_SOLVER_HPP

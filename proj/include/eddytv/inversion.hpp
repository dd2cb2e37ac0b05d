// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_INVERSION_HPP
#define EDDYTV_INVERSION_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>
#include "eddytv/eddy_solver.hpp"
#include "eddytv/tv_ops.hpp"

namespace eddytv
{

enum class MultiplierMode
{
  Gradient,   // y <- G'(sigma)
  Classical   // y <- y + beta K (s - sigma), dual ascent; comparison only
};

std::string ToString(MultiplierMode m);
MultiplierMode ParseMultiplierMode(const std::string &s);

struct LineSearchConfig
{
  double c1 = 1e-4;          // Armijo constant
  double backtrack = 0.5;    // step reduction factor
  int max_backtracks = 20;
  double initial_step = 1.0; // sup-norm of the first trial change in sigma
};

// Lower bound m_k = min(slope (k - 1), cap) at outer iteration k = 1, 2, ...; upper bound
// fixed. cap = +inf gives the unbounded linear schedule.
struct TruncationSchedule
{
  double m_slope = 0.05;
  double m_cap = 0.0;
  double upper = 15.0;

  BoxBounds At(int k) const;
};

struct OuterConfig
{
  double alpha = 1e-7;
  double beta = 2e-3;
  int outer_iterations = 50;
  int nlcg_iterations = 3;
  LineSearchConfig line_search;
  TruncationSchedule truncation;
  InnerAdmmConfig inner;
  MultiplierMode multiplier_mode = MultiplierMode::Gradient;
  // Stop once ||sigma^{k+1} - sigma^k||_{L2} < early_stop_tol (0 disables).
  double early_stop_tol = 0.0;

  void Validate() const;
};

struct IterationRecord
{
  int k = 0;
  double L = 0.0;            // augmented Lagrangian at (sigma^k, s^k, y^k)
  double G = 0.0;            // misfit at sigma^k
  double TV = 0.0;           // TV seminorm of s^k
  double s_sigma_l2 = 0.0;   // ||s^k - sigma^k||_{L2}
  double s_sigma_grad = 0.0; // ||grad s^k - grad sigma^k||_{L2}
  double sigma_error = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;

  // Diagnostics, not written to the CSV log.
  double step_l2 = 0.0;              // ||sigma^k - sigma^{k-1}||_{L2}
  double grad_gap = 0.0;             // ||grad s^{k-1} - grad sigma^k||_{L2}
  double multiplier_residual = 0.0;  // ||y^k - G'(sigma^k)||
  double lower_bound = 0.0;
  std::vector<double> nlcg_objective;  // sigma-subproblem objective per NLCG iterate
  int line_search_failures = 0;
  double inner_primal_residual = 0.0;
  double inner_objective_start = 0.0, inner_objective_end = 0.0;
  bool inner_cg_converged = true;
};

struct AdmmState
{
  int k = 0;
  NodalField sigma, s, y;
  InnerAdmmState inner;
  double nlcg_step = 0.0;  // remembered sup-norm step of the line search (0: unset)
  // Misfit and its gradient at sigma, valid when has_gradient.
  bool has_gradient = false;
  double G = 0.0;
  NodalField grad;
  std::vector<IterationRecord> history;

  static AdmmState Initial(const FeSpace &space);
};

// Shared operators of an inversion run.
struct InversionContext
{
  const EddyProblem &problem;
  CellGradient grad;
  Eigen::VectorXd lumped_mass;
  RealSparseMatrix mass;

  explicit InversionContext(const EddyProblem &problem);
  double L2Norm(const NodalField &v) const;
};

// sigma-subproblem objective G(sigma) - y^T sigma + beta/2 ||grad s - grad sigma||^2 for a
// given misfit value, and its dual gradient for a given misfit gradient.
double sigma_objective(const InversionContext &ctx, double misfit_value,
                       const NodalField &sigma, const NodalField &s, const NodalField &y,
                       double beta);
NodalField sigma_objective_gradient(const InversionContext &ctx, const NodalField &misfit_grad,
                                    const NodalField &sigma, const NodalField &s,
                                    const NodalField &y, double beta);

struct SigmaStepResult
{
  NodalField sigma;
  double G = 0.0;
  NodalField grad;  // misfit gradient at sigma
  std::vector<double> objective;  // per NLCG iterate, starting point first
  int line_search_failures = 0;
};

// Projected Polak-Ribiere+ NLCG with Armijo backtracking on the projected path, started
// from state.sigma (projected onto bounds). Uses and updates state.nlcg_step. The direction
// is preconditioned by the inverse lumped mass; it restarts from steepest descent when the
// PR coefficient is clipped, the active set changes or descent is lost.
SigmaStepResult sigma_subproblem(const InversionContext &ctx, AdmmState &state,
                                 const OuterConfig &cfg, const BoxBounds &bounds);

// Multiplier for the next outer iteration.
NodalField y_update(const InversionContext &ctx, const AdmmState &state,
                    const SigmaStepResult &step, const NodalField &s_next,
                    const OuterConfig &cfg);

using IterationCallback = std::function<void(const AdmmState &)>;

struct RunOptions
{
  // Returns ||sigma - sigma_true||_{L2}; unset disables the error column.
  std::function<double(const NodalField &)> error;
  IterationCallback on_iteration;  // after each recorded iteration, k = 0 included
  // Snapshot written when a solver error aborts the run (empty: none).
  std::filesystem::path snapshot_path;
  bool record_wall_time = true;
};

// Runs outer iterations state.k + 1, ..., cfg.outer_iterations starting from `state`
// (AdmmState::Initial for a fresh run, or a restored checkpoint). Records iteration 0
// (the initial point) for a fresh state.
AdmmState run_modified_admm(const InversionContext &ctx, const OuterConfig &cfg,
                            AdmmState state, const RunOptions &opts = {});

// CSV log: k,L,G,TV,s_minus_sigma_l2,grad_s_minus_grad_sigma_l2,sigma_err,wall_time_s
void write_log_header(std::ostream &os);
void write_log_row(std::ostream &os, const IterationRecord &rec);

// Text checkpoint with exact round trip of every double.
void write_checkpoint(const AdmmState &state, const std::filesystem::path &path);
AdmmState read_checkpoint(const std::filesystem::path &path);

}  // namespace eddytv

#endif  // EDDYTV_INVERSION_HPP

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/inversion.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace eddytv
{

std::string ToString(MultiplierMode m)
{
  return m == MultiplierMode::Gradient ? "gradient" : "classical";
}

MultiplierMode ParseMultiplierMode(const std::string &s)
{
  if (s == "gradient")
  {
    return MultiplierMode::Gradient;
  }
  if (s == "classical")
  {
    return MultiplierMode::Classical;
  }
  throw ConfigError("multiplier_mode must be 'gradient' or 'classical', got '" + s + "'");
}

BoxBounds TruncationSchedule::At(int k) const
{
  BoxBounds b;
  b.lower = std::min(m_slope * (k - 1), m_cap);
  b.upper = upper;
  return b;
}

void OuterConfig::Validate() const
{
  if (!(alpha > 0.0) || !(beta > 0.0))
  {
    throw ConfigError("outer.alpha and outer.beta must be positive");
  }
  if (outer_iterations < 1 || nlcg_iterations < 1 || inner.iterations < 1)
  {
    throw ConfigError("iteration counts must be at least 1");
  }
  if (!(line_search.c1 > 0.0 && line_search.c1 < 1.0) ||
      !(line_search.backtrack > 0.0 && line_search.backtrack < 1.0) ||
      line_search.max_backtracks < 1 || !(line_search.initial_step > 0.0))
  {
    throw ConfigError("invalid line search parameters");
  }
  if (!(truncation.upper > truncation.At(1).lower))
  {
    throw ConfigError("truncation.upper must exceed the initial lower bound");
  }
}

AdmmState AdmmState::Initial(const FeSpace &space)
{
  AdmmState st;
  const int n = space.NumConductorDofs();
  st.sigma = NodalField::Zero(n);
  st.s = NodalField::Zero(n);
  st.y = NodalField::Zero(n);
  return st;
}

InversionContext::InversionContext(const EddyProblem &problem)
  : problem(problem), grad(cell_gradient_operator(problem.Space())),
    mass(nodal_mass_matrix(problem.Space()))
{
  lumped_mass = mass * Eigen::VectorXd::Ones(mass.cols());
}

double InversionContext::L2Norm(const NodalField &v) const
{
  return std::sqrt(std::max(0.0, v.dot(mass * v)));
}

double sigma_objective(const InversionContext &ctx, double misfit_value,
                       const NodalField &sigma, const NodalField &s, const NodalField &y,
                       double beta)
{
  const double r = ctx.grad.Norm(ctx.grad.Apply(s - sigma));
  return misfit_value - y.dot(sigma) + 0.5 * beta * r * r;
}

NodalField sigma_objective_gradient(const InversionContext &ctx, const NodalField &misfit_grad,
                                    const NodalField &sigma, const NodalField &s,
                                    const NodalField &y, double beta)
{
  return misfit_grad - y + beta * ctx.grad.ApplyAdjoint(ctx.grad.Apply(sigma - s));
}

namespace
{

// Zeroes the direction components that would leave the box at active bounds.
void RestrictDirection(NodalField &p, const NodalField &x, const BoxBounds &b)
{
  for (int i = 0; i < p.size(); i++)
  {
    if ((x[i] <= b.lower && p[i] < 0.0) || (x[i] >= b.upper && p[i] > 0.0))
    {
      p[i] = 0.0;
    }
  }
}

std::vector<bool> ActiveSet(const NodalField &x, const BoxBounds &b)
{
  std::vector<bool> a(x.size());
  for (int i = 0; i < x.size(); i++)
  {
    a[i] = x[i] <= b.lower || x[i] >= b.upper;
  }
  return a;
}

}  // namespace

SigmaStepResult sigma_subproblem(const InversionContext &ctx, AdmmState &state,
                                 const OuterConfig &cfg, const BoxBounds &bounds)
{
  const EddyProblem &problem = ctx.problem;
  const auto &ls = cfg.line_search;
  const double beta = cfg.beta;
  const NodalField &s = state.s;
  const NodalField &y = state.y;
  const Eigen::VectorXd inv_mass = ctx.lumped_mass.cwiseInverse();

  SigmaStepResult res;
  res.sigma = project_box(state.sigma, bounds);
  if (state.has_gradient && res.sigma == state.sigma)
  {
    res.G = state.G;
    res.grad = state.grad;
  }
  else
  {
    MisfitEvaluation ev = evaluate_misfit(problem, res.sigma);
    res.G = ev.value;
    res.grad = std::move(ev.grad);
  }
  double F = sigma_objective(ctx, res.G, res.sigma, s, y, beta);
  NodalField gF = sigma_objective_gradient(ctx, res.grad, res.sigma, s, y, beta);
  res.objective.push_back(F);

  NodalField p = -inv_mass.cwiseProduct(gF);
  RestrictDirection(p, res.sigma, bounds);

  for (int it = 0; it < cfg.nlcg_iterations; it++)
  {
    double slope = gF.dot(p);
    if (!(slope < 0.0))
    {
      p = -inv_mass.cwiseProduct(gF);
      RestrictDirection(p, res.sigma, bounds);
      slope = gF.dot(p);
    }
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (!(slope < 0.0) || pmax == 0.0)
    {
      break;  // projected stationary point
    }

    double t = (state.nlcg_step > 0.0 ? state.nlcg_step : ls.initial_step) / pmax;
    bool accepted = false, unresolved = false;
    int trials = 0;
    NodalField trial;
    StateSolution trial_state;
    double trial_G = 0.0, trial_F = 0.0;
    for (; trials <= ls.max_backtracks; trials++, t *= ls.backtrack)
    {
      trial = project_box(res.sigma + t * p, bounds);
      const NodalField delta = trial - res.sigma;
      if (delta.lpNorm<Eigen::Infinity>() == 0.0)
      {
        continue;
      }
      // Predicted decrease below the rounding level of F: Armijo cannot resolve it.
      if (-gF.dot(delta) <= 1e-13 * std::max(1.0, std::abs(F)))
      {
        unresolved = true;
        break;
      }
      trial_state = solve_state(problem, trial);
      trial_G = misfit(problem, trial_state);
      trial_F = sigma_objective(ctx, trial_G, trial, s, y, beta);
      if (trial_F <= F + ls.c1 * gF.dot(delta))
      {
        accepted = true;
        break;
      }
    }
    if (unresolved)
    {
      state.nlcg_step = 0.0;
      break;  // stationary to rounding
    }
    if (!accepted)
    {
      res.line_search_failures++;
      std::cerr << fmt::format("warning: line search failed after {} backtracks; keeping "
                               "sigma (outer iteration {})\n",
                               ls.max_backtracks, state.k + 1);
      state.nlcg_step = 0.0;
      break;
    }
    const double sup_step = t * pmax;
    state.nlcg_step = trials == 0 ? 2.0 * sup_step : sup_step;

    const auto active_before = ActiveSet(res.sigma, bounds);
    res.sigma = trial;
    res.G = trial_G;
    res.grad = gradient(problem, trial_state, solve_adjoint(problem, trial_state));
    F = trial_F;
    res.objective.push_back(F);

    const NodalField gF_new = sigma_objective_gradient(ctx, res.grad, res.sigma, s, y, beta);
    const double denom = gF.dot(inv_mass.cwiseProduct(gF));
    double pr = denom > 0.0 ? gF_new.dot(inv_mass.cwiseProduct(gF_new - gF)) / denom : 0.0;
    if (ActiveSet(res.sigma, bounds) != active_before)
    {
      pr = 0.0;
    }
    p = -inv_mass.cwiseProduct(gF_new) + std::max(pr, 0.0) * p;
    RestrictDirection(p, res.sigma, bounds);
    gF = gF_new;
  }
  return res;
}

NodalField y_update(const InversionContext &ctx, const AdmmState &state,
                    const SigmaStepResult &step, const NodalField &s_next,
                    const OuterConfig &cfg)
{
  if (cfg.multiplier_mode == MultiplierMode::Gradient)
  {
    return step.grad;
  }
  return state.y + cfg.beta * ctx.grad.ApplyAdjoint(ctx.grad.Apply(s_next - step.sigma));
}

namespace
{

IterationRecord MakeRecord(const InversionContext &ctx, const OuterConfig &cfg,
                           const AdmmState &state, const RunOptions &opts)
{
  IterationRecord rec;
  rec.k = state.k;
  const LagrangianTerms L = augmented_lagrangian(state.G, state.sigma, state.s, state.y,
                                                 cfg.alpha, cfg.beta, ctx.grad,
                                                 cfg.inner.anisotropic);
  rec.L = L.Total();
  rec.G = state.G;
  rec.TV = tv_seminorm(ctx.grad, state.s, cfg.inner.anisotropic);
  rec.s_sigma_l2 = ctx.L2Norm(state.s - state.sigma);
  rec.s_sigma_grad = ctx.grad.Norm(ctx.grad.Apply(state.s - state.sigma));
  if (opts.error)
  {
    rec.sigma_error = opts.error(state.sigma);
  }
  rec.multiplier_residual = (state.y - state.grad).norm();
  return rec;
}

void RequireFeasible(const NodalField &v, const BoxBounds &b, const char *name)
{
  if (v.size() > 0 && (v.minCoeff() < b.lower || v.maxCoeff() > b.upper))
  {
    throw std::logic_error(fmt::format("{} left the admissible box [{}, {}]", name, b.lower,
                                       b.upper));
  }
}

}  // namespace

AdmmState run_modified_admm(const InversionContext &ctx, const OuterConfig &cfg,
                            AdmmState state, const RunOptions &opts)
{
  cfg.Validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&]()
  {
    return opts.record_wall_time
               ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
               : 0.0;
  };

  try
  {
    if (state.history.empty())
    {
      if (!state.has_gradient)
      {
        MisfitEvaluation ev = evaluate_misfit(ctx.problem, state.sigma);
        state.G = ev.value;
        state.grad = std::move(ev.grad);
        state.has_gradient = true;
      }
      IterationRecord rec = MakeRecord(ctx, cfg, state, opts);
      rec.multiplier_residual = 0.0;  // y^0 is an input, not an update
      rec.lower_bound = cfg.truncation.At(1).lower;
      rec.wall_time = elapsed();
      state.history.push_back(rec);
      if (opts.on_iteration)
      {
        opts.on_iteration(state);
      }
    }

    while (state.k < cfg.outer_iterations)
    {
      const BoxBounds bounds = cfg.truncation.At(state.k + 1);
      const NodalField sigma_prev = state.sigma;
      const NodalField s_prev = state.s;

      SigmaStepResult step = sigma_subproblem(ctx, state, cfg, bounds);
      const SSubproblemResult inner =
          s_subproblem(ctx.grad, step.sigma, state.y, project_box(state.s, bounds),
                       state.inner, cfg.inner, cfg.alpha, cfg.beta, bounds);
      NodalField y_next = y_update(ctx, state, step, inner.s, cfg);

      state.sigma = std::move(step.sigma);
      state.s = inner.s;
      state.y = std::move(y_next);
      state.G = step.G;
      state.grad = std::move(step.grad);
      state.has_gradient = true;
      state.k++;
      RequireFeasible(state.sigma, bounds, "sigma");
      RequireFeasible(state.s, bounds, "s");

      IterationRecord rec = MakeRecord(ctx, cfg, state, opts);
      rec.step_l2 = ctx.L2Norm(state.sigma - sigma_prev);
      rec.grad_gap = ctx.grad.Norm(ctx.grad.Apply(s_prev - state.sigma));
      rec.lower_bound = bounds.lower;
      rec.nlcg_objective = std::move(step.objective);
      rec.line_search_failures = step.line_search_failures;
      rec.inner_primal_residual = inner.primal_residual;
      rec.inner_objective_start = inner.objective_start;
      rec.inner_objective_end = inner.objective_end;
      rec.inner_cg_converged = inner.cg_converged;
      if (!inner.cg_converged)
      {
        std::cerr << fmt::format("warning: CG in the s-subproblem did not converge (outer "
                                 "iteration {})\n",
                                 state.k);
      }
      rec.wall_time = elapsed();
      state.history.push_back(rec);
      if (opts.on_iteration)
      {
        opts.on_iteration(state);
      }
      if (cfg.early_stop_tol > 0.0 && rec.step_l2 < cfg.early_stop_tol)
      {
        break;
      }
    }
  }
  catch (const std::exception &)
  {
    if (!opts.snapshot_path.empty())
    {
      write_checkpoint(state, opts.snapshot_path);
    }
    throw;
  }
  return state;
}

void write_log_header(std::ostream &os)
{
  os << "k,L,G,TV,s_minus_sigma_l2,grad_s_minus_grad_sigma_l2,sigma_err,wall_time_s\n";
}

void write_log_row(std::ostream &os, const IterationRecord &r)
{
  fmt::print(os, "{},{},{},{},{},{},{},{}\n", r.k, r.L, r.G, r.TV, r.s_sigma_l2,
             r.s_sigma_grad, r.sigma_error, r.wall_time);
}

namespace
{

void WriteVector(std::ostream &os, const char *name, const Eigen::VectorXd &v)
{
  os << name << " " << v.size() << "\n";
  for (int i = 0; i < v.size(); i++)
  {
    os << fmt::format("{}{}", i ? " " : "", v[i]);
  }
  os << "\n";
}

void WriteCells(std::ostream &os, const char *name, const CellVectorField &c)
{
  os << name << " " << c.rows() << "\n";
  for (int i = 0; i < c.rows(); i++)
  {
    os << fmt::format("{} {} {}\n", c(i, 0), c(i, 1), c(i, 2));
  }
}

class TokenReader
{
public:
  explicit TokenReader(std::istream &is) : is_(is) {}

  std::string Word()
  {
    std::string w;
    if (!(is_ >> w))
    {
      throw DataError("checkpoint ended unexpectedly");
    }
    return w;
  }
  void Expect(const std::string &w)
  {
    const std::string got = Word();
    if (got != w)
    {
      throw DataError("checkpoint: expected '" + w + "', found '" + got + "'");
    }
  }
  double Real()
  {
    const std::string w = Word();
    char *end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size())
    {
      throw DataError("checkpoint: malformed number '" + w + "'");
    }
    return v;
  }
  long Int()
  {
    const std::string w = Word();
    char *end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (end != w.c_str() + w.size())
    {
      throw DataError("checkpoint: malformed integer '" + w + "'");
    }
    return v;
  }
  Eigen::VectorXd Vector(const std::string &name)
  {
    Expect(name);
    Eigen::VectorXd v(Int());
    for (int i = 0; i < v.size(); i++)
    {
      v[i] = Real();
    }
    return v;
  }
  CellVectorField Cells(const std::string &name)
  {
    Expect(name);
    CellVectorField c(Int(), 3);
    for (int i = 0; i < c.rows(); i++)
    {
      for (int k = 0; k < 3; k++)
      {
        c(i, k) = Real();
      }
    }
    return c;
  }

private:
  std::istream &is_;
};

}  // namespace

void write_checkpoint(const AdmmState &st, const std::filesystem::path &path)
{
  std::ostringstream os;
  os << "eddytv-checkpoint v1\n";
  os << fmt::format("k {}\nnlcg_step {}\nhas_gradient {}\nG {}\n", st.k, st.nlcg_step,
                    st.has_gradient ? 1 : 0, st.G);
  WriteVector(os, "sigma", st.sigma);
  WriteVector(os, "s", st.s);
  WriteVector(os, "y", st.y);
  WriteVector(os, "grad", st.grad);
  WriteCells(os, "inner_d", st.inner.d);
  WriteCells(os, "inner_u", st.inner.u);
  os << "history " << st.history.size() << "\n";
  for (const auto &r : st.history)
  {
    os << fmt::format("{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}", r.k, r.L, r.G,
                      r.TV, r.s_sigma_l2, r.s_sigma_grad, r.sigma_error, r.wall_time,
                      r.step_l2, r.grad_gap, r.multiplier_residual, r.lower_bound,
                      r.line_search_failures, r.inner_primal_residual,
                      r.inner_objective_start, r.inner_objective_end,
                      r.inner_cg_converged ? 1 : 0, r.nlcg_objective.size());
    for (double v : r.nlcg_objective)
    {
      os << fmt::format(" {}", v);
    }
    os << "\n";
  }
  std::ofstream out(path);
  if (!out)
  {
    throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  out << os.str();
}

AdmmState read_checkpoint(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot read checkpoint " + path.string());
  }
  TokenReader rd(in);
  rd.Expect("eddytv-checkpoint");
  rd.Expect("v1");
  AdmmState st;
  rd.Expect("k");
  st.k = static_cast<int>(rd.Int());
  rd.Expect("nlcg_step");
  st.nlcg_step = rd.Real();
  rd.Expect("has_gradient");
  st.has_gradient = rd.Int() != 0;
  rd.Expect("G");
  st.G = rd.Real();
  st.sigma = rd.Vector("sigma");
  st.s = rd.Vector("s");
  st.y = rd.Vector("y");
  st.grad = rd.Vector("grad");
  st.inner.d = rd.Cells("inner_d");
  st.inner.u = rd.Cells("inner_u");
  rd.Expect("history");
  const long n = rd.Int();
  for (long i = 0; i < n; i++)
  {
    IterationRecord r;
    r.k = static_cast<int>(rd.Int());
    r.L = rd.Real();
    r.G = rd.Real();
    r.TV = rd.Real();
    r.s_sigma_l2 = rd.Real();
    r.s_sigma_grad = rd.Real();
    r.sigma_error = rd.Real();
    r.wall_time = rd.Real();
    r.step_l2 = rd.Real();
    r.grad_gap = rd.Real();
    r.multiplier_residual = rd.Real();
    r.lower_bound = rd.Real();
    r.line_search_failures = static_cast<int>(rd.Int());
    r.inner_primal_residual = rd.Real();
    r.inner_objective_start = rd.Real();
    r.inner_objective_end = rd.Real();
    r.inner_cg_converged = rd.Int() != 0;
    const long m = rd.Int();
    for (long j = 0; j < m; j++)
    {
      r.nlcg_objective.push_back(rd.Real());
    }
    st.history.push_back(std::move(r));
  }
  if (st.sigma.size() != st.s.size() || st.sigma.size() != st.y.size())
  {
    throw DataError("checkpoint: field sizes disagree");
  }
  return st;
}

}  // namespace eddytv

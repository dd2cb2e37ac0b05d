// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion, preceded by diagnostics.
// Arguments select criteria by number (default: all). Exit status is 0 only if every
// selected criterion passes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <fmt/core.h>
#include "eddytv/cli.hpp"
#include "../unit/test_common.hpp"

using namespace eddytv;

namespace
{

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since)
{
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome
{
  bool pass = false;
  std::string summary;
};

void Note(const std::string &line)
{
  std::cout << "    " << line << std::endl;
}

std::shared_ptr<const FeSpace> SpaceFor(const ExperimentPreset &p, int refine = 0)
{
  Mesh m = build_box_mesh(p.domain);
  for (int r = 0; r < refine; r++)
  {
    m = uniform_refine(m);
  }
  tag_inclusions(m, p);
  return std::make_shared<const FeSpace>(std::make_shared<const Mesh>(std::move(m)));
}

// A preset on its default mesh with noise-free and noisy synthetic data.
struct Example
{
  ExperimentPreset preset;
  std::shared_ptr<const FeSpace> space;
  BoundaryTrace clean, noisy;
  double data_seconds = 0.0;
};

const Example &GetExample(int n)
{
  static std::map<int, Example> cache;
  auto it = cache.find(n);
  if (it != cache.end())
  {
    return it->second;
  }
  const auto t0 = Clock::now();
  Example ex;
  ex.preset = preset_example(n);
  ex.space = SpaceFor(ex.preset);
  ex.clean = generate_synthetic_data(ex.preset, *ex.space, ex.preset.refine_extra);
  ex.noisy = add_noise(ex.clean, ex.preset.noise, ex.preset.seed);
  ex.data_seconds = Seconds(t0);
  Note(fmt::format("example {}: {} edges, {} V_h DOFs, data in {:.1f} s", n,
                   ex.space->GetMesh().NumEdges(), ex.space->NumConductorDofs(),
                   ex.data_seconds));
  return cache.emplace(n, std::move(ex)).first->second;
}

struct Run
{
  AdmmState state;
  RegionIntegrals regions;
  double seconds = 0.0;
};

// 50 outer iterations with the preset parameters.
const Run &GetRun(int n, bool noisy)
{
  static std::map<std::pair<int, bool>, Run> cache;
  const auto key = std::make_pair(n, noisy);
  auto it = cache.find(key);
  if (it != cache.end())
  {
    return it->second;
  }
  const Example &ex = GetExample(n);
  const auto t0 = Clock::now();
  EddyProblem problem(ex.space, ex.preset.physics, ex.preset.source,
                      noisy ? ex.noisy : ex.clean);
  const InversionContext ctx(problem);
  RunOptions opts;
  opts.record_wall_time = false;
  opts.error = [&](const NodalField &s) { return sigma_l2_error(*ex.space, s, ex.preset); };
  Run run;
  run.state = run_modified_admm(ctx, ex.preset.outer, AdmmState::Initial(*ex.space), opts);
  run.regions = region_integrals(*ex.space, run.state.sigma, ex.preset);
  run.seconds = Seconds(t0);
  const auto &h = run.state.history;
  Note(fmt::format("example {} ({}): error {:.4f} -> {:.4f}, G {:.4g} -> {:.4g}, inside mean "
                   "{:.4f}, outside mean {:.4f}, {:.0f} s",
                   n, noisy ? "noisy" : "noise-free", h.front().sigma_error,
                   h.back().sigma_error, h.front().G, h.back().G, run.regions.InsideMean(),
                   run.regions.OutsideMean(), run.seconds));
  return cache.emplace(key, std::move(run)).first->second;
}

// 1. Adjoint gradient against central differences.
Outcome GradientConsistency()
{
  const auto t0 = Clock::now();
  ExperimentPreset p = preset_example(1);
  p.domain.cells_per_axis = {6, 6, 11};
  const auto space = SpaceFor(p);
  const int edges = space->GetMesh().NumEdges();
  EddyProblem problem(space, p.physics, p.source, generate_synthetic_data(p, *space, 1));

  std::mt19937_64 rng(101);
  double worst_rel = 0.0, order_lo = 1e300, order_hi = -1e300;
  for (int i = 0; i < 5; i++)
  {
    const NodalField sigma = test::RandomField(*space, rng, 0.0, 5.0);
    const MisfitEvaluation ev = evaluate_misfit(problem, sigma);
    for (int j = 0; j < 5; j++)
    {
      const NodalField dir = test::RandomField(*space, rng, -1.0, 1.0);
      const double adjoint = ev.grad.dot(dir);
      auto G = [&](double t) { return evaluate_misfit(problem, sigma + t * dir, false).value; };
      auto fd = [&](double t) { return (G(t) - G(-t)) / (2.0 * t); };
      worst_rel = std::max(worst_rel, std::abs(fd(1e-5) - adjoint) / std::abs(adjoint));
      const double e1 = std::abs(fd(0.2) - adjoint);
      const double e2 = std::abs(fd(0.1) - adjoint);
      const double e3 = std::abs(fd(0.05) - adjoint);
      for (double order : {std::log2(e1 / e2), std::log2(e2 / e3)})
      {
        order_lo = std::min(order_lo, order);
        order_hi = std::max(order_hi, order);
      }
    }
  }
  const double secs = Seconds(t0);
  const bool pass = edges <= 5000 && worst_rel <= 1e-4 && order_lo >= 1.7 && order_hi <= 2.3 &&
                    secs <= 120.0;
  return {pass, fmt::format("{} edges, 25 pairs, max rel error {:.2e} at t=1e-5, observed "
                            "order in [{:.3f}, {:.3f}] over t=0.2/0.1/0.05, {:.1f} s",
                            edges, worst_rel, order_lo, order_hi, secs)};
}

// 2. Symmetry of the saddle matrix and solve residuals.
Outcome SaddleStructure()
{
  const Example &ex = GetExample(1);
  EddyProblem problem(ex.space, ex.preset.physics, ex.preset.source, ex.clean);
  const RealSparseMatrix Bt = problem.DivergenceBlock().transpose();
  std::mt19937_64 rng(202);
  double asym = 0.0, state_res = 0.0, adj_res = 0.0, div = 0.0;
  for (int trial = 0; trial < 3; trial++)
  {
    const NodalField sigma = test::RandomField(*ex.space, rng, 0.0, 15.0);
    const ComplexSparseMatrix M = assemble_state_matrix(*ex.space, sigma, ex.preset.physics);
    const ComplexSparseMatrix D = M - ComplexSparseMatrix(M.transpose());
    for (Eigen::Index i = 0; i < D.nonZeros(); i++)
    {
      asym = std::max(asym, std::abs(D.valuePtr()[i]));
    }

    const StateSolution st = solve_state(problem, sigma);
    const AdjointSolution adj = solve_adjoint(problem, st);
    // Residuals recomputed from the assembled matrix.
    const int ne = ex.space->NumEdgeDofs();
    Eigen::VectorXcd x(M.rows()), b = Eigen::VectorXcd::Zero(M.rows());
    x << st.E, st.phi;
    b.head(ne) = problem.SourceLoad();
    state_res = std::max({state_res, st.residual_norm, relative_residual(M, x, b)});
    x << adj.F, adj.psi;
    b.head(ne) = assemble_adjoint_load(*ex.space, st.E, problem.Observed());
    adj_res = std::max({adj_res, adj.residual_norm, relative_residual(M, x, b)});
    const Eigen::VectorXcd BtE = Bt.cast<Complex>() * st.E, BtF = Bt.cast<Complex>() * adj.F;
    div = std::max({div, BtE.norm() / st.E.norm(), BtF.norm() / adj.F.norm()});
  }
  const bool pass = asym == 0.0 && state_res <= 1e-10 && adj_res <= 1e-10 && div <= 1e-8;
  return {pass, fmt::format("3 random sigma: max|M - M^T| = {:g}, state residual {:.2e}, "
                            "adjoint residual {:.2e}, ||B^T E||/||E|| {:.2e}",
                            asym, state_res, adj_res, div)};
}

// Minimizer of kappa |d| + |d - w|^2 / 2. It lies on the ray through w, where the
// objective is convex in t = |d|; bisection on its derivative.
Vec3 ShrinkOracle(const Vec3 &w, double kappa)
{
  const double r = w.norm();
  if (r == 0.0)
  {
    return Vec3::Zero();
  }
  double a = 0.0, b = r;
  if (kappa >= r)
  {
    return Vec3::Zero();  // derivative kappa + t - r >= 0 on [0, r]
  }
  for (int it = 0; it < 200 && b - a > 1e-16 * r; it++)
  {
    const double m = 0.5 * (a + b);
    (kappa + m - r < 0.0 ? a : b) = m;
  }
  return w * (0.5 * (a + b) / r);
}

// 3. Isotropic shrinkage against per-cell minimization.
Outcome ShrinkOracleCheck()
{
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-3.0, 3.0), uk(0.0, 3.0);
  const int n = 1000;
  CellVectorField w(n, 3), w2(n, 3);
  std::vector<double> kappa(n);
  for (int i = 0; i < n; i++)
  {
    w.row(i) << u(rng), u(rng), u(rng);
    w2.row(i) << u(rng), u(rng), u(rng);
    kappa[i] = uk(rng);
  }
  auto f = [](const Vec3 &d, const Vec3 &wi, double k)
  { return k * d.norm() + 0.5 * (d - wi).squaredNorm(); };

  double worst = 0.0, worst_obj = -1e300, worst_expansion = -1e300;
  for (int i = 0; i < n; i++)
  {
    const CellVectorField a = shrink(w.row(i), kappa[i]);
    const CellVectorField b = shrink(w2.row(i), kappa[i]);
    const Vec3 da = a.row(0).transpose(), db = b.row(0).transpose();
    const Vec3 wi = w.row(i).transpose(), w2i = w2.row(i).transpose();
    const Vec3 ref = ShrinkOracle(wi, kappa[i]);
    worst = std::max(worst, (da - ref).norm());
    worst_obj = std::max(worst_obj, f(da, wi, kappa[i]) - f(ref, wi, kappa[i]));
    worst_expansion = std::max(worst_expansion, (da - db).norm() - (wi - w2i).norm());
  }
  const bool pass = worst <= 1e-8 && worst_obj <= 1e-12 && worst_expansion <= 1e-14;
  return {pass, fmt::format("1000 pairs: max |shrink - oracle| {:.2e}, objective excess "
                            "{:.2e}, max (|d1 - d2| - |w1 - w2|) {:.2e}",
                            worst, worst_obj, worst_expansion)};
}

// alpha sum |T||grad s| + y.s + beta/2 sum |T| |grad s - grad sigma|^2 from tet geometry.
double TinyObjective(const FeSpace &space, const NodalField &sigma, const NodalField &y,
                     const NodalField &s, double alpha, double beta)
{
  double v = y.dot(s);
  for (int t : space.ConductorTets())
  {
    const auto &g = space.Geometry(t);
    const Eigen::Vector4d ls = space.LocalNodal(s, t), lg = space.LocalNodal(sigma, t);
    Vec3 gs = Vec3::Zero(), gd = Vec3::Zero();
    for (int a = 0; a < 4; a++)
    {
      gs += ls[a] * g.grad[a];
      gd += (ls[a] - lg[a]) * g.grad[a];
    }
    v += g.volume * (alpha * gs.norm() + 0.5 * beta * gd.squaredNorm());
  }
  return v;
}

// Zooming grid search over the box [lo, hi]^n; the objective is convex.
NodalField GridSearch(const std::function<double(const NodalField &)> &f, int n, double lo,
                      double hi)
{
  NodalField center = NodalField::Constant(n, 0.5 * (lo + hi));
  double half = 0.5 * (hi - lo);
  const int pts = 11;
  long total = 1;
  for (int i = 0; i < n; i++)
  {
    total *= pts;
  }
  while (half > 1e-6)
  {
    NodalField best = center;
    double fbest = f(center);
    for (long k = 0; k < total; k++)
    {
      long r = k;
      NodalField s(n);
      for (int i = 0; i < n; i++)
      {
        const int j = static_cast<int>(r % pts);
        r /= pts;
        s[i] = std::clamp(center[i] - half + 2.0 * half * j / (pts - 1), lo, hi);
      }
      const double fs = f(s);
      if (fs < fbest)
      {
        fbest = fs;
        best = s;
      }
    }
    center = best;
    half *= 0.4;
  }
  return center;
}

// 4. Inner ADMM residual, objective decrease and tiny-mesh oracle.
Outcome InnerAdmm()
{
  // Coarse Example 1: sigma is the blocky truth, y the misfit gradient there.
  const Example &ex = GetExample(1);
  EddyProblem problem(ex.space, ex.preset.physics, ex.preset.source, ex.noisy);
  const CellGradient G = cell_gradient_operator(*ex.space);
  const NodalField sigma = interpolate_truth(*ex.space, ex.preset);
  const NodalField y = evaluate_misfit(problem, sigma).grad;
  const OuterConfig &outer = ex.preset.outer;
  InnerAdmmState inner;
  const SSubproblemResult r =
      s_subproblem(G, sigma, y, NodalField::Zero(sigma.size()), inner, outer.inner, outer.alpha,
                   outer.beta, outer.truncation.At(1));
  const double grad_sigma = G.Norm(G.Apply(sigma));
  const bool coarse_ok = outer.inner.iterations == 40 &&
                         r.primal_residual <= 1e-6 * (1.0 + grad_sigma) &&
                         r.objective_end <= r.objective_start;

  // Tiny mesh with 4 interior DOFs.
  const auto tiny = test::SmallSpace(3, 4);
  const CellGradient Gt = cell_gradient_operator(*tiny);
  NodalField ts(4), ty(4);
  ts << 1.0, 2.0, 0.5, 1.5;
  ty << 0.02, -0.03, 0.01, 0.0;
  const double alpha = 0.05, beta = 1.0;
  const BoxBounds bounds{0.0, 3.0};
  auto f = [&](const NodalField &s) { return TinyObjective(*tiny, ts, ty, s, alpha, beta); };
  const NodalField oracle = GridSearch(f, 4, bounds.lower, bounds.upper);
  InnerAdmmState tiny_inner;
  InnerAdmmConfig cfg;
  cfg.iterations = 400;
  const SSubproblemResult rt =
      s_subproblem(Gt, ts, ty, NodalField::Zero(4), tiny_inner, cfg, alpha, beta, bounds);
  const double tiny_err = (rt.s - oracle).cwiseAbs().maxCoeff();

  const bool pass = coarse_ok && tiny->NumConductorDofs() <= 4 && tiny_err <= 1e-3;
  return {pass, fmt::format("coarse: residual {:.2e} (bound {:.2e}), objective {:.6g} -> "
                            "{:.6g}; tiny ({} DOFs): max |s - oracle| {:.2e}",
                            r.primal_residual, 1e-6 * (1.0 + grad_sigma), r.objective_start,
                            r.objective_end, tiny->NumConductorDofs(), tiny_err)};
}

struct LagrangianViolation
{
  int k;
};

// 5. Monotone Lagrangian for some beta on the doubling ladder.
Outcome LagrangianDecrease()
{
  const auto t0 = Clock::now();
  const Example &ex = GetExample(1);
  EddyProblem problem(ex.space, ex.preset.physics, ex.preset.source, ex.noisy);
  const InversionContext ctx(problem);
  double found = 0.0;
  int trials = 0;
  for (int j = 0; j <= 20 && found == 0.0; j++)
  {
    OuterConfig cfg = ex.preset.outer;
    cfg.beta = 2e-3 * std::pow(2.0, j);
    cfg.outer_iterations = 20;
    RunOptions opts;
    opts.record_wall_time = false;
    opts.on_iteration = [](const AdmmState &s)
    {
      const auto &h = s.history;
      const std::size_t n = h.size();
      if (h.back().L < -1e-10 || (n >= 2 && h[n - 1].L > h[n - 2].L + 1e-10))
      {
        throw LagrangianViolation{s.k};
      }
    };
    trials++;
    try
    {
      const AdmmState st = run_modified_admm(ctx, cfg, AdmmState::Initial(*ex.space), opts);
      found = cfg.beta;
      Note(fmt::format("beta {:g}: L {:.6g} -> {:.6g} non-increasing over 20 iterations",
                       cfg.beta, st.history.front().L, st.history.back().L));
    }
    catch (const LagrangianViolation &v)
    {
      Note(fmt::format("beta {:g}: L increases at iteration {}", cfg.beta, v.k));
    }
  }
  const double secs = Seconds(t0) + ex.data_seconds;
  const bool pass = found > 0.0 && secs <= 900.0;
  return {pass, found > 0.0
                    ? fmt::format("beta = {:g} after {} trials, {:.0f} s", found, trials, secs)
                    : fmt::format("no beta up to {:g} gives a monotone Lagrangian, {:.0f} s",
                                  2e-3 * std::pow(2.0, 20), secs)};
}

// 6. Multiplier identity and decay of the constraint residual.
Outcome AdmmResiduals()
{
  const Example &ex = GetExample(1);
  const Run &run = GetRun(1, true);
  const auto &h = run.state.history;
  double multiplier = 0.0;
  for (std::size_t i = 1; i < h.size(); i++)
  {
    multiplier = std::max(multiplier, h[i].multiplier_residual);
  }
  // Recomputed from scratch at the final iterate.
  EddyProblem problem(ex.space, ex.preset.physics, ex.preset.source, ex.noisy);
  const double recomputed = (run.state.y - evaluate_misfit(problem, run.state.sigma).grad).norm();

  const double r1 = h.at(1).s_sigma_l2, r50 = h.at(50).s_sigma_l2;
  double r_max = 0.0;
  int k_max = 0;
  for (std::size_t i = 1; i < h.size(); i++)
  {
    if (h[i].s_sigma_l2 > r_max)
    {
      r_max = h[i].s_sigma_l2;
      k_max = h[i].k;
    }
  }
  Note(fmt::format("||s - sigma|| at k = 1, 2, 10, 50: {:.3e}, {:.3e}, {:.3e}, {:.3e}; "
                   "peak {:.3e} at k = {}",
                   r1, h.at(2).s_sigma_l2, h.at(10).s_sigma_l2, r50, r_max, k_max));
  const bool pass = ex.preset.outer.multiplier_mode == MultiplierMode::Gradient &&
                    multiplier == 0.0 && recomputed == 0.0 && r50 <= 0.1 * r1;
  return {pass, fmt::format("max ||y - G'(sigma)|| {:g} (recomputed {:g}); ||s - sigma|| "
                            "{:.3e} at k=1, {:.3e} at k=50, ratio {:.3g} (bound 0.1)",
                            multiplier, recomputed, r1, r50, r50 / r1)};
}

// 7. Reconstruction error and contrast for Examples 1-3 (noisy data).
Outcome Reconstruction()
{
  bool pass = true;
  std::string summary;
  for (int n = 1; n <= 3; n++)
  {
    const Example &ex = GetExample(n);
    const Run &run = GetRun(n, true);
    const auto &h = run.state.history;
    const double e0 = h.front().sigma_error, e1 = h.back().sigma_error;
    const double in = run.regions.InsideMean(), out = run.regions.OutsideMean();
    const bool ok = ex.space->GetMesh().NumEdges() <= 50000 && h.back().k == 50 &&
                    e1 <= 0.7 * e0 && in >= 2.0 * out && run.seconds + ex.data_seconds <= 3600.0;
    pass = pass && ok;
    summary += fmt::format("{}ex{}: error ratio {:.3f}, mean in/out {:.3g}/{:.3g}",
                           n > 1 ? "; " : "", n, e1 / e0, in, out);
  }
  return {pass, summary + " (bounds 0.7 and 2)"};
}

// 8. Noisy against noise-free final error.
Outcome NoiseRobustness()
{
  bool pass = true;
  std::string summary;
  for (int n = 1; n <= 3; n++)
  {
    const double noisy = GetRun(n, true).state.history.back().sigma_error;
    const double clean = GetRun(n, false).state.history.back().sigma_error;
    pass = pass && noisy <= 2.0 * clean;
    summary += fmt::format("{}ex{}: {:.4f} noisy vs {:.4f} noise-free", n > 1 ? "; " : "", n,
                           noisy, clean);
  }
  return {pass, summary + " (bound factor 2)"};
}

// 9. Inverse-inequality scalings from sampled sup-ratios over refinement levels.
Outcome InverseInequalities()
{
  const DomainSpec base = test::SmallDomain(4, 4);
  std::vector<double> log_h, log_grad, log_inf;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(-1.0, 1.0), uw(1.0, 3.0);
  // The unrefined mesh has 9 interior DOFs, too few to be in the asymptotic range.
  Mesh mesh = build_box_mesh(base);
  for (int level = 1; level <= 3; level++)
  {
    mesh = uniform_refine(mesh);
    const auto space = std::make_shared<const FeSpace>(std::make_shared<const Mesh>(mesh));
    const CellGradient G = cell_gradient_operator(*space);
    const RealSparseMatrix M = nodal_mass_matrix(*space);
    const int n = space->NumConductorDofs();
    const double h = space->GetMesh().h;
    std::uniform_int_distribution<int> pick(0, n - 1);
    double grad_ratio = 0.0, inf_ratio = 0.0;
    for (int f = 0; f < 100; f++)
    {
      NodalField v(n);
      if (f < 50)
      {
        // White noise.
        for (int i = 0; i < n; i++)
        {
          v[i] = u(rng);
        }
      }
      else
      {
        // Noise under a Gaussian window of width 1-3 h around a random DOF.
        const Vec3 c = space->GetMesh().vertices[space->ConductorVertices()[pick(rng)]];
        const double width = uw(rng) * h;
        for (int i = 0; i < n; i++)
        {
          const Vec3 &x = space->GetMesh().vertices[space->ConductorVertices()[i]];
          v[i] = u(rng) * std::exp(-(x - c).squaredNorm() / (width * width));
        }
      }
      const double l2 = std::sqrt(v.dot(M * v));
      grad_ratio = std::max(grad_ratio, G.Norm(G.Apply(v)) / l2);
      inf_ratio = std::max(inf_ratio, v.cwiseAbs().maxCoeff() / l2);
    }
    Note(fmt::format("level {}: h {:.4f}, {} DOFs, max ||grad v||/||v|| {:.4g}, max "
                     "||v||_inf/||v|| {:.4g}",
                     level, h, n, grad_ratio, inf_ratio));
    log_h.push_back(std::log(h));
    log_grad.push_back(std::log(grad_ratio));
    log_inf.push_back(std::log(inf_ratio));
  }
  // Least-squares slope of log ratio against log h.
  auto slope = [&](const std::vector<double> &y)
  {
    const double mh = (log_h[0] + log_h[1] + log_h[2]) / 3.0;
    const double my = (y[0] + y[1] + y[2]) / 3.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; i++)
    {
      num += (log_h[i] - mh) * (y[i] - my);
      den += (log_h[i] - mh) * (log_h[i] - mh);
    }
    return num / den;
  };
  const double pg = slope(log_grad), pi = slope(log_inf);
  const bool pass = std::abs(pg + 1.0) <= 0.3 && std::abs(pi + 1.5) <= 0.4;
  return {pass, fmt::format("gradient ratio ~ h^{:.3f} (target -1.0 +- 0.3), sup ratio ~ "
                            "h^{:.3f} (target -1.5 +- 0.4)",
                            pg, pi)};
}

std::string ReadBytes(const std::filesystem::path &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 10. Two pipeline runs with the same configuration.
Outcome Determinism()
{
  const auto root = std::filesystem::temp_directory_path() / "eddytv_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::vector<std::filesystem::path> dirs = {root / "a", root / "b"};
  for (const auto &dir : dirs)
  {
    const std::string json = fmt::format(
        R"({{"version": 1, "preset": 1, "domain": {{"cells_per_axis": [6, 6, 11]}},
            "outer": {{"outer_iterations": 5}}, "data": {{"seed": 17}},
            "paths": {{"output_dir": "{}"}}, "log": {{"wall_time": false}}}})",
        dir.generic_string());
    const RunConfig cfg = parse_run_config(json);
    std::ostringstream sink;
    cmd_mesh(cfg, sink);
    cmd_synth(cfg, sink);
    cmd_invert(cfg, sink);
  }
  bool pass = true;
  std::string summary;
  for (const char *name : {"log.csv", "result.vtk", "trace.txt", "mesh.txt"})
  {
    const std::string a = ReadBytes(dirs[0] / name), b = ReadBytes(dirs[1] / name);
    const bool same = !a.empty() && a == b;
    pass = pass && same;
    summary += fmt::format("{}{} {} ({} bytes)", summary.empty() ? "" : ", ", name,
                           same ? "identical" : "DIFFERENT", a.size());
  }
  std::filesystem::remove_all(root);
  return {pass, summary};
}

}  // namespace

int main(int argc, char **argv)
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-adjoint consistency", GradientConsistency},
      {"saddle-system structure", SaddleStructure},
      {"shrinkage oracle", ShrinkOracleCheck},
      {"inner ADMM", InnerAdmm},
      {"Lagrangian decrease regime", LagrangianDecrease},
      {"ADMM residuals", AdmmResiduals},
      {"reconstruction quality", Reconstruction},
      {"noise robustness", NoiseRobustness},
      {"inverse-inequality slopes", InverseInequalities},
      {"determinism", Determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; i++)
  {
    selected.insert(std::stoi(argv[i]));
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); i++)
  {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id))
    {
      continue;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try
    {
      o = criteria[i].second();
    }
    catch (const std::exception &e)
    {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failures += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {:2d} {}: {} [{:.1f} s]", o.pass ? "PASS" : "FAIL", id,
                             criteria[i].first, o.summary, Seconds(t0))
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <doctest.h>
#include "eddytv/inversion.hpp"
#include "test_common.hpp"

using namespace eddytv;

namespace
{

// Inverse-crime data from a blocky truth on a small mesh.
struct Fixture
{
  std::shared_ptr<const FeSpace> space = test::SmallSpace(4, 4);
  NodalField truth;
  std::unique_ptr<EddyProblem> problem;
  std::unique_ptr<InversionContext> ctx;

  explicit Fixture(bool zero_truth = false)
  {
    truth = NodalField::Zero(space->NumConductorDofs());
    if (!zero_truth)
    {
      for (int i = 0; i < truth.size(); i++)
      {
        const Vec3 &p = space->GetMesh().vertices[space->ConductorVertices()[i]];
        truth[i] = (std::abs(p.x()) < 0.6 && std::abs(p.y()) < 0.6) ? 5.0 : 0.0;
      }
    }
    problem = std::make_unique<EddyProblem>(space, PhysicalParams{}, test::SmallSource());
    problem->SetObserved(evaluate_trace(*space, solve_state(*problem, truth).E));
    ctx = std::make_unique<InversionContext>(*problem);
  }
};

OuterConfig SmallConfig(int iterations)
{
  OuterConfig cfg;
  cfg.outer_iterations = iterations;
  return cfg;
}

std::string LogText(const AdmmState &st)
{
  std::ostringstream os;
  write_log_header(os);
  for (const auto &r : st.history)
  {
    write_log_row(os, r);
  }
  return os.str();
}

}  // namespace

TEST_CASE("truncation schedule")
{
  TruncationSchedule t;
  CHECK(t.At(1).lower == 0.0);
  CHECK(t.At(7).lower == 0.0);  // default cap 0
  CHECK(t.At(7).upper == 15.0);
  t.m_cap = std::numeric_limits<double>::infinity();
  CHECK(t.At(1).lower == 0.0);
  CHECK(t.At(3).lower == doctest::Approx(0.1));
  CHECK(t.At(21).lower == doctest::Approx(1.0));
  t.m_cap = 0.5;
  CHECK(t.At(21).lower == 0.5);
}

TEST_CASE("multiplier modes and configuration validation")
{
  CHECK(ParseMultiplierMode("gradient") == MultiplierMode::Gradient);
  CHECK(ParseMultiplierMode(ToString(MultiplierMode::Classical)) == MultiplierMode::Classical);
  CHECK_THROWS_AS(ParseMultiplierMode("dual"), ConfigError);
  OuterConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.Validate(), ConfigError);
  cfg = OuterConfig{};
  cfg.nlcg_iterations = 0;
  CHECK_THROWS_AS(cfg.Validate(), ConfigError);
}

TEST_CASE("zero data keeps sigma at zero")
{
  Fixture fx(true);
  const AdmmState st = run_modified_admm(*fx.ctx, SmallConfig(3), AdmmState::Initial(*fx.space));
  CHECK(st.k == 3);
  CHECK(fx.ctx->L2Norm(st.sigma) <= 1e-8);
  CHECK(st.history.size() == 4);
}

TEST_CASE("a stationary point is left unchanged by the sigma step")
{
  Fixture fx;
  AdmmState st = AdmmState::Initial(*fx.space);
  st.sigma = fx.truth;
  st.s = fx.truth;
  const OuterConfig cfg = SmallConfig(1);
  const SigmaStepResult r = sigma_subproblem(*fx.ctx, st, cfg, cfg.truncation.At(1));
  CHECK((r.sigma - fx.truth).norm() <= 1e-12 * fx.truth.norm());
}

TEST_CASE("run invariants: feasibility, multiplier and NLCG monotonicity")
{
  Fixture fx;
  OuterConfig cfg = SmallConfig(6);
  std::vector<double> max_nlcg_increase;
  RunOptions opts;
  opts.on_iteration = [&](const AdmmState &s)
  {
    const IterationRecord &r = s.history.back();
    double inc = 0.0;
    for (std::size_t i = 1; i < r.nlcg_objective.size(); i++)
    {
      inc = std::max(inc, r.nlcg_objective[i] - r.nlcg_objective[i - 1]);
    }
    max_nlcg_increase.push_back(inc);
    const BoxBounds b = cfg.truncation.At(std::max(s.k, 1));
    CHECK(s.sigma.minCoeff() >= b.lower);
    CHECK(s.sigma.maxCoeff() <= b.upper);
    CHECK(s.s.minCoeff() >= b.lower);
    CHECK(s.s.maxCoeff() <= b.upper);
    if (s.k > 0)
    {
      CHECK(r.multiplier_residual == 0.0);
    }
  };
  const AdmmState st = run_modified_admm(*fx.ctx, cfg, AdmmState::Initial(*fx.space), opts);
  CHECK(st.k == 6);
  for (double inc : max_nlcg_increase)
  {
    CHECK(inc <= 0.0);
  }

  // y equals the misfit gradient recomputed from scratch.
  const MisfitEvaluation ev = evaluate_misfit(*fx.problem, st.sigma);
  CHECK((st.y - ev.grad).norm() <= 1e-14 * std::max(1.0, ev.grad.norm()) + 1e-300);
  CHECK(st.G == doctest::Approx(ev.value).epsilon(1e-14));

  // The misfit decreases from the initial guess.
  CHECK(st.history.back().G < st.history.front().G);
}

TEST_CASE("classical multiplier mode accumulates the constraint residual")
{
  Fixture fx;
  OuterConfig cfg = SmallConfig(2);
  cfg.multiplier_mode = MultiplierMode::Classical;
  AdmmState st = run_modified_admm(*fx.ctx, cfg, AdmmState::Initial(*fx.space));
  const NodalField y2 = st.y;
  cfg.outer_iterations = 3;
  st = run_modified_admm(*fx.ctx, cfg, std::move(st));
  const RealSparseMatrix K = fx.ctx->grad.Stiffness();
  const NodalField ref = y2 + cfg.beta * (K * (st.s - st.sigma));
  CHECK((st.y - ref).norm() <= 1e-12 * std::max(1.0, ref.norm()));
}

TEST_CASE("larger beta pulls sigma toward s")
{
  Fixture fx;
  std::mt19937_64 rng(2);
  double previous = 1e300;
  for (double beta : {1e-3, 1e-2, 1e-1, 1.0})
  {
    AdmmState st = AdmmState::Initial(*fx.space);
    rng.seed(2);
    st.s = test::RandomField(*fx.space, rng, 0.0, 5.0);
    OuterConfig cfg = SmallConfig(1);
    cfg.beta = beta;
    cfg.nlcg_iterations = 10;
    const SigmaStepResult r = sigma_subproblem(*fx.ctx, st, cfg, cfg.truncation.At(1));
    const double gap = fx.ctx->grad.Norm(fx.ctx->grad.Apply(r.sigma - st.s));
    CHECK(gap < previous);
    previous = gap;
  }
}

TEST_CASE("with a large beta the Lagrangian decreases")
{
  Fixture fx;
  OuterConfig cfg = SmallConfig(10);
  cfg.beta = 100 * 2e-3;
  const AdmmState st = run_modified_admm(*fx.ctx, cfg, AdmmState::Initial(*fx.space));
  for (std::size_t i = 1; i < st.history.size(); i++)
  {
    CHECK(st.history[i].L <= st.history[i - 1].L + 1e-10);
    CHECK(st.history[i].L >= -1e-10);
  }
}

TEST_CASE("checkpoint round trip and resumed runs are identical")
{
  Fixture fx;
  const OuterConfig full = SmallConfig(4);
  RunOptions opts;
  opts.record_wall_time = false;
  opts.error = [&](const NodalField &s) { return fx.ctx->L2Norm(s - fx.truth); };
  const AdmmState straight = run_modified_admm(*fx.ctx, full, AdmmState::Initial(*fx.space), opts);

  const auto dir = std::filesystem::temp_directory_path() / "eddytv_test_inversion";
  std::filesystem::create_directories(dir);
  const OuterConfig half = SmallConfig(2);
  const AdmmState first = run_modified_admm(*fx.ctx, half, AdmmState::Initial(*fx.space), opts);
  write_checkpoint(first, dir / "ck.txt");
  AdmmState restored = read_checkpoint(dir / "ck.txt");
  CHECK(restored.k == 2);
  CHECK(restored.sigma == first.sigma);
  CHECK(restored.s == first.s);
  CHECK(restored.y == first.y);
  CHECK(restored.inner.d == first.inner.d);
  CHECK(restored.inner.u == first.inner.u);
  CHECK(restored.grad == first.grad);
  CHECK(restored.history.size() == first.history.size());
  CHECK(LogText(restored) == LogText(first));

  const AdmmState resumed = run_modified_admm(*fx.ctx, full, std::move(restored), opts);
  CHECK(LogText(resumed) == LogText(straight));
  CHECK(resumed.sigma == straight.sigma);
  std::filesystem::remove_all(dir);

  std::ofstream(dir.string() + "_bad.txt") << "eddytv-checkpoint v1\nk x\n";
  CHECK_THROWS_AS(read_checkpoint(dir.string() + "_bad.txt"), DataError);
  std::filesystem::remove(dir.string() + "_bad.txt");
}

TEST_CASE("CSV log layout")
{
  std::ostringstream os;
  write_log_header(os);
  CHECK(os.str() == "k,L,G,TV,s_minus_sigma_l2,grad_s_minus_grad_sigma_l2,sigma_err,wall_time_s\n");
  IterationRecord r;
  r.k = 3;
  r.L = 0.1;
  r.G = 2.5;
  r.sigma_error = 1.0 / 3.0;
  std::ostringstream row;
  write_log_row(row, r);
  std::string line = row.str();
  CHECK(std::count(line.begin(), line.end(), ',') == 7);
  CHECK(line.rfind("3,0.1,2.5,", 0) == 0);
  CHECK(line.find("0.3333333333333333") != std::string::npos);
}

TEST_CASE("doubling beta reduces the gradient-gap to step ratio")
{
  // One sigma-step solved to stationarity from sigma^0 with y^0 = G'(sigma^0) and s^0 away
  // from sigma^0. Then beta K (s^0 - sigma^1) = G'(sigma^1) - G'(sigma^0), so
  // ||grad s^0 - grad sigma^1|| / ||sigma^1 - sigma^0|| decays like 1 / beta.
  Fixture fx;
  std::mt19937_64 rng(12);
  const NodalField sigma0 = test::RandomField(*fx.space, rng, 1.0, 3.0);
  const NodalField s0 = sigma0 + test::RandomField(*fx.space, rng, -0.5, 0.5);
  const MisfitEvaluation ev = evaluate_misfit(*fx.problem, sigma0);
  double previous = 1e300;
  for (double beta : {0.2, 0.4, 0.8, 1.6})
  {
    AdmmState st = AdmmState::Initial(*fx.space);
    st.sigma = sigma0;
    st.s = s0;
    st.y = ev.grad;
    st.G = ev.value;
    st.grad = ev.grad;
    st.has_gradient = true;
    OuterConfig cfg = SmallConfig(1);
    cfg.beta = beta;
    cfg.nlcg_iterations = 200;
    const SigmaStepResult r = sigma_subproblem(*fx.ctx, st, cfg, cfg.truncation.At(1));
    const double gap = fx.ctx->grad.Norm(fx.ctx->grad.Apply(s0 - r.sigma));
    const double ratio = gap / fx.ctx->L2Norm(r.sigma - sigma0);
    MESSAGE("beta " << beta << ": ratio " << ratio);
    CHECK(ratio < 0.75 * previous);
    previous = ratio;
  }
}

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <Eigen/Geometry>
#include <fmt/format.h>

namespace eddytv
{

namespace
{

constexpr double kMembershipTol = 1e-12;

Box MakeBox(double x0, double x1, double y0, double y1, double z0, double z1)
{
  // Intervals are normalized to [min, max].
  return Box{{std::min(x0, x1), std::max(x0, x1)},
             {std::min(y0, y1), std::max(y0, y1)},
             {std::min(z0, z1), std::max(z0, z1)}};
}

}  // namespace

double ExperimentPreset::TruthAt(const Vec3 &p) const
{
  bool found = false;
  double v = 0.0;
  for (const auto &inc : inclusions)
  {
    if (inc.box.contains(p, kMembershipTol))
    {
      v = found ? std::max(v, inc.value) : inc.value;
      found = true;
    }
  }
  return v;
}

void ExperimentPreset::Validate() const
{
  domain.Validate();
  for (std::size_t i = 0; i < inclusions.size(); i++)
  {
    const Box &b = inclusions[i].box;
    const bool inside = b.x.lo >= domain.x_range.lo && b.x.hi <= domain.x_range.hi &&
                        b.y.lo >= domain.y_range.lo && b.y.hi <= domain.y_range.hi &&
                        b.z.lo >= domain.z_range.lo && b.z.hi <= domain.z_interface;
    if (!inside || !(b.volume() > 0.0))
    {
      throw ConfigError(fmt::format("inclusions[{}] is empty or not contained in OmegaC", i));
    }
  }
  if (noise < 0.0)
  {
    throw ConfigError("noise must be non-negative");
  }
  outer.Validate();
}

SourceSpec default_dipole_grid()
{
  SourceSpec src;
  for (int i = 1; i <= 36; i++)
  {
    for (int j = 1; j <= 36; j++)
    {
      src.positions.emplace_back(-2.0 + 0.1 * i, -2.0 + 0.1 * j, 0.04);
    }
  }
  src.direction = Vec3::UnitX();
  return src;
}

ExperimentPreset preset_example(int n)
{
  ExperimentPreset p;
  p.source = default_dipole_grid();
  p.physics.sigma0 = 1.0;
  p.outer.alpha = 1e-7;
  p.outer.beta = 2e-3;
  p.outer.truncation.upper = 15.0;
  p.noise = 0.005;
  switch (n)
  {
    case 1:
      p.name = "example1";
      p.inclusions = {{MakeBox(-0.3, 0.3, -0.3, 0.3, -1.0, -0.4), 5.0, 1}};
      break;
    case 2:
      p.name = "example2";
      p.inclusions = {{MakeBox(-0.1, -0.4, -1.0, -0.4, -0.7, -0.3), 10.0, 1},
                      {MakeBox(0.4, 1.0, 0.4, 1.0, -0.7, -0.3), 6.0, 2}};
      break;
    case 3:
      // The first leg's z-extent is taken as [-1.0, -0.4], matching the second leg.
      p.name = "example3";
      p.inclusions = {{MakeBox(-1.5, -1.0, -1.5, 1.5, -1.0, -0.4), 10.0, 1},
                      {MakeBox(-1.0, 1.5, -1.5, -1.0, -1.0, -0.4), 10.0, 1}};
      break;
    default:
      throw ConfigError(fmt::format("preset must be 1, 2 or 3, got {}", n));
  }
  return p;
}

void tag_inclusions(Mesh &mesh, const ExperimentPreset &preset)
{
  for (int t = 0; t < mesh.NumTets(); t++)
  {
    mesh.subregion_tags[t] = 0;
    const Vec3 c = mesh.TetCentroid(t);
    for (const auto &inc : preset.inclusions)
    {
      if (inc.box.contains(c))
      {
        mesh.subregion_tags[t] = inc.label;
        break;
      }
    }
  }
}

NodalField interpolate_truth(const FeSpace &space, const ExperimentPreset &preset)
{
  NodalField v(space.NumConductorDofs());
  for (int i = 0; i < v.size(); i++)
  {
    v[i] = preset.TruthAt(space.GetMesh().vertices[space.ConductorVertices()[i]]);
  }
  return v;
}

BoundaryTrace generate_synthetic_data(const ExperimentPreset &preset, const FeSpace &coarse,
                                      int refine_extra, bool allow_inverse_crime)
{
  if (refine_extra < 0 || (refine_extra == 0 && !allow_inverse_crime))
  {
    throw ConfigError(
        fmt::format("refine_extra must be at least 1 for synthetic data, got {}", refine_extra));
  }
  std::shared_ptr<const FeSpace> fine_space;
  if (refine_extra == 0)
  {
    fine_space = std::make_shared<const FeSpace>(coarse.MeshPtr());
  }
  else
  {
    Mesh fine = uniform_refine(coarse.GetMesh());
    for (int r = 1; r < refine_extra; r++)
    {
      fine = uniform_refine(fine);
    }
    tag_inclusions(fine, preset);
    fine_space = std::make_shared<const FeSpace>(std::make_shared<const Mesh>(std::move(fine)));
  }
  const EddyProblem problem(fine_space, preset.physics, preset.source);
  const StateSolution state = solve_state(problem, interpolate_truth(*fine_space, preset));

  const PointLocator locator(fine_space->GetMesh());
  BoundaryTrace trace;
  trace.values.resize(coarse.GammaFaces().size());
  for (std::size_t f = 0; f < coarse.GammaFaces().size(); f++)
  {
    const GammaFace &gf = coarse.GammaFaces()[f];
    for (int q = 0; q < kTracePoints; q++)
    {
      const int t = locator.Locate(gf.points[q]);
      if (t < 0)
      {
        throw ConfigError("Gamma quadrature point outside the data mesh");
      }
      const Eigen::Vector3cd E = fine_space->EvaluateEdgeField(state.E, t, gf.points[q]);
      const Eigen::Vector3cd n = gf.normal.cast<Complex>();
      trace.values[f][q] = E - n.dot(E) * n;
    }
  }
  return trace;
}

BoundaryTrace add_noise(const BoundaryTrace &trace, double nu, std::uint64_t seed)
{
  if (nu < 0.0)
  {
    throw ConfigError("noise level must be non-negative");
  }
  BoundaryTrace noisy = trace;
  if (nu == 0.0)
  {
    return noisy;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xi(-1.0, 1.0);
  for (auto &face : noisy.values)
  {
    for (auto &v : face)
    {
      v *= 1.0 + nu * xi(rng);
    }
  }
  return noisy;
}

namespace
{

struct RegionAccumulator
{
  const ExperimentPreset &preset;
  int max_depth;
  RegionIntegrals sum;

  void Add(const std::array<Vec3, 4> &x, const std::array<double, 4> &v, int depth)
  {
    Vec3 lo = x[0], hi = x[0];
    for (int a = 1; a < 4; a++)
    {
      lo = lo.cwiseMin(x[a]);
      hi = hi.cwiseMax(x[a]);
    }
    bool straddles = false, inside = false;
    double value = 0.0;
    for (const auto &inc : preset.inclusions)
    {
      int count = 0;
      for (int a = 0; a < 4; a++)
      {
        count += inc.box.contains(x[a], kMembershipTol) ? 1 : 0;
      }
      if (count == 4)
      {
        value = inside ? std::max(value, inc.value) : inc.value;
        inside = true;
        continue;
      }
      const Box &b = inc.box;
      const bool disjoint =
          hi.x() <= b.x.lo + kMembershipTol || lo.x() >= b.x.hi - kMembershipTol ||
          hi.y() <= b.y.lo + kMembershipTol || lo.y() >= b.y.hi - kMembershipTol ||
          hi.z() <= b.z.lo + kMembershipTol || lo.z() >= b.z.hi - kMembershipTol;
      straddles = straddles || !disjoint;
    }
    if (straddles && depth < max_depth)
    {
      std::array<Vec3, 10> px;
      std::array<double, 10> pv;
      for (int a = 0; a < 4; a++)
      {
        px[a] = x[a];
        pv[a] = v[a];
      }
      int k = 4;
      for (const auto &[i, j] : kTetEdges)
      {
        px[k] = 0.5 * (x[i] + x[j]);
        pv[k] = 0.5 * (v[i] + v[j]);
        k++;
      }
      for (const auto &c : kRedChildren)
      {
        Add({px[c[0]], px[c[1]], px[c[2]], px[c[3]]}, {pv[c[0]], pv[c[1]], pv[c[2]], pv[c[3]]},
            depth + 1);
      }
      return;
    }
    if (straddles)
    {
      const Vec3 centroid = 0.25 * (x[0] + x[1] + x[2] + x[3]);
      inside = false;
      for (const auto &inc : preset.inclusions)
      {
        inside = inside || inc.box.contains(centroid, kMembershipTol);
      }
      value = preset.TruthAt(centroid);
    }
    const double vol = std::abs((x[1] - x[0]).cross(x[2] - x[0]).dot(x[3] - x[0])) / 6.0;
    double sq = 0.0;
    for (int a = 0; a < 4; a++)
    {
      for (int b = 0; b < 4; b++)
      {
        sq += (a == b ? 2.0 : 1.0) * (v[a] - value) * (v[b] - value);
      }
    }
    sum.error_sq += vol * sq / 20.0;
    const double integral = 0.25 * vol * (v[0] + v[1] + v[2] + v[3]);
    if (inside)
    {
      sum.inside += integral;
      sum.inside_volume += vol;
    }
    else
    {
      sum.outside += integral;
      sum.outside_volume += vol;
    }
  }
};

}  // namespace

RegionIntegrals region_integrals(const FeSpace &space, const NodalField &sigma,
                                 const ExperimentPreset &preset, int max_depth)
{
  const Mesh &m = space.GetMesh();
  RegionAccumulator acc{preset, max_depth, {}};
  for (int t : space.ConductorTets())
  {
    std::array<Vec3, 4> x;
    std::array<double, 4> v;
    const Eigen::Vector4d local = space.LocalNodal(sigma, t);
    for (int a = 0; a < 4; a++)
    {
      x[a] = m.vertices[m.tets[t][a]];
      v[a] = local[a];
    }
    acc.Add(x, v, 0);
  }
  return acc.sum;
}

double sigma_l2_error(const FeSpace &space, const NodalField &sigma,
                      const ExperimentPreset &preset, int max_depth)
{
  return std::sqrt(region_integrals(space, sigma, preset, max_depth).error_sq);
}

void write_trace(const TraceFile &file, const std::filesystem::path &path)
{
  std::ostringstream os;
  os << "eddytv-trace v1\n";
  os << "mesh_hash " << file.mesh_hash << "\n";
  os << "rule " << file.trace.rule << "\n";
  os << fmt::format("noise {}\nseed {}\nfaces {}\n", file.noise, file.seed,
                    file.trace.NumFaces());
  for (const auto &face : file.trace.values)
  {
    for (const auto &v : face)
    {
      os << fmt::format("{} {} {} {} {} {}\n", v[0].real(), v[0].imag(), v[1].real(),
                        v[1].imag(), v[2].real(), v[2].imag());
    }
  }
  std::ofstream out(path);
  if (!out)
  {
    throw std::runtime_error("cannot write trace file " + path.string());
  }
  out << os.str();
}

TraceFile read_trace(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw DataError("cannot read trace file " + path.string());
  }
  int lineno = 0;
  std::string line;
  auto next = [&]() -> std::istringstream
  {
    if (!std::getline(in, line))
    {
      throw DataError(fmt::format("{}: unexpected end of file after line {}", path.string(),
                                  lineno));
    }
    lineno++;
    return std::istringstream(line);
  };
  auto fail = [&](const std::string &what)
  { return DataError(fmt::format("{}:{}: {}", path.string(), lineno, what)); };
  auto keyed = [&](const std::string &key)
  {
    auto ls = next();
    std::string k, v, extra;
    if (!(ls >> k >> v) || k != key || (ls >> extra))
    {
      throw fail("expected '" + key + " <value>'");
    }
    return v;
  };

  if (next().str() != "eddytv-trace v1")
  {
    throw fail("not an eddytv-trace v1 file");
  }
  TraceFile file;
  file.mesh_hash = keyed("mesh_hash");
  file.trace.rule = keyed("rule");
  if (file.trace.rule != kTraceRule)
  {
    throw fail("unsupported quadrature rule '" + file.trace.rule + "'");
  }
  char *end = nullptr;
  const std::string noise = keyed("noise");
  file.noise = std::strtod(noise.c_str(), &end);
  if (end != noise.c_str() + noise.size())
  {
    throw fail("malformed noise level");
  }
  const std::string seed = keyed("seed");
  file.seed = std::strtoull(seed.c_str(), &end, 10);
  if (end != seed.c_str() + seed.size())
  {
    throw fail("malformed seed");
  }
  const std::string faces = keyed("faces");
  const long nf = std::strtol(faces.c_str(), &end, 10);
  if (end != faces.c_str() + faces.size() || nf < 0)
  {
    throw fail("malformed face count");
  }
  file.trace.values.resize(nf);
  for (auto &face : file.trace.values)
  {
    for (auto &v : face)
    {
      auto ls = next();
      double r[6];
      std::string token;
      for (double &x : r)
      {
        if (!(ls >> token))
        {
          throw fail("expected 6 numbers");
        }
        x = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size())
        {
          throw fail("malformed number '" + token + "'");
        }
      }
      if (ls >> token)
      {
        throw fail("trailing data");
      }
      v = Eigen::Vector3cd(Complex(r[0], r[1]), Complex(r[2], r[3]), Complex(r[4], r[5]));
    }
  }
  return file;
}

}  // namespace eddytv

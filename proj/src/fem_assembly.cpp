// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/fem_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <fmt/format.h>
#include <Eigen/Dense>

namespace eddytv
{

namespace
{

// int_T lambda_a lambda_b / |T| and int_T lambda_a lambda_b lambda_c / |T| on any tet.
double BaryMoment2(int a, int b)
{
  return a == b ? 1.0 / 10.0 : 1.0 / 20.0;
}

double BaryMoment3(int a, int b, int c)
{
  if (a == b && b == c)
  {
    return 1.0 / 20.0;
  }
  if (a == b || b == c || a == c)
  {
    return 1.0 / 60.0;
  }
  return 1.0 / 120.0;
}

// Whitney function of local edge le written as sum_a lambda_a coeff[le][a].
using WhitneyCoefficients = std::array<std::array<Vec3, 4>, 6>;

WhitneyCoefficients Coefficients(const TetGeometry &g, const std::array<double, 6> &sign)
{
  WhitneyCoefficients c;
  for (int le = 0; le < 6; le++)
  {
    const auto [i, j] = kTetEdges[le];
    for (auto &v : c[le])
    {
      v.setZero();
    }
    c[le][i] = sign[le] * g.grad[j];
    c[le][j] = -sign[le] * g.grad[i];
  }
  return c;
}

std::array<double, 6> Signs(const FeSpace &space, int t)
{
  std::array<double, 6> s;
  for (int le = 0; le < 6; le++)
  {
    s[le] = space.EdgeSign(t, le);
  }
  return s;
}

constexpr std::array<std::array<double, 3>, kTracePoints> kTriPoints = {
    {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
     {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
     {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}}};

Eigen::Vector3cd Tangential(const Eigen::Vector3cd &v, const Vec3 &n)
{
  return v - (n.cast<Complex>().dot(v)) * n.cast<Complex>();
}

Vec3 Tangential(const Vec3 &v, const Vec3 &n)
{
  return v - n.dot(v) * n;
}

// Unconjugated product sum_k a_k b_k.
Complex Dot(const Eigen::Vector3cd &a, const Eigen::Vector3cd &b)
{
  return a.cwiseProduct(b).sum();
}

}  // namespace

TetGeometry TetGeometry::FromVertices(const std::array<Vec3, 4> &x)
{
  Eigen::Matrix3d J;
  J.col(0) = x[1] - x[0];
  J.col(1) = x[2] - x[0];
  J.col(2) = x[3] - x[0];
  const Eigen::Matrix3d Jinv = J.inverse();
  TetGeometry g;
  g.grad[1] = Jinv.row(0).transpose();
  g.grad[2] = Jinv.row(1).transpose();
  g.grad[3] = Jinv.row(2).transpose();
  g.grad[0] = -(g.grad[1] + g.grad[2] + g.grad[3]);
  g.volume = std::abs(J.determinant()) / 6.0;
  return g;
}

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh))
{
  const Mesh &m = *mesh_;
  const Box &b = m.bounds;
  const double tol =
      1e-12 * (1.0 + std::max({b.x.length(), b.y.length(), b.z.length()}));
  const int nv = m.NumVertices();

  // Bit k set when the vertex lies on GammaD plane k (x-, x+, y-, y+, z-).
  std::vector<unsigned> planes(nv, 0u);
  for (int v = 0; v < nv; v++)
  {
    const Vec3 &p = m.vertices[v];
    planes[v] = (std::abs(p.x() - b.x.lo) <= tol ? 1u : 0u) |
                (std::abs(p.x() - b.x.hi) <= tol ? 2u : 0u) |
                (std::abs(p.y() - b.y.lo) <= tol ? 4u : 0u) |
                (std::abs(p.y() - b.y.hi) <= tol ? 8u : 0u) |
                (std::abs(p.z() - b.z.lo) <= tol ? 16u : 0u);
  }

  edge_dof_.assign(m.NumEdges(), -1);
  for (int e = 0; e < m.NumEdges(); e++)
  {
    if ((planes[m.edges[e][0]] & planes[m.edges[e][1]]) == 0u)
    {
      edge_dof_[e] = num_edge_dofs_++;
    }
  }

  u_dof_.assign(nv, -1);
  v_dof_.assign(nv, -1);
  for (int v = 0; v < nv; v++)
  {
    const Vec3 &p = m.vertices[v];
    if (planes[v] != 0u)
    {
      continue;
    }
    if (p.z() > m.z_interface + tol)
    {
      u_dof_[v] = num_u_dofs_++;
    }
    else if (p.z() < m.z_interface - tol)
    {
      v_dof_[v] = static_cast<int>(conductor_vertices_.size());
      conductor_vertices_.push_back(v);
    }
  }

  geometry_.resize(m.NumTets());
  for (int t = 0; t < m.NumTets(); t++)
  {
    std::array<Vec3, 4> x;
    for (int a = 0; a < 4; a++)
    {
      x[a] = m.vertices[m.tets[t][a]];
    }
    geometry_[t] = TetGeometry::FromVertices(x);
    if (m.cell_tags[t] == CellTag::OmegaC)
    {
      conductor_tets_.push_back(t);
    }
  }

  // Owning tet of each Gamma face.
  std::vector<std::pair<std::array<int, 3>, int>> faces;
  faces.reserve(4 * m.NumTets());
  for (int t = 0; t < m.NumTets(); t++)
  {
    for (int skip = 0; skip < 4; skip++)
    {
      std::array<int, 3> f;
      int k = 0;
      for (int a = 0; a < 4; a++)
      {
        if (a != skip)
        {
          f[k++] = m.tets[t][a];
        }
      }
      std::sort(f.begin(), f.end());
      faces.emplace_back(f, t);
    }
  }
  std::sort(faces.begin(), faces.end());
  for (const auto &bf : m.boundary_faces)
  {
    if (bf.tag != BoundaryTag::Gamma)
    {
      continue;
    }
    GammaFace gf;
    gf.v = bf.v;
    std::array<int, 3> key = bf.v;
    std::sort(key.begin(), key.end());
    auto it = std::lower_bound(faces.begin(), faces.end(), std::make_pair(key, -1));
    if (it == faces.end() || it->first != key)
    {
      throw std::runtime_error("Gamma face does not belong to any tet");
    }
    gf.tet = it->second;
    const Vec3 &p0 = m.vertices[gf.v[0]];
    const Vec3 &p1 = m.vertices[gf.v[1]];
    const Vec3 &p2 = m.vertices[gf.v[2]];
    const Vec3 n = (p1 - p0).cross(p2 - p0);
    gf.area = 0.5 * n.norm();
    gf.normal = n.normalized();
    if (gf.normal.z() < 0.0)
    {
      gf.normal = -gf.normal;
    }
    for (int q = 0; q < kTracePoints; q++)
    {
      gf.points[q] = kTriPoints[q][0] * p0 + kTriPoints[q][1] * p1 + kTriPoints[q][2] * p2;
    }
    gamma_faces_.push_back(gf);
  }
}

double FeSpace::EdgeSign(int t, int le) const
{
  const auto &tet = mesh_->tets[t];
  return tet[kTetEdges[le][0]] < tet[kTetEdges[le][1]] ? 1.0 : -1.0;
}

std::array<Vec3, 6> FeSpace::WhitneyValues(int t, const Eigen::Vector4d &lambda) const
{
  const auto &g = geometry_[t];
  std::array<Vec3, 6> w;
  for (int le = 0; le < 6; le++)
  {
    const auto [i, j] = kTetEdges[le];
    w[le] = EdgeSign(t, le) * (lambda[i] * g.grad[j] - lambda[j] * g.grad[i]);
  }
  return w;
}

std::array<Vec3, 6> FeSpace::WhitneyCurls(int t) const
{
  const auto &g = geometry_[t];
  std::array<Vec3, 6> c;
  for (int le = 0; le < 6; le++)
  {
    const auto [i, j] = kTetEdges[le];
    c[le] = 2.0 * EdgeSign(t, le) * g.grad[i].cross(g.grad[j]);
  }
  return c;
}

Eigen::Vector3cd FeSpace::EvaluateEdgeField(const EdgeField &E, int t, const Vec3 &x) const
{
  const auto w = WhitneyValues(t, PointLocator::Barycentric(*mesh_, t, x));
  Eigen::Vector3cd val = Eigen::Vector3cd::Zero();
  for (int le = 0; le < 6; le++)
  {
    const int dof = edge_dof_[mesh_->tet_edges[t][le]];
    if (dof >= 0)
    {
      val += E[dof] * w[le].cast<Complex>();
    }
  }
  return val;
}

Eigen::Vector4d FeSpace::LocalNodal(const NodalField &v, int t) const
{
  Eigen::Vector4d local;
  for (int a = 0; a < 4; a++)
  {
    const int dof = v_dof_[mesh_->tets[t][a]];
    local[a] = dof >= 0 ? v[dof] : 0.0;
  }
  return local;
}

ElementMatrix whitney_curl_curl(const TetGeometry &g, const std::array<double, 6> &sign)
{
  std::array<Vec3, 6> curl;
  for (int le = 0; le < 6; le++)
  {
    const auto [i, j] = kTetEdges[le];
    curl[le] = 2.0 * sign[le] * g.grad[i].cross(g.grad[j]);
  }
  ElementMatrix K;
  for (int e = 0; e < 6; e++)
  {
    for (int f = e; f < 6; f++)
    {
      K(e, f) = K(f, e) = g.volume * curl[e].dot(curl[f]);
    }
  }
  return K;
}

ElementMatrix whitney_mass(const TetGeometry &g, const std::array<double, 6> &sign,
                           const Eigen::Vector4d &nodal_weight, double constant_weight)
{
  const auto c = Coefficients(g, sign);
  // Weight of lambda_a lambda_b in the integrand.
  Eigen::Matrix4d moment;
  for (int a = 0; a < 4; a++)
  {
    for (int b = 0; b < 4; b++)
    {
      double m = constant_weight * BaryMoment2(a, b);
      for (int k = 0; k < 4; k++)
      {
        m += nodal_weight[k] * BaryMoment3(a, b, k);
      }
      moment(a, b) = g.volume * m;
    }
  }
  ElementMatrix M;
  for (int e = 0; e < 6; e++)
  {
    for (int f = e; f < 6; f++)
    {
      double s = 0.0;
      for (int a = 0; a < 4; a++)
      {
        for (int b = 0; b < 4; b++)
        {
          s += moment(a, b) * c[e][a].dot(c[f][b]);
        }
      }
      M(e, f) = M(f, e) = s;
    }
  }
  return M;
}

RealSparseMatrix assemble_divergence_coupling(const FeSpace &space, double epsilon)
{
  const Mesh &m = space.GetMesh();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t = 0; t < m.NumTets(); t++)
  {
    if (m.cell_tags[t] != CellTag::Omega0)
    {
      continue;
    }
    const auto &g = space.Geometry(t);
    const auto c = Coefficients(g, Signs(space, t));
    for (int le = 0; le < 6; le++)
    {
      const int dof = space.EdgeDof(m.tet_edges[t][le]);
      if (dof < 0)
      {
        continue;
      }
      // int phi_e = |T|/4 sum_a coeff[e][a], constant gradient of the hat function.
      const Vec3 mean = 0.25 * g.volume * (c[le][0] + c[le][1] + c[le][2] + c[le][3]);
      for (int a = 0; a < 4; a++)
      {
        const int u = space.MultiplierDof(m.tets[t][a]);
        if (u >= 0)
        {
          trip.emplace_back(dof, u, epsilon * mean.dot(g.grad[a]));
        }
      }
    }
  }
  RealSparseMatrix B(space.NumEdgeDofs(), space.NumMultiplierDofs());
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

ComplexSparseMatrix assemble_state_matrix(const FeSpace &space, const NodalField &sigma,
                                          const PhysicalParams &params)
{
  const Mesh &m = space.GetMesh();
  if (sigma.size() != space.NumConductorDofs())
  {
    throw DimensionError(fmt::format("sigma has {} entries, V_h has {}", sigma.size(),
                                     space.NumConductorDofs()));
  }
  if (params.sigma0 < params.positivity_floor)
  {
    throw std::domain_error("sigma0 must exceed the positivity floor");
  }
  for (int i = 0; i < sigma.size(); i++)
  {
    if (!(sigma[i] + params.sigma0 >= params.positivity_floor))
    {
      const Vec3 &p = m.vertices[space.ConductorVertices()[i]];
      throw std::domain_error(fmt::format(
          "sigma + sigma0 = {} below positivity floor at node {} (vertex {}, "
          "({}, {}, {}))",
          sigma[i] + params.sigma0, i, space.ConductorVertices()[i], p.x(), p.y(), p.z()));
    }
  }

  const int ne = space.NumEdgeDofs();
  const Complex i_omega(0.0, params.omega);
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(36 * m.NumTets());
  for (int t = 0; t < m.NumTets(); t++)
  {
    const auto &g = space.Geometry(t);
    const auto sign = Signs(space, t);
    Eigen::Matrix<Complex, 6, 6> A = (whitney_curl_curl(g, sign) / params.mu).cast<Complex>();
    if (m.cell_tags[t] == CellTag::OmegaC)
    {
      A -= i_omega * whitney_mass(g, sign, space.LocalNodal(sigma, t), params.sigma0)
                         .cast<Complex>();
    }
    for (int e = 0; e < 6; e++)
    {
      const int row = space.EdgeDof(m.tet_edges[t][e]);
      if (row < 0)
      {
        continue;
      }
      for (int f = 0; f < 6; f++)
      {
        const int col = space.EdgeDof(m.tet_edges[t][f]);
        if (col >= 0)
        {
          trip.emplace_back(row, col, A(e, f));
        }
      }
    }
  }
  const RealSparseMatrix B = assemble_divergence_coupling(space, params.epsilon);
  for (int r = 0; r < B.outerSize(); r++)
  {
    for (RealSparseMatrix::InnerIterator it(B, r); it; ++it)
    {
      trip.emplace_back(r, ne + static_cast<int>(it.col()), Complex(it.value(), 0.0));
      trip.emplace_back(ne + static_cast<int>(it.col()), r, Complex(it.value(), 0.0));
    }
  }
  const int n = space.NumSaddleDofs();
  ComplexSparseMatrix M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  finalize(M);
  return M;
}

RealSparseMatrix hcurl_gram_matrix(const FeSpace &space)
{
  const Mesh &m = space.GetMesh();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(36 * m.NumTets());
  for (int t = 0; t < m.NumTets(); t++)
  {
    const auto &g = space.Geometry(t);
    const auto sign = Signs(space, t);
    const ElementMatrix A =
        whitney_curl_curl(g, sign) + whitney_mass(g, sign, Eigen::Vector4d::Zero(), 1.0);
    for (int e = 0; e < 6; e++)
    {
      const int row = space.EdgeDof(m.tet_edges[t][e]);
      for (int f = 0; f < 6 && row >= 0; f++)
      {
        const int col = space.EdgeDof(m.tet_edges[t][f]);
        if (col >= 0)
        {
          trip.emplace_back(row, col, A(e, f));
        }
      }
    }
  }
  RealSparseMatrix G(space.NumEdgeDofs(), space.NumEdgeDofs());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

EdgeField assemble_dipole_load(const FeSpace &space, const SourceSpec &src, double omega)
{
  const Mesh &m = space.GetMesh();
  const PointLocator locator(m);
  EdgeField load = EdgeField::Zero(space.NumEdgeDofs());
  const Complex scale(0.0, omega * src.strength);
  for (const Vec3 &x : src.positions)
  {
    const int t = locator.Locate(x);
    if (t < 0)
    {
      throw std::domain_error(
          fmt::format("dipole at ({}, {}, {}) lies outside the mesh", x.x(), x.y(), x.z()));
    }
    const auto curl = space.WhitneyCurls(t);
    for (int le = 0; le < 6; le++)
    {
      const int dof = space.EdgeDof(m.tet_edges[t][le]);
      if (dof >= 0)
      {
        load[dof] += scale * src.direction.dot(curl[le]);
      }
    }
  }
  return load;
}

BoundaryTrace evaluate_trace(const FeSpace &space, const EdgeField &E)
{
  BoundaryTrace trace;
  trace.values.resize(space.GammaFaces().size());
  for (std::size_t f = 0; f < space.GammaFaces().size(); f++)
  {
    const auto &gf = space.GammaFaces()[f];
    for (int q = 0; q < kTracePoints; q++)
    {
      trace.values[f][q] =
          Tangential(space.EvaluateEdgeField(E, gf.tet, gf.points[q]), gf.normal);
    }
  }
  return trace;
}

namespace
{

void RequireCoverage(const FeSpace &space, const BoundaryTrace &trace)
{
  if (trace.values.size() != space.GammaFaces().size())
  {
    throw DataError(fmt::format("trace covers {} faces but Gamma has {}",
                                trace.values.size(), space.GammaFaces().size()));
  }
  if (trace.rule != kTraceRule)
  {
    throw DataError("unsupported trace quadrature rule '" + trace.rule + "'");
  }
}

}  // namespace

EdgeField assemble_adjoint_load(const FeSpace &space, const EdgeField &E,
                                const BoundaryTrace &observed)
{
  RequireCoverage(space, observed);
  const Mesh &m = space.GetMesh();
  EdgeField load = EdgeField::Zero(space.NumEdgeDofs());
  for (std::size_t f = 0; f < space.GammaFaces().size(); f++)
  {
    const auto &gf = space.GammaFaces()[f];
    const double weight = gf.area / kTracePoints;
    for (int q = 0; q < kTracePoints; q++)
    {
      const auto w = space.WhitneyValues(gf.tet, PointLocator::Barycentric(m, gf.tet,
                                                                           gf.points[q]));
      Eigen::Vector3cd Et = Eigen::Vector3cd::Zero();
      for (int le = 0; le < 6; le++)
      {
        const int dof = space.EdgeDof(m.tet_edges[gf.tet][le]);
        if (dof >= 0)
        {
          Et += E[dof] * Tangential(w[le], gf.normal).cast<Complex>();
        }
      }
      const Eigen::Vector3cd mismatch = (observed.values[f][q] - Et).conjugate();
      for (int le = 0; le < 6; le++)
      {
        const int dof = space.EdgeDof(m.tet_edges[gf.tet][le]);
        if (dof >= 0)
        {
          load[dof] +=
              weight * Dot(mismatch, Tangential(w[le], gf.normal).cast<Complex>());
        }
      }
    }
  }
  return load;
}

double trace_misfit(const FeSpace &space, const BoundaryTrace &a, const BoundaryTrace &b)
{
  RequireCoverage(space, a);
  RequireCoverage(space, b);
  double sum = 0.0;
  for (std::size_t f = 0; f < space.GammaFaces().size(); f++)
  {
    const double weight = space.GammaFaces()[f].area / kTracePoints;
    for (int q = 0; q < kTracePoints; q++)
    {
      sum += weight * (a.values[f][q] - b.values[f][q]).squaredNorm();
    }
  }
  return 0.5 * sum;
}

double trace_norm(const FeSpace &space, const BoundaryTrace &a)
{
  BoundaryTrace zero = a;
  for (auto &face : zero.values)
  {
    for (auto &v : face)
    {
      v.setZero();
    }
  }
  return std::sqrt(2.0 * trace_misfit(space, a, zero));
}

RealSparseMatrix nodal_mass_matrix(const FeSpace &space, bool constrained)
{
  const Mesh &m = space.GetMesh();
  std::vector<Eigen::Triplet<double>> trip;
  for (int t : space.ConductorTets())
  {
    const double vol = space.Geometry(t).volume;
    for (int a = 0; a < 4; a++)
    {
      for (int b = 0; b < 4; b++)
      {
        int ra = m.tets[t][a], rb = m.tets[t][b];
        if (constrained)
        {
          ra = space.ConductorDof(ra);
          rb = space.ConductorDof(rb);
          if (ra < 0 || rb < 0)
          {
            continue;
          }
        }
        trip.emplace_back(ra, rb, vol * BaryMoment2(a, b));
      }
    }
  }
  const int n = constrained ? space.NumConductorDofs() : m.NumVertices();
  RealSparseMatrix M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

CellGradient cell_gradient_operator(const FeSpace &space)
{
  const Mesh &m = space.GetMesh();
  const auto &cells = space.ConductorTets();
  CellGradient op;
  op.volumes.resize(static_cast<Eigen::Index>(cells.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < cells.size(); c++)
  {
    const int t = cells[c];
    const auto &g = space.Geometry(t);
    op.volumes[static_cast<Eigen::Index>(c)] = g.volume;
    for (int a = 0; a < 4; a++)
    {
      const int dof = space.ConductorDof(m.tets[t][a]);
      if (dof < 0)
      {
        continue;
      }
      for (int k = 0; k < 3; k++)
      {
        trip.emplace_back(static_cast<int>(3 * c) + k, dof, g.grad[a][k]);
      }
    }
  }
  op.G.resize(static_cast<Eigen::Index>(3 * cells.size()), space.NumConductorDofs());
  op.G.setFromTriplets(trip.begin(), trip.end());
  return op;
}

CellVectorField CellGradient::Apply(const NodalField &v) const
{
  const Eigen::VectorXd flat = G * v;
  return Eigen::Map<const CellVectorField>(flat.data(), NumCells(), 3);
}

NodalField CellGradient::ApplyAdjoint(const CellVectorField &c) const
{
  CellVectorField weighted = volumes.asDiagonal() * c;
  return G.transpose() * Eigen::Map<const Eigen::VectorXd>(weighted.data(), 3 * NumCells());
}

RealSparseMatrix CellGradient::Stiffness() const
{
  Eigen::VectorXd w(3 * NumCells());
  for (int c = 0; c < NumCells(); c++)
  {
    w.segment<3>(3 * c).setConstant(volumes[c]);
  }
  RealSparseMatrix K = RealSparseMatrix(G.transpose()) * w.asDiagonal() * G;
  K.makeCompressed();
  return K;
}

double CellGradient::Norm(const CellVectorField &c) const
{
  return std::sqrt(volumes.dot(c.rowwise().squaredNorm()));
}

void write_coordinate_text(const ComplexSparseMatrix &M, std::ostream &os)
{
  for (int r = 0; r < M.outerSize(); r++)
  {
    for (ComplexSparseMatrix::InnerIterator it(M, r); it; ++it)
    {
      os << fmt::format("{} {} {} {}\n", r, it.col(), it.value().real(), it.value().imag());
    }
  }
}

}  // namespace eddytv

// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <fmt/format.h>
#include <Eigen/Dense>

namespace eddytv
{

MeshParseError::MeshParseError(std::size_t line, const std::string &what)
  : std::runtime_error(fmt::format("mesh parse error at line {}: {}", line, what)), line_(line)
{
}

void DomainSpec::Validate() const
{
  auto check_range = [](const Interval &r, const char *key)
  {
    if (!(r.hi > r.lo))
    {
      throw ConfigError(fmt::format("{}: upper bound must exceed lower bound", key));
    }
  };
  check_range(x_range, "x_range");
  check_range(y_range, "y_range");
  check_range(z_range, "z_range");
  for (int d = 0; d < 3; d++)
  {
    if (cells_per_axis[d] < 1)
    {
      throw ConfigError("cells_per_axis: entries must be positive");
    }
  }
  if (refine_levels < 0)
  {
    throw ConfigError("refine_levels: must be non-negative");
  }
  if (!(z_interface > z_range.lo && z_interface < z_range.hi))
  {
    throw ConfigError("z_interface: must lie strictly inside z_range");
  }
  const double layers =
      (z_interface - z_range.lo) / z_range.length() * static_cast<double>(cells_per_axis[2]);
  if (std::abs(layers - std::round(layers)) > 1e-9)
  {
    throw ConfigError(fmt::format(
        "z_interface: grid with {} z-cells has no plane at z = {}", cells_per_axis[2],
        z_interface));
  }
}

std::string ToString(CellTag tag)
{
  return tag == CellTag::Omega0 ? "Omega0" : "OmegaC";
}

std::string ToString(BoundaryTag tag)
{
  return tag == BoundaryTag::Gamma ? "Gamma" : "GammaD";
}

namespace
{

using Face = std::array<int, 3>;

Face SortedFace(int a, int b, int c)
{
  Face f{a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

constexpr std::array<std::array<int, 3>, 4> kTetFaces = {{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

// All faces of all tets, sorted, with multiplicity.
std::vector<Face> CollectFaces(const std::vector<std::array<int, 4>> &tets)
{
  std::vector<Face> faces;
  faces.reserve(4 * tets.size());
  for (const auto &t : tets)
  {
    for (const auto &lf : kTetFaces)
    {
      faces.push_back(SortedFace(t[lf[0]], t[lf[1]], t[lf[2]]));
    }
  }
  std::sort(faces.begin(), faces.end());
  return faces;
}

void BuildBoundaryFaces(Mesh &mesh)
{
  const auto faces = CollectFaces(mesh.tets);
  double zmax = -std::numeric_limits<double>::infinity();
  for (const auto &v : mesh.vertices)
  {
    zmax = std::max(zmax, v.z());
  }
  mesh.boundary_faces.clear();
  for (std::size_t i = 0; i < faces.size();)
  {
    std::size_t j = i;
    while (j < faces.size() && faces[j] == faces[i])
    {
      j++;
    }
    if (j - i == 1)
    {
      const auto &f = faces[i];
      bool top = true;
      for (int v : f)
      {
        top = top && std::abs(mesh.vertices[v].z() - zmax) <= 1e-12 * (1.0 + std::abs(zmax));
      }
      mesh.boundary_faces.push_back({f, top ? BoundaryTag::Gamma : BoundaryTag::GammaD});
    }
    i = j;
  }
}

std::vector<double> GridCoordinates(const Interval &r, int n)
{
  std::vector<double> c(n + 1);
  for (int i = 0; i <= n; i++)
  {
    c[i] = r.lo + r.length() * static_cast<double>(i) / static_cast<double>(n);
  }
  c[n] = r.hi;
  return c;
}

}  // namespace

void Mesh::Finalize()
{
  // Edges.
  std::vector<std::array<int, 2>> all;
  all.reserve(6 * tets.size());
  for (const auto &t : tets)
  {
    for (const auto &le : kTetEdges)
    {
      all.push_back({std::min(t[le[0]], t[le[1]]), std::max(t[le[0]], t[le[1]])});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  edges = std::move(all);

  edge_row_ptr_.assign(vertices.size() + 1, 0);
  for (const auto &e : edges)
  {
    edge_row_ptr_[e[0] + 1]++;
  }
  std::partial_sum(edge_row_ptr_.begin(), edge_row_ptr_.end(), edge_row_ptr_.begin());

  tet_edges.resize(tets.size());
  for (std::size_t t = 0; t < tets.size(); t++)
  {
    for (int le = 0; le < 6; le++)
    {
      tet_edges[t][le] = FindEdge(tets[t][kTetEdges[le][0]], tets[t][kTetEdges[le][1]]);
    }
  }

  // Bounds and interface.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto &v : vertices)
  {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  bounds = Box{{lo.x(), hi.x()}, {lo.y(), hi.y()}, {lo.z(), hi.z()}};
  z_interface = lo.z();
  for (std::size_t t = 0; t < tets.size(); t++)
  {
    if (cell_tags[t] == CellTag::OmegaC)
    {
      for (int v : tets[t])
      {
        z_interface = std::max(z_interface, vertices[v].z());
      }
    }
  }

  h = 0.0;
  for (int t = 0; t < NumTets(); t++)
  {
    h = std::max(h, TetDiameter(t));
  }
}

int Mesh::FindEdge(int a, int b) const
{
  if (a > b)
  {
    std::swap(a, b);
  }
  if (a < 0 || a + 1 >= static_cast<int>(edge_row_ptr_.size()))
  {
    return -1;
  }
  auto first = edges.begin() + edge_row_ptr_[a];
  auto last = edges.begin() + edge_row_ptr_[a + 1];
  auto it = std::lower_bound(first, last, std::array<int, 2>{a, b});
  return (it != last && (*it)[1] == b) ? static_cast<int>(it - edges.begin()) : -1;
}

int Mesh::NumFaces() const
{
  auto faces = CollectFaces(tets);
  return static_cast<int>(std::unique(faces.begin(), faces.end()) - faces.begin());
}

double Mesh::TetVolume(int t) const
{
  const auto &v = tets[t];
  Eigen::Matrix3d J;
  J.col(0) = vertices[v[1]] - vertices[v[0]];
  J.col(1) = vertices[v[2]] - vertices[v[0]];
  J.col(2) = vertices[v[3]] - vertices[v[0]];
  return std::abs(J.determinant()) / 6.0;
}

double Mesh::TetDiameter(int t) const
{
  double d = 0.0;
  for (const auto &le : kTetEdges)
  {
    d = std::max(d, (vertices[tets[t][le[0]]] - vertices[tets[t][le[1]]]).norm());
  }
  return d;
}

Vec3 Mesh::TetCentroid(int t) const
{
  Vec3 c = Vec3::Zero();
  for (int v : tets[t])
  {
    c += vertices[v];
  }
  return 0.25 * c;
}

double Mesh::MinDihedralAngle(int t) const
{
  // The dihedral angle along edge (i, j) is the angle between the two faces sharing it,
  // obtained from the outward normals of the faces opposite the other two vertices.
  std::array<Vec3, 4> n;
  const auto &v = tets[t];
  for (int f = 0; f < 4; f++)
  {
    const auto &lf = kTetFaces[f];
    Vec3 nf = (vertices[v[lf[1]]] - vertices[v[lf[0]]]).cross(vertices[v[lf[2]]] -
                                                               vertices[v[lf[0]]]);
    if (nf.dot(vertices[v[f]] - vertices[v[lf[0]]]) > 0.0)
    {
      nf = -nf;
    }
    n[f] = nf.normalized();
  }
  double amin = M_PI;
  for (int a = 0; a < 4; a++)
  {
    for (int b = a + 1; b < 4; b++)
    {
      amin = std::min(amin, M_PI - std::acos(std::clamp(n[a].dot(n[b]), -1.0, 1.0)));
    }
  }
  return amin;
}

bool Mesh::operator==(const Mesh &o) const
{
  if (vertices.size() != o.vertices.size())
  {
    return false;
  }
  for (std::size_t i = 0; i < vertices.size(); i++)
  {
    if (vertices[i] != o.vertices[i])
    {
      return false;
    }
  }
  if (boundary_faces.size() != o.boundary_faces.size())
  {
    return false;
  }
  for (std::size_t i = 0; i < boundary_faces.size(); i++)
  {
    if (boundary_faces[i].v != o.boundary_faces[i].v ||
        boundary_faces[i].tag != o.boundary_faces[i].tag)
    {
      return false;
    }
  }
  return tets == o.tets && cell_tags == o.cell_tags && subregion_tags == o.subregion_tags &&
         edges == o.edges;
}

Mesh build_box_mesh(const DomainSpec &spec)
{
  spec.Validate();
  const auto [nx, ny, nz] = spec.cells_per_axis;
  const auto xs = GridCoordinates(spec.x_range, nx);
  const auto ys = GridCoordinates(spec.y_range, ny);
  auto zs = GridCoordinates(spec.z_range, nz);
  const int k_if = static_cast<int>(std::lround((spec.z_interface - spec.z_range.lo) /
                                                spec.z_range.length() * nz));
  zs[k_if] = spec.z_interface;

  Mesh mesh;
  auto vid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  mesh.vertices.reserve((nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; k++)
  {
    for (int j = 0; j <= ny; j++)
    {
      for (int i = 0; i <= nx; i++)
      {
        mesh.vertices.emplace_back(xs[i], ys[j], zs[k]);
      }
    }
  }

  // Kuhn split: six tets along the monotone paths from corner (0,0,0) to (1,1,1).
  static constexpr std::array<std::array<int, 3>, 6> kPaths = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  mesh.tets.reserve(6 * nx * ny * nz);
  for (int k = 0; k < nz; k++)
  {
    for (int j = 0; j < ny; j++)
    {
      for (int i = 0; i < nx; i++)
      {
        const CellTag tag = (k < k_if) ? CellTag::OmegaC : CellTag::Omega0;
        for (const auto &path : kPaths)
        {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; s++)
          {
            c[path[s]]++;
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          mesh.tets.push_back(tet);
          mesh.cell_tags.push_back(tag);
        }
      }
    }
  }
  mesh.subregion_tags.assign(mesh.tets.size(), 0);
  BuildBoundaryFaces(mesh);
  mesh.Finalize();

  for (int r = 0; r < spec.refine_levels; r++)
  {
    mesh = uniform_refine(mesh);
  }
  if (spec.refine_levels > 0)
  {
    mesh.parent.clear();
  }
  return mesh;
}

Mesh uniform_refine(const Mesh &mesh)
{
  Mesh fine;
  const int nv = mesh.NumVertices();
  fine.vertices = mesh.vertices;
  fine.vertices.reserve(nv + mesh.NumEdges());
  for (const auto &e : mesh.edges)
  {
    fine.vertices.push_back(0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]]));
  }
  fine.tets.reserve(8 * mesh.tets.size());
  for (int t = 0; t < mesh.NumTets(); t++)
  {
    const auto &x = mesh.tets[t];
    auto m = [&](int a, int b) { return nv + mesh.FindEdge(x[a], x[b]); };
    const std::array<int, 10> local = {x[0],    x[1],    x[2],    x[3],    m(0, 1),
                                       m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3)};
    for (const auto &c : kRedChildren)
    {
      fine.tets.push_back({local[c[0]], local[c[1]], local[c[2]], local[c[3]]});
      fine.cell_tags.push_back(mesh.cell_tags[t]);
      fine.subregion_tags.push_back(mesh.subregion_tags[t]);
      fine.parent.push_back(t);
    }
  }
  BuildBoundaryFaces(fine);
  fine.Finalize();
  return fine;
}

void tag_subregions(Mesh &mesh, const std::vector<Box> &boxes)
{
  for (int t = 0; t < mesh.NumTets(); t++)
  {
    mesh.subregion_tags[t] = 0;
    const Vec3 c = mesh.TetCentroid(t);
    for (std::size_t b = 0; b < boxes.size(); b++)
    {
      if (boxes[b].contains(c))
      {
        mesh.subregion_tags[t] = static_cast<int>(b) + 1;
        break;
      }
    }
  }
}

void write_mesh(const Mesh &mesh, std::ostream &os)
{
  os << "eddytv-mesh v1\n";
  os << "vertices " << mesh.vertices.size() << "\n";
  for (const auto &v : mesh.vertices)
  {
    os << fmt::format("{} {} {}\n", v.x(), v.y(), v.z());
  }
  os << "tets " << mesh.tets.size() << "\n";
  for (std::size_t t = 0; t < mesh.tets.size(); t++)
  {
    const auto &v = mesh.tets[t];
    os << fmt::format("{} {} {} {} {} {}\n", v[0], v[1], v[2], v[3],
                      ToString(mesh.cell_tags[t]), mesh.subregion_tags[t]);
  }
  os << "boundary_faces " << mesh.boundary_faces.size() << "\n";
  for (const auto &f : mesh.boundary_faces)
  {
    os << fmt::format("{} {} {} {}\n", f.v[0], f.v[1], f.v[2], ToString(f.tag));
  }
}

void write_mesh(const Mesh &mesh, const std::filesystem::path &path)
{
  std::ofstream os(path);
  if (!os)
  {
    throw std::runtime_error("cannot open mesh file for writing: " + path.string());
  }
  write_mesh(mesh, os);
}

namespace
{

class LineReader
{
public:
  explicit LineReader(std::istream &is) : is_(is) {}

  std::istringstream Next(const char *expecting)
  {
    std::string line;
    if (!std::getline(is_, line))
    {
      throw MeshParseError(line_ + 1, fmt::format("unexpected end of file, expected {}",
                                                  expecting));
    }
    line_++;
    return std::istringstream(line);
  }

  std::size_t line() const { return line_; }

private:
  std::istream &is_;
  std::size_t line_ = 0;
};

std::size_t ReadSection(LineReader &r, const std::string &name)
{
  auto ss = r.Next(name.c_str());
  std::string key;
  long long n = -1;
  if (!(ss >> key >> n) || key != name || n < 0)
  {
    throw MeshParseError(r.line(), fmt::format("expected '{} <count>'", name));
  }
  return static_cast<std::size_t>(n);
}

template <typename... T>
void ReadFields(LineReader &r, std::istringstream &ss, const char *what, T &...fields)
{
  if (!((ss >> fields) && ...))
  {
    throw MeshParseError(r.line(), fmt::format("malformed {} record", what));
  }
  std::string extra;
  if (ss >> extra)
  {
    throw MeshParseError(r.line(), fmt::format("trailing data in {} record", what));
  }
}

}  // namespace

Mesh read_mesh(std::istream &is)
{
  LineReader r(is);
  {
    auto ss = r.Next("header");
    std::string magic, version;
    ss >> magic >> version;
    if (magic != "eddytv-mesh")
    {
      throw MeshParseError(r.line(), "missing 'eddytv-mesh' header");
    }
    if (version != "v1")
    {
      throw MeshParseError(r.line(), "unsupported mesh format version '" + version + "'");
    }
  }
  Mesh mesh;
  const std::size_t nv = ReadSection(r, "vertices");
  mesh.vertices.resize(nv);
  for (auto &v : mesh.vertices)
  {
    auto ss = r.Next("vertex");
    double x, y, z;
    ReadFields(r, ss, "vertex", x, y, z);
    v = Vec3(x, y, z);
  }
  const std::size_t nt = ReadSection(r, "tets");
  mesh.tets.resize(nt);
  mesh.cell_tags.resize(nt);
  mesh.subregion_tags.resize(nt);
  for (std::size_t t = 0; t < nt; t++)
  {
    auto ss = r.Next("tet");
    std::array<int, 4> &v = mesh.tets[t];
    std::string tag;
    ReadFields(r, ss, "tet", v[0], v[1], v[2], v[3], tag, mesh.subregion_tags[t]);
    for (int id : v)
    {
      if (id < 0 || static_cast<std::size_t>(id) >= nv)
      {
        throw MeshParseError(r.line(), fmt::format("vertex id {} out of range", id));
      }
    }
    if (tag == "Omega0")
    {
      mesh.cell_tags[t] = CellTag::Omega0;
    }
    else if (tag == "OmegaC")
    {
      mesh.cell_tags[t] = CellTag::OmegaC;
    }
    else
    {
      throw UnsupportedTagError(r.line(), tag);
    }
  }
  const std::size_t nf = ReadSection(r, "boundary_faces");
  mesh.boundary_faces.resize(nf);
  for (auto &f : mesh.boundary_faces)
  {
    auto ss = r.Next("boundary face");
    std::string tag;
    ReadFields(r, ss, "boundary face", f.v[0], f.v[1], f.v[2], tag);
    for (int id : f.v)
    {
      if (id < 0 || static_cast<std::size_t>(id) >= nv)
      {
        throw MeshParseError(r.line(), fmt::format("vertex id {} out of range", id));
      }
    }
    if (tag == "Gamma")
    {
      f.tag = BoundaryTag::Gamma;
    }
    else if (tag == "GammaD")
    {
      f.tag = BoundaryTag::GammaD;
    }
    else
    {
      throw UnsupportedTagError(r.line(), tag);
    }
  }
  mesh.Finalize();
  return mesh;
}

Mesh read_mesh(const std::filesystem::path &path)
{
  std::ifstream is(path);
  if (!is)
  {
    throw std::runtime_error("cannot open mesh file: " + path.string());
  }
  return read_mesh(is);
}

std::string mesh_hash(const Mesh &mesh)
{
  std::ostringstream os;
  write_mesh(mesh, os);
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : os.str())
  {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", hash);
}

PointLocator::PointLocator(const Mesh &mesh, double tol) : mesh_(mesh), tol_(tol)
{
  const Vec3 lo(mesh.bounds.x.lo, mesh.bounds.y.lo, mesh.bounds.z.lo);
  const Vec3 hi(mesh.bounds.x.hi, mesh.bounds.y.hi, mesh.bounds.z.hi);
  const Vec3 ext = hi - lo;
  const double per_axis = std::cbrt(static_cast<double>(std::max(1, mesh.NumTets())) / 4.0);
  const double cell = std::cbrt(ext.prod()) / std::max(1.0, per_axis);
  for (int d = 0; d < 3; d++)
  {
    nbins_[d] = std::max(1, static_cast<int>(std::ceil(ext[d] / cell)));
  }
  lo_ = lo;
  inv_width_ = Vec3(nbins_[0] / ext[0], nbins_[1] / ext[1], nbins_[2] / ext[2]);

  const int nb = nbins_[0] * nbins_[1] * nbins_[2];
  std::vector<std::vector<int>> bins(nb);
  for (int t = 0; t < mesh.NumTets(); t++)
  {
    Vec3 tlo = mesh.vertices[mesh.tets[t][0]], thi = tlo;
    for (int v : mesh.tets[t])
    {
      tlo = tlo.cwiseMin(mesh.vertices[v]);
      thi = thi.cwiseMax(mesh.vertices[v]);
    }
    const auto b0 = BinOf(tlo - Vec3::Constant(1e-9 * ext.maxCoeff()));
    const auto b1 = BinOf(thi + Vec3::Constant(1e-9 * ext.maxCoeff()));
    for (int k = b0[2]; k <= b1[2]; k++)
    {
      for (int j = b0[1]; j <= b1[1]; j++)
      {
        for (int i = b0[0]; i <= b1[0]; i++)
        {
          bins[i + nbins_[0] * (j + nbins_[1] * k)].push_back(t);
        }
      }
    }
  }
  bin_ptr_.assign(nb + 1, 0);
  for (int b = 0; b < nb; b++)
  {
    bin_ptr_[b + 1] = bin_ptr_[b] + static_cast<int>(bins[b].size());
  }
  bin_tets_.reserve(bin_ptr_.back());
  for (const auto &b : bins)
  {
    bin_tets_.insert(bin_tets_.end(), b.begin(), b.end());
  }
}

std::array<int, 3> PointLocator::BinOf(const Vec3 &p) const
{
  std::array<int, 3> b;
  for (int d = 0; d < 3; d++)
  {
    b[d] = std::clamp(static_cast<int>(std::floor((p[d] - lo_[d]) * inv_width_[d])), 0,
                      nbins_[d] - 1);
  }
  return b;
}

Eigen::Vector4d PointLocator::Barycentric(const Mesh &mesh, int t, const Vec3 &p)
{
  const auto &v = mesh.tets[t];
  Eigen::Matrix3d J;
  J.col(0) = mesh.vertices[v[1]] - mesh.vertices[v[0]];
  J.col(1) = mesh.vertices[v[2]] - mesh.vertices[v[0]];
  J.col(2) = mesh.vertices[v[3]] - mesh.vertices[v[0]];
  const Vec3 l = J.partialPivLu().solve(p - mesh.vertices[v[0]]);
  return Eigen::Vector4d(1.0 - l.sum(), l[0], l[1], l[2]);
}

int PointLocator::Locate(const Vec3 &p) const
{
  if (!mesh_.bounds.contains(p, 1e-12 * (1.0 + p.norm())))
  {
    return -1;
  }
  const auto b = BinOf(p);
  const int bin = b[0] + nbins_[0] * (b[1] + nbins_[1] * b[2]);
  for (int i = bin_ptr_[bin]; i < bin_ptr_[bin + 1]; i++)
  {
    const int t = bin_tets_[i];
    if (Barycentric(mesh_, t, p).minCoeff() >= -tol_)
    {
      return t;
    }
  }
  return -1;
}

}  // namespace eddytv

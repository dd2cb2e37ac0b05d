// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_MESH_HPP
#define EDDYTV_MESH_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>
#include <Eigen/Core>

namespace eddytv
{

using Vec3 = Eigen::Vector3d;

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class MeshParseError : public std::runtime_error
{
public:
  MeshParseError(std::size_t line, const std::string &what);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class UnsupportedTagError : public MeshParseError
{
public:
  UnsupportedTagError(std::size_t line, const std::string &tag)
    : MeshParseError(line, "unsupported tag '" + tag + "'")
  {
  }
};

struct Interval
{
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

// Axis-aligned box, closed.
struct Box
{
  Interval x, y, z;
  bool contains(const Vec3 &p, double tol = 0.0) const
  {
    return x.contains(p.x(), tol) && y.contains(p.y(), tol) && z.contains(p.z(), tol);
  }
  double volume() const { return x.length() * y.length() * z.length(); }
};

//
// Box domain split by the plane z = z_interface into the insulator Omega0 (above) and
// the conductor OmegaC (below). The hexahedral grid must have a plane at z_interface.
//
struct DomainSpec
{
  Interval x_range{-2.0, 2.0};
  Interval y_range{-2.0, 2.0};
  Interval z_range{-2.0, 0.2};
  double z_interface = 0.0;
  std::array<int, 3> cells_per_axis{10, 10, 11};
  int refine_levels = 0;

  // Throws ConfigError naming the offending field.
  void Validate() const;
};

enum class CellTag : std::uint8_t
{
  Omega0,
  OmegaC
};

enum class BoundaryTag : std::uint8_t
{
  Gamma,
  GammaD
};

std::string ToString(CellTag tag);
std::string ToString(BoundaryTag tag);

struct BoundaryFace
{
  std::array<int, 3> v;
  BoundaryTag tag;
};

// Local edge numbering of a tetrahedron.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

//
// Conforming tetrahedral mesh of a box with subdomain and boundary tags. Edges are
// derived from the tetrahedra (sorted, oriented from lower to higher vertex id).
//
class Mesh
{
public:
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<CellTag> cell_tags;
  std::vector<int> subregion_tags;  // 0 = background, k > 0 = k-th inclusion box
  std::vector<BoundaryFace> boundary_faces;

  // Derived tables, filled by Finalize().
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 6>> tet_edges;
  Box bounds;
  double z_interface = 0.0;
  double h = 0.0;

  // Parent tet of each tet when produced by uniform_refine (empty otherwise).
  std::vector<int> parent;

  // Rebuilds edges, bounds, z_interface and h from vertices/tets/tags.
  void Finalize();

  int NumVertices() const { return static_cast<int>(vertices.size()); }
  int NumTets() const { return static_cast<int>(tets.size()); }
  int NumEdges() const { return static_cast<int>(edges.size()); }
  int NumFaces() const;

  double TetVolume(int t) const;
  double TetDiameter(int t) const;
  Vec3 TetCentroid(int t) const;
  double MinDihedralAngle(int t) const;

  // Edge id of an (unordered) vertex pair, or -1.
  int FindEdge(int a, int b) const;

  bool operator==(const Mesh &other) const;

private:
  std::vector<int> edge_row_ptr_;  // CSR lookup over the lower vertex of each edge
};

Mesh build_box_mesh(const DomainSpec &spec);

// Children of the red refinement of a tet, as indices into (x0, x1, x2, x3, m01, m02, m03,
// m12, m13, m23) where mij is the midpoint of edge (xi, xj). Bey's ordering; the interior
// octahedron is cut along the m02-m13 diagonal.
inline constexpr std::array<std::array<int, 4>, 8> kRedChildren = {{{0, 4, 5, 6},
                                                                    {4, 1, 7, 8},
                                                                    {5, 7, 2, 9},
                                                                    {6, 8, 9, 3},
                                                                    {4, 5, 6, 8},
                                                                    {4, 5, 7, 8},
                                                                    {5, 6, 8, 9},
                                                                    {5, 7, 8, 9}}};

// Red refinement: every tet split into 8 children, tags inherited, parent map filled.
Mesh uniform_refine(const Mesh &mesh);

// Labels tets whose centroid lies in boxes[k] with k + 1 (first match wins).
void tag_subregions(Mesh &mesh, const std::vector<Box> &boxes);

void write_mesh(const Mesh &mesh, std::ostream &os);
void write_mesh(const Mesh &mesh, const std::filesystem::path &path);
Mesh read_mesh(std::istream &is);
Mesh read_mesh(const std::filesystem::path &path);

// 64-bit FNV-1a hash of the serialized mesh, as 16 hex digits.
std::string mesh_hash(const Mesh &mesh);

// Locates points in a mesh with a uniform bin grid. Points on shared faces are
// assigned to the lowest tet id.
class PointLocator
{
public:
  explicit PointLocator(const Mesh &mesh, double tol = 1e-12);

  // Returns tet id or -1 if the point is outside the mesh.
  int Locate(const Vec3 &p) const;

  // Barycentric coordinates of p with respect to tet t.
  static Eigen::Vector4d Barycentric(const Mesh &mesh, int t, const Vec3 &p);

private:
  const Mesh &mesh_;
  double tol_;
  std::array<int, 3> nbins_;
  Vec3 lo_, inv_width_;
  std::vector<int> bin_ptr_, bin_tets_;

  std::array<int, 3> BinOf(const Vec3 &p) const;
};

}  // namespace eddytv

#endif  // EDDYTV_MESH_HPP

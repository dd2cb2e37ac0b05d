// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_FEM_ASSEMBLY_HPP
#define EDDYTV_FEM_ASSEMBLY_HPP

#include <array>
#include <memory>
#include <vector>
#include <Eigen/Core>
#include "eddytv/boundary_trace.hpp"
#include "eddytv/mesh.hpp"
#include "eddytv/sparse_linalg.hpp"

namespace eddytv
{

// Complex coefficients over the unconstrained edge DOFs of the lowest-order edge space.
using EdgeField = Eigen::VectorXcd;

// Real P1 coefficients over the interior vertices of OmegaC (zero on its boundary).
using NodalField = Eigen::VectorXd;

// One real 3-vector per OmegaC tet, row i belonging to FeSpace::ConductorTets()[i].
using CellVectorField = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct PhysicalParams
{
  double omega = 1.0;    // angular frequency
  double mu = 1.0;       // permeability, constant on the whole domain
  double epsilon = 1.0;  // permittivity in Omega0
  double sigma0 = 1.0;   // background conductivity in OmegaC
  // Smallest admissible value of sigma + sigma0 at any OmegaC node.
  double positivity_floor = 1e-8;
};

// Curl-of-point-dipole source J_s = curl sum_j delta(x - x_j) direction.
struct SourceSpec
{
  std::vector<Vec3> positions;
  Vec3 direction = Vec3::UnitX();
  double strength = 1.0;
};

struct TetGeometry
{
  std::array<Vec3, 4> grad;  // gradients of the barycentric coordinates
  double volume = 0.0;

  static TetGeometry FromVertices(const std::array<Vec3, 4> &x);
};

struct GammaFace
{
  int tet = -1;
  std::array<int, 3> v{};
  double area = 0.0;
  Vec3 normal = Vec3::UnitZ();
  std::array<Vec3, kTracePoints> points;
};

//
// Degree-of-freedom maps for the three discrete spaces: edge elements R_h (edges on
// GammaD removed), P1 multipliers U_h on Omega0 (vertices off the closure of GammaD and
// above the interface) and P1 conductivities V_h (interior vertices of OmegaC).
//
class FeSpace
{
public:
  explicit FeSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh &GetMesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh> &MeshPtr() const { return mesh_; }

  int NumEdgeDofs() const { return num_edge_dofs_; }
  int NumMultiplierDofs() const { return num_u_dofs_; }
  int NumConductorDofs() const { return static_cast<int>(conductor_vertices_.size()); }
  int NumSaddleDofs() const { return num_edge_dofs_ + num_u_dofs_; }

  // -1 for constrained/absent entries.
  int EdgeDof(int edge) const { return edge_dof_[edge]; }
  int MultiplierDof(int vertex) const { return u_dof_[vertex]; }
  int ConductorDof(int vertex) const { return v_dof_[vertex]; }

  const std::vector<int> &ConductorVertices() const { return conductor_vertices_; }
  const std::vector<int> &ConductorTets() const { return conductor_tets_; }
  const std::vector<GammaFace> &GammaFaces() const { return gamma_faces_; }
  const TetGeometry &Geometry(int t) const { return geometry_[t]; }

  // +1 if local edge le of tet t runs from lower to higher global vertex id.
  double EdgeSign(int t, int le) const;

  // Whitney basis functions of tet t at barycentric point lambda, globally oriented.
  std::array<Vec3, 6> WhitneyValues(int t, const Eigen::Vector4d &lambda) const;
  std::array<Vec3, 6> WhitneyCurls(int t) const;

  // Edge field evaluated at a point inside tet t.
  Eigen::Vector3cd EvaluateEdgeField(const EdgeField &E, int t, const Vec3 &x) const;

  // Value of a V_h field at the four vertices of tet t (0 at non-DOF vertices).
  Eigen::Vector4d LocalNodal(const NodalField &v, int t) const;

private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<int> edge_dof_, u_dof_, v_dof_;
  int num_edge_dofs_ = 0, num_u_dofs_ = 0;
  std::vector<int> conductor_vertices_, conductor_tets_;
  std::vector<GammaFace> gamma_faces_;
  std::vector<TetGeometry> geometry_;
};

using ElementMatrix = Eigen::Matrix<double, 6, 6>;

// Exact element integrals for the Whitney basis with the given edge signs.
ElementMatrix whitney_curl_curl(const TetGeometry &g, const std::array<double, 6> &sign);

// int (sum_a w_a lambda_a + w0) phi_i . phi_j over the tet.
ElementMatrix whitney_mass(const TetGeometry &g, const std::array<double, 6> &sign,
                           const Eigen::Vector4d &nodal_weight, double constant_weight);

// Block matrix [[A, B], [B^T, 0]] over edge DOFs followed by multiplier DOFs. Throws
// std::domain_error naming the node if sigma + sigma0 drops below the positivity floor.
ComplexSparseMatrix assemble_state_matrix(const FeSpace &space, const NodalField &sigma,
                                          const PhysicalParams &params);

// Edge-by-multiplier coupling block B_{e,i} = eps int_{Omega0} phi_e . grad psi_i.
RealSparseMatrix assemble_divergence_coupling(const FeSpace &space, double epsilon);

// Unweighted curl-curl plus mass over the whole domain, for H(curl) norms.
RealSparseMatrix hcurl_gram_matrix(const FeSpace &space);

// i omega sum_j direction . curl(phi_k)(x_j); dipoles on shared faces go to the lowest
// tet id. Throws std::domain_error for a dipole outside the mesh.
EdgeField assemble_dipole_load(const FeSpace &space, const SourceSpec &src, double omega);

// Tangential trace of E at the Gamma quadrature points.
BoundaryTrace evaluate_trace(const FeSpace &space, const EdgeField &E);

// load_k = int_Gamma conj(E_obs,T - E_T) . phi_k,T ds. Throws DataError if the trace does
// not cover every Gamma face.
EdgeField assemble_adjoint_load(const FeSpace &space, const EdgeField &E,
                                const BoundaryTrace &observed);

// 1/2 int_Gamma |a - b|^2 ds with the trace quadrature.
double trace_misfit(const FeSpace &space, const BoundaryTrace &a, const BoundaryTrace &b);

// ||a||_{L2(Gamma)}.
double trace_norm(const FeSpace &space, const BoundaryTrace &a);

// P1 mass matrix on OmegaC. With constrained = true rows and columns are the V_h DOFs;
// otherwise they are all mesh vertices (zero rows away from OmegaC).
RealSparseMatrix nodal_mass_matrix(const FeSpace &space, bool constrained = true);

//
// Piecewise-constant gradient of V_h fields on OmegaC tets, with the volume weights
// that turn the Euclidean pairing of cell fields into the L2(OmegaC) inner product.
//
struct CellGradient
{
  RealSparseMatrix G;        // (3 * cells) x V_h, row 3 * c + k
  Eigen::VectorXd volumes;   // per cell

  int NumCells() const { return static_cast<int>(volumes.size()); }
  CellVectorField Apply(const NodalField &v) const;
  // G^T W c: the V_h dual vector of (c, grad .)_{L2}.
  NodalField ApplyAdjoint(const CellVectorField &c) const;
  // G^T W G, the P1 stiffness matrix on V_h.
  RealSparseMatrix Stiffness() const;
  // ||c||_{L2(OmegaC)}.
  double Norm(const CellVectorField &c) const;
};

CellGradient cell_gradient_operator(const FeSpace &space);

// Writes `row col re im` lines (0-based) for debugging.
void write_coordinate_text(const ComplexSparseMatrix &M, std::ostream &os);

}  // namespace eddytv

#endif  // EDDYTV_FEM_ASSEMBLY_HPP

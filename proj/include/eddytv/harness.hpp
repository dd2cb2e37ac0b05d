// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_HARNESS_HPP
#define EDDYTV_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>
#include "eddytv/inversion.hpp"

namespace eddytv
{

// Axis-aligned inclusion with a constant conductivity perturbation. Boxes sharing a label
// form one subregion (e.g. the two legs of an L-shape).
struct Inclusion
{
  Box box;
  double value = 0.0;
  int label = 1;
};

struct ExperimentPreset
{
  std::string name;
  DomainSpec domain;
  PhysicalParams physics;
  SourceSpec source;
  std::vector<Inclusion> inclusions;
  OuterConfig outer;
  double noise = 0.005;
  std::uint64_t seed = 1;
  int refine_extra = 1;  // data mesh = inversion mesh refined this many times

  // Perturbation at p: the largest value among inclusions containing p (closed boxes),
  // 0 outside all of them.
  double TruthAt(const Vec3 &p) const;

  // Throws ConfigError when an inclusion leaves OmegaC or the domain is invalid.
  void Validate() const;
};

// Dipoles at (-2 + 0.1 i, -2 + 0.1 j, 0.04), i, j = 1..36, oriented along e1.
SourceSpec default_dipole_grid();

// Examples 1-3. Throws ConfigError for other n.
ExperimentPreset preset_example(int n);

// Sets per-tet subregion labels from the inclusion boxes (centroid membership).
void tag_inclusions(Mesh &mesh, const ExperimentPreset &preset);

// Nodal interpolant of the truth on V_h.
NodalField interpolate_truth(const FeSpace &space, const ExperimentPreset &preset);

// Tangential trace at the Gamma quadrature points of `coarse`, computed by solving the
// state problem for the true conductivity on `coarse` refined refine_extra times.
// refine_extra = 0 reuses the inversion mesh and is rejected unless allow_inverse_crime.
BoundaryTrace generate_synthetic_data(const ExperimentPreset &preset, const FeSpace &coarse,
                                      int refine_extra, bool allow_inverse_crime = false);

// Multiplies every quadrature-point value by (1 + nu xi), xi ~ U[-1, 1] i.i.d. per point
// from a 64-bit Mersenne Twister seeded with `seed`, in face-major order.
BoundaryTrace add_noise(const BoundaryTrace &trace, double nu, std::uint64_t seed);

// Integrals over OmegaC of sigma_h against the piecewise-constant truth. Tets straddling an
// inclusion face are subdivided by red refinement up to max_depth levels; leaves still
// straddling are classified by centroid. Exact when inclusion faces follow mesh faces.
struct RegionIntegrals
{
  double error_sq = 0.0;    // int (sigma_h - sigma_true)^2
  double inside = 0.0;      // int sigma_h over the inclusions
  double inside_volume = 0.0;
  double outside = 0.0;     // int sigma_h over the rest of OmegaC
  double outside_volume = 0.0;

  double InsideMean() const { return inside_volume > 0.0 ? inside / inside_volume : 0.0; }
  double OutsideMean() const { return outside_volume > 0.0 ? outside / outside_volume : 0.0; }
};
RegionIntegrals region_integrals(const FeSpace &space, const NodalField &sigma,
                                 const ExperimentPreset &preset, int max_depth = 4);

// ||sigma_h - sigma_true||_{L2(OmegaC)}.
double sigma_l2_error(const FeSpace &space, const NodalField &sigma,
                      const ExperimentPreset &preset, int max_depth = 4);

struct TraceFile
{
  BoundaryTrace trace;
  std::string mesh_hash;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

// Text format: `eddytv-trace v1`, then `mesh_hash`, `rule`, `noise`, `seed`, `faces K`
// header lines and one line `re im re im re im` per face and quadrature point.
void write_trace(const TraceFile &file, const std::filesystem::path &path);
TraceFile read_trace(const std::filesystem::path &path);

}  // namespace eddytv

#endif  // EDDYTV_HARNESS_HPP

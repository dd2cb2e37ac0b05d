// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_TEST_COMMON_HPP
#define EDDYTV_TEST_COMMON_HPP

#include <memory>
#include <random>
#include "eddytv/harness.hpp"

namespace eddytv::test
{

// [-1,1]^2 x [-1,1] with the interface at z = 0.
inline DomainSpec SmallDomain(int nxy = 4, int nz = 4)
{
  DomainSpec d;
  d.x_range = {-1.0, 1.0};
  d.y_range = {-1.0, 1.0};
  d.z_range = {-1.0, 1.0};
  d.z_interface = 0.0;
  d.cells_per_axis = {nxy, nxy, nz};
  return d;
}

inline std::shared_ptr<const FeSpace> SmallSpace(int nxy = 4, int nz = 4)
{
  return std::make_shared<const FeSpace>(
      std::make_shared<const Mesh>(build_box_mesh(SmallDomain(nxy, nz))));
}

// A few dipoles in Omega0 away from mesh faces.
inline SourceSpec SmallSource()
{
  SourceSpec s;
  s.positions = {{0.13, -0.21, 0.31}, {-0.37, 0.29, 0.23}, {0.41, 0.43, 0.27}};
  s.direction = Vec3::UnitX();
  return s;
}

// Smooth admissible conductivity perturbation on V_h.
inline NodalField RandomField(const FeSpace &space, std::mt19937_64 &rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  NodalField v(space.NumConductorDofs());
  for (int i = 0; i < v.size(); i++)
  {
    v[i] = u(rng);
  }
  return v;
}

}  // namespace eddytv::test

#endif  // EDDYTV_TEST_COMMON_HPP

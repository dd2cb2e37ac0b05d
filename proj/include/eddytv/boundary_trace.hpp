// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_BOUNDARY_TRACE_HPP
#define EDDYTV_BOUNDARY_TRACE_HPP

#include <array>
#include <stdexcept>
#include <string>
#include <vector>
#include <Eigen/Core>

namespace eddytv
{

class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Quadrature rule used on every Gamma face: three interior points at barycentric
// (2/3, 1/6, 1/6) and permutations, equal weights; exact for quadratics.
inline constexpr const char *kTraceRule = "tri3-deg2";
inline constexpr int kTracePoints = 3;

//
// Tangential electric field n x E x n sampled at the quadrature points of each Gamma
// face, in the face order of FeSpace::GammaFaces().
//
struct BoundaryTrace
{
  std::string rule = kTraceRule;
  std::vector<std::array<Eigen::Vector3cd, kTracePoints>> values;

  int NumFaces() const { return static_cast<int>(values.size()); }
};

}  // namespace eddytv

#endif  // EDDYTV_BOUNDARY_TRACE_HPP

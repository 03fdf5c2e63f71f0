#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "harnackflow/errors.hpp"
#include "harnackflow/field.hpp"
#include "harnackflow/geometry.hpp"

namespace harnackflow {

/// Sphere of radius r0 with an optional axisymmetric P2 bump:
/// phi = ln r0 + eps * (3 cos^2 theta - 1) / 2. R stays positive for |eps| < 1/3.
inline SurfaceGeometry sphere_geometry(int n, double radius, double p2_amplitude = 0.0) {
  const double log_r = std::log(radius);
  return SurfaceGeometry(ScalarField::sample(Grid::sphere(n), [&](double th) {
    const double c = std::cos(th);
    return log_r + p2_amplitude * 0.5 * (3.0 * c * c - 1.0);
  }));
}

/// Torus with phi = eps * cos(2 pi x / L) cos(2 pi y / L). Zero eps is flat.
inline SurfaceGeometry torus_geometry(int n, double length, double amplitude = 0.0) {
  const double k = 2.0 * std::numbers::pi / length;
  return SurfaceGeometry(ScalarField::sample(Grid::torus(n, length), [&](double x, double y) {
    return amplitude * std::cos(k * x) * std::cos(k * y);
  }));
}

/// Initial heat profiles shipped with the scenarios.
enum class InitialProfile {
  Constant,     // c1
  SphereCosine, // c1 + c2 cos(theta)
  TorusSineXY,  // c1 + c2 sin(2 pi x / L) sin(2 pi y / L)
  TorusSineX,   // c1 + c2 sin(2 pi x / L)
};

inline std::string_view to_string(InitialProfile p) {
  switch (p) {
    case InitialProfile::Constant: return "constant";
    case InitialProfile::SphereCosine: return "cosine";
    case InitialProfile::TorusSineXY: return "sine-xy";
    case InitialProfile::TorusSineX: return "sine-x";
  }
  return "constant";
}

inline InitialProfile parse_initial_profile(const std::string& s) {
  if (s == "constant") return InitialProfile::Constant;
  if (s == "cosine") return InitialProfile::SphereCosine;
  if (s == "sine-xy") return InitialProfile::TorusSineXY;
  if (s == "sine-x") return InitialProfile::TorusSineX;
  throw Error(ErrorKind::ConstraintViolation, "unknown initial profile '" + s + "'");
}

inline ScalarField initial_profile(const Grid& grid, InitialProfile profile, double c1, double c2) {
  const bool sphere = grid.kind == SurfaceKind::RotSphere;
  if ((profile == InitialProfile::SphereCosine && !sphere) ||
      ((profile == InitialProfile::TorusSineXY || profile == InitialProfile::TorusSineX) && sphere)) {
    throw Error(ErrorKind::ConstraintViolation,
                "initial profile '" + std::string(to_string(profile)) + "' does not fit a " +
                    std::string(to_string(grid.kind)) + " grid");
  }
  const double k = 2.0 * std::numbers::pi / grid.length;
  switch (profile) {
    case InitialProfile::Constant:
      return ScalarField(grid, c1);
    case InitialProfile::SphereCosine:
      return ScalarField::sample(grid, [&](double th) { return c1 + c2 * std::cos(th); });
    case InitialProfile::TorusSineXY:
      return ScalarField::sample(grid, [&](double x, double y) {
        return c1 + c2 * std::sin(k * x) * std::sin(k * y);
      });
    case InitialProfile::TorusSineX:
      return ScalarField::sample(grid, [&](double x, double) { return c1 + c2 * std::sin(k * x); });
  }
  return ScalarField(grid, c1);
}

}  // namespace harnackflow

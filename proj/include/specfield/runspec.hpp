#pragma once

#include <cstdint>
#include <string>

#include "specfield/mesh.hpp"
#include "specfield/spectral.hpp"

namespace specfield {

/// Mesh source mini-grammar:
///   interval:a,b,n    rect:lx,ly,nx,ny    icosphere:radius,subdivisions
///   file:path (format from extension; .off -> OFF, else node-element text)
struct MeshSpec {
  std::string text;
  Mesh build() const;
};

MeshSpec parse_mesh_spec(const std::string& text);

/// Gamma mini-grammar `name:key=val,...`:
///   matern:kappa=..,nu=..,sigma2=..[,d=..]   (d defaults to the mesh dim)
///   spde:kappa2=..,alpha=..                  (symbol g = (kappa2+x)^(alpha/2))
///   power:exponent=..                        (gamma = x^exponent)
///   const:value=..                           (constant; value=1 is white noise)
struct GammaSpec {
  std::string name;
  double kappa = 0, nu = 0, sigma2 = 1;  // matern
  double kappa2 = 0, alpha = 0;          // spde
  double exponent = 0;                   // power
  double value = 1;                      // const
  int d = 0;                             // 0 = take the mesh dimension

  SpectralFunction build(int mesh_dim) const;
  std::string format() const;  // canonical round-trip form
};

GammaSpec parse_gamma_spec(const std::string& text);

}  // namespace specfield

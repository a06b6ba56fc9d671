#pragma once

#include <vector>

#include "machlab/field.hpp"

namespace machlab {

/// The 2D tangential frame built from a defining function ψ:
///   X₀ = ψ₁∂₁ + ψ₂∂₂,  T = ψ₁∂₂ − ψ₂∂₁,
/// and on the collar ∂_k = ξ_k X₀ + η_k T.
struct TangentialFrame {
  VectorField b;         // coefficients of T
  VectorField x0_coeffs; // coefficients of X₀
  VectorField xi;        // (ξ₁, ξ₂)
  VectorField eta;       // (η₁, η₂)
  std::vector<char> valid_region;

  const Grid& grid() const { return b.grid(); }
  const GridPtr& grid_ptr() const { return b.grid_ptr(); }
};

}  // namespace machlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "specfield/mesh.hpp"

namespace specfield {

/// Sparse symmetric matrix (mass C, stiffness G, operator S).
///
/// Both triangles are stored so that matrix-vector products touch full rows;
/// symmetry holds exactly by construction (entries are mirrored from one
/// triangle) and explicit zeros are pruned after assembly.
class SymmetricSparse {
 public:
  SymmetricSparse() = default;

  /// Builds from triplets of the upper triangle (i <= j); duplicates are
  /// summed, the lower triangle is mirrored, exact zeros are dropped.
  static SymmetricSparse from_upper_triplets(
      int n, const std::vector<Eigen::Triplet<double>>& upper);

  /// Symmetrizes a dense matrix (entries (a+aᵀ)/2, |entry| <= drop_tol dropped).
  static SymmetricSparse from_dense(const Eigen::MatrixXd& a, double drop_tol = 0.0);

  int order() const { return static_cast<int>(mat_.rows()); }
  std::int64_t nnz() const { return static_cast<std::int64_t>(mat_.nonZeros()); }

  const Eigen::SparseMatrix<double>& matrix() const { return mat_; }
  double coeff(int i, int j) const { return mat_.coeff(i, j); }
  Eigen::VectorXd diagonal() const { return mat_.diagonal(); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(mat_); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return mat_ * v; }

  /// MatrixMarket coordinate symmetric format (lower triangle, 1-based).
  void write_matrix_market(const std::string& path) const;

 private:
  explicit SymmetricSparse(Eigen::SparseMatrix<double> m) : mat_(std::move(m)) {}
  Eigen::SparseMatrix<double> mat_;
};

/// Coefficients of L = kappa2 * Id - div(a grad).
///
/// `diffusion` holds one SPD dim x dim matrix per element (empty = identity
/// everywhere). On embedded surfaces the matrix acts in the element tangent
/// frame with the first axis along the first edge.
struct OperatorCoeffs {
  double kappa2 = 0.0;
  std::vector<Eigen::MatrixXd> diffusion;
};

/// Diagonal lumped mass D (row sums of C) and D^{-1/2}.
struct LumpedMass {
  Eigen::VectorXd diag;
  Eigen::VectorXd inv_sqrt;
};

/// Mass matrix C_ij = (psi_i, psi_j); exact closed-form P1 element integrals.
SymmetricSparse assemble_mass(const Mesh& mesh);

/// Stiffness G_ij = (L psi_i, psi_j) in weak form:
/// integral of (a grad psi_i . grad psi_j) + kappa2 * psi_i psi_j.
SymmetricSparse assemble_stiffness(const Mesh& mesh, const OperatorCoeffs& coeffs = {});

/// Restricts A to the interior vertices (Dirichlet elimination). Closed
/// meshes come back unchanged.
SymmetricSparse apply_dirichlet(const SymmetricSparse& a, const Mesh& mesh);

LumpedMass lump_mass(const SymmetricSparse& c);

/// S = D^{-1/2} G D^{-1/2}; same sparsity as G.
SymmetricSparse build_S(const LumpedMass& lumped, const SymmetricSparse& g);

/// Expands interior-vertex values to the full vertex set, zero on boundary.
Eigen::VectorXd scatter_interior(const Mesh& mesh, const Eigen::VectorXd& interior_values);

}  // namespace specfield

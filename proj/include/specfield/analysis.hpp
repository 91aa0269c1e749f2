#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "specfield/fem.hpp"
#include "specfield/sampler.hpp"
#include "specfield/spectral.hpp"

namespace specfield {

/// Dirichlet eigenpairs of -Laplace on [0,pi]^d, sorted by eigenvalue:
/// lambda_j = sum_k j_k^2, e_j(x) = (sqrt(2/pi))^d prod_k sin(j_k x_k).
struct AnalyticSpectrum {
  int dim = 1;
  std::vector<double> eigenvalues;             // ascending
  std::vector<std::array<int, 2>> indices;     // multi-index (j1, j2); j2 = 0 in 1D

  /// First `count` sorted eigenpairs of the d-dimensional box.
  static AnalyticSpectrum box(int d, int count);

  int size() const { return static_cast<int>(eigenvalues.size()); }

  /// Orthonormal eigenfunction j at a point (size-d vector).
  double eigenfunction(int j, const Eigen::VectorXd& x) const;
};

struct ConvergenceReport {
  std::vector<double> x;      // abscissae (h or N)
  std::vector<double> error;
  double slope = 0.0;               // OLS fit of log(error) vs log(x)
  double slope_half_width = 0.0;    // standard error of the fitted slope
  std::optional<double> reference_exponent;
};

/// Unbiased sample covariance of a batch (divides by n_samples - 1).
Eigen::MatrixXd empirical_covariance(const FieldSampleBatch& batch);

/// Tail sums T(N) = sum_{j>N} gamma(lambda_j)^2 for each N, with the log-log
/// slope and a reference exponent -(2*alpha*beta - 1) built from the fitted
/// spectrum growth alpha and gamma's beta metadata. Tails must stabilize to
/// relative 1e-6 within the spectrum (capped at 10^6 terms).
ConvergenceReport truncation_tail(const SpectralFunction& gamma, const AnalyticSpectrum& spectrum,
                                  const std::vector<int>& n_values);

/// Deterministic FE error study on a refinement family over [0,pi]^d with
/// Dirichlet elimination, via the exact decomposition
///   E||Z - Z_h||^2 = sum_{j<=N_h} ||gamma(lambda_j) e_j - gamma(lambda_jh) e_jh||^2
///                  + sum_{j>N_h} gamma(lambda_j)^2.
struct FemErrorReport {
  std::vector<double> h;
  std::vector<double> total_error;        // sqrt of the full sum
  std::vector<double> mode_error;         // discrete-mismatch part (squared sum)
  std::vector<double> truncation_error;   // tail part (squared sum)
  std::vector<double> eigenvalue_error;   // max_{j<=j_cap} |lambda_jh - lambda_j|
  ConvergenceReport total;                // log total_error vs log h
  ConvergenceReport eigenvalue;           // log eigenvalue_error vs log h
};

/// sign_flip_seed != 0 randomly flips discrete eigenvector signs before the
/// inner products; the result must not depend on it (alignment invariance).
FemErrorReport fem_spectral_error(const std::vector<Mesh>& mesh_family,
                                  const SpectralFunction& gamma, int truncation_cap,
                                  bool exact_mass = false, int eigenvalue_j_cap = 5,
                                  std::uint64_t sign_flip_seed = 0);

/// Empirical checks of the eigenvalue-growth / gamma-decay / mesh-dimension
/// assumptions. Report-only; nothing throws.
struct AssumptionAudit {
  double fitted_alpha = 0.0;       // log lambda_j vs log j
  double weyl_alpha = 0.0;         // d/2 as printed in the source material
  bool alpha_discrepancy = false;  // fitted vs weyl disagree beyond 5%
  double gamma_tail_sup = 0.0;     // sup |gamma(lambda)| lambda^beta on the tail
  bool gamma_tail_bounded = false;
  double fitted_dtilde = 0.0;      // log N_h vs log 1/h
  bool eigen_lower_bound_ok = true;  // lambda_jh >= lambda_j - 1e-9 (exact mode)
  double min_eigen_gap = 0.0;        // min_j (lambda_jh - lambda_j)
};

struct AuditInputs {
  std::vector<double> h_values;              // mesh family sizes
  std::vector<int> n_interior;               // matching FE space dimensions
  std::vector<double> discrete_eigenvalues;  // ascending, exact-mass mode; may be empty
};

AssumptionAudit assumption_audit(const AnalyticSpectrum& spectrum, const SpectralFunction& gamma,
                                 const AuditInputs& inputs);

/// OLS slope of log(y) vs log(x); returns {slope, stderr of slope}.
std::pair<double, double> fit_loglog_slope(const std::vector<double>& x,
                                           const std::vector<double>& y);

}  // namespace specfield

#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "specfield/fem.hpp"

namespace specfield {

/// Scalar spectral function gamma applied to the operator spectrum.
/// beta / deriv_a are optional tail-decay exponents used by the analysis
/// module (|gamma(x)| ~ x^-beta, |gamma'(x)| ~ x^-deriv_a) when known.
struct SpectralFunction {
  std::function<double(double)> eval;
  std::optional<double> beta;
  std::optional<double> deriv_a;
  std::string label;

  double operator()(double lambda) const { return eval(lambda); }
};

struct SpectralInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Truncated shifted Chebyshev series of gamma on [lo, hi].
///
/// Convention: gamma(x) ~ c0/2 + sum_{k>=1} c_k T_k(t) with
/// t = (2x - lo - hi)/(hi - lo) (first coefficient halved).
struct ChebyshevExpansion {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> coeffs;  // c_0 .. c_K

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  double tail_coefficient() const { return coeffs.empty() ? 0.0 : std::abs(coeffs.back()); }

  /// Clenshaw evaluation of the series at lambda.
  double evaluate(double lambda) const;
};

/// gamma = sqrt(f) for the Matern spectral density
/// f(x) = sigma2 * c_norm * (kappa^2 + x)^-(nu + d/2), normalized so the
/// field covariance at lag 0 equals sigma2.
SpectralFunction matern_spectral(double kappa, double nu, int d, double sigma2);

/// gamma = 1/g for an SPDE symbol g.
SpectralFunction from_spde_symbol(const SpectralFunction& g);

/// gamma(x) = x^exponent.
SpectralFunction power_spectral(double exponent);

/// gamma identically equal to c (c = 1 is white noise).
SpectralFunction constant_spectral(double c);

/// Gershgorin enclosure of the spectrum of S, lower end clamped at 0.
SpectralInterval gershgorin_bound(const SymmetricSparse& s);

/// Chebyshev coefficients of gamma at order K by DCT-II over the K+1
/// first-kind nodes (direct sum below K = 64, FFT above). The expansion
/// interpolates gamma at the nodes. Degenerate intervals are widened to
/// [lo, lo + eps].
ChebyshevExpansion chebyshev_fit(const SpectralFunction& gamma, SpectralInterval interval, int order);

/// Thrown by choose_order when the order cap is hit before reaching tol.
struct OrderCapError : std::runtime_error {
  OrderCapError(const std::string& what, int order, double achieved)
      : std::runtime_error(what), order(order), achieved_error(achieved) {}
  int order;
  double achieved_error;
};

struct OrderSearch {
  int order = 0;
  double achieved_error = 0.0;
  std::vector<std::pair<int, double>> path;  // (K, sup error) along the ladder
};

/// Smallest K on the doubling ladder 16, 32, ... , 2^15 whose expansion has
/// sup |gamma - P_K| <= tol * max(1, sup|gamma|) on a 10(K+1)-point grid.
OrderSearch choose_order_search(const SpectralFunction& gamma, SpectralInterval interval, double tol);
int choose_order(const SpectralFunction& gamma, SpectralInterval interval, double tol);

/// u = P(S) v via the three-term Chebyshev recurrence: exactly K sparse
/// matrix-vector products and three rolling vectors. The expansion interval
/// must enclose the Gershgorin interval of S.
Eigen::VectorXd apply_chebyshev(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                                const Eigen::VectorXd& v);

/// Column-wise batch version (one recurrence over a block of vectors).
Eigen::MatrixXd apply_chebyshev(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                                const Eigen::MatrixXd& v);

}  // namespace specfield

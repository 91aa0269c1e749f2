#include "specfield/spectral.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace specfield {

namespace {

constexpr int kOrderLadderStart = 16;
constexpr int kOrderCap = 1 << 15;
constexpr int kDirectDctLimit = 64;  // below this, skip the FFT

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// fftw plan creation/destruction is not thread-safe
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> dct2(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  std::vector<double> out(n);
  if (n < kDirectDctLimit) {
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        acc += values[j] * std::cos(k * std::numbers::pi * (j + 0.5) / n);
      out[k] = 2.0 * acc;
    }
    return out;
  }
  std::vector<double> in(values);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT10, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

SpectralInterval widen_if_degenerate(SpectralInterval iv) {
  require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.hi >= iv.lo,
          "spectral interval must be finite with hi >= lo");
  const double eps = 1e-12 * std::max(1.0, std::abs(iv.lo));
  if (iv.hi - iv.lo < eps) iv.hi = iv.lo + eps;
  return iv;
}

}  // namespace

double ChebyshevExpansion::evaluate(double lambda) const {
  if (coeffs.empty()) return 0.0;
  const double t = (2.0 * lambda - lo - hi) / (hi - lo);
  double b1 = 0.0, b2 = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) {
    const double b = 2.0 * t * b1 - b2 + coeffs[k];
    b2 = b1;
    b1 = b;
  }
  return t * b1 - b2 + 0.5 * coeffs[0];
}

SpectralFunction matern_spectral(double kappa, double nu, int d, double sigma2) {
  require(kappa > 0.0 && std::isfinite(kappa), "matern: kappa must be positive");
  require(nu > 0.0 && std::isfinite(nu), "matern: nu must be positive");
  require(sigma2 > 0.0 && std::isfinite(sigma2), "matern: sigma2 must be positive");
  require(d >= 1 && d <= 3, "matern: dimension must be 1, 2 or 3");
  // Density normalized so that the covariance at lag 0 equals sigma2:
  // f(x) = sigma2 * 2^d pi^{d/2} Gamma(nu + d/2) kappa^{2 nu} / Gamma(nu)
  //        * (kappa^2 + x)^-(nu + d/2)
  const double c_norm = std::pow(2.0, d) * std::pow(std::numbers::pi, 0.5 * d) *
                        std::tgamma(nu + 0.5 * d) / std::tgamma(nu) * std::pow(kappa, 2.0 * nu);
  const double exponent = nu + 0.5 * d;
  const double kappa2 = kappa * kappa;
  const double scale = sigma2 * c_norm;
  SpectralFunction gamma;
  gamma.eval = [scale, kappa2, exponent](double x) {
    return std::sqrt(scale * std::pow(kappa2 + x, -exponent));
  };
  gamma.beta = 0.5 * nu + 0.25 * d;
  gamma.deriv_a = *gamma.beta + 1.0;
  gamma.label = "matern(kappa=" + std::to_string(kappa) + ",nu=" + std::to_string(nu) +
                ",d=" + std::to_string(d) + ",sigma2=" + std::to_string(sigma2) + ")";
  return gamma;
}

SpectralFunction from_spde_symbol(const SpectralFunction& g) {
  require(static_cast<bool>(g.eval), "spde symbol has no evaluator");
  SpectralFunction gamma;
  auto g_eval = g.eval;
  // zero crossings of g surface as non-finite values at fit time
  gamma.eval = [g_eval](double x) { return 1.0 / g_eval(x); };
  if (g.beta) gamma.beta = -*g.beta;
  gamma.label = g.label.empty() ? "1/g" : "1/(" + g.label + ")";
  return gamma;
}

SpectralFunction power_spectral(double exponent) {
  require(std::isfinite(exponent), "power exponent must be finite");
  SpectralFunction gamma;
  gamma.eval = [exponent](double x) { return std::pow(x, exponent); };
  if (exponent < 0.0) {
    gamma.beta = -exponent;
    gamma.deriv_a = -exponent + 1.0;
  }
  gamma.label = "power(" + std::to_string(exponent) + ")";
  return gamma;
}

SpectralFunction constant_spectral(double c) {
  require(std::isfinite(c), "constant value must be finite");
  SpectralFunction gamma;
  gamma.eval = [c](double) { return c; };
  gamma.label = "const(" + std::to_string(c) + ")";
  return gamma;
}

SpectralInterval gershgorin_bound(const SymmetricSparse& s) {
  require(s.order() >= 1, "gershgorin needs a nonempty matrix");
  const auto& m = s.matrix();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(s.order());
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(s.order());
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] = it.value();
      else
        radius[it.row()] += std::abs(it.value());
    }
  SpectralInterval iv;
  iv.lo = std::max(0.0, (diag - radius).minCoeff());
  iv.hi = (diag + radius).maxCoeff();
  return iv;
}

ChebyshevExpansion chebyshev_fit(const SpectralFunction& gamma, SpectralInterval interval,
                                 int order) {
  require(order >= 0, "chebyshev order must be nonnegative");
  require(static_cast<bool>(gamma.eval), "spectral function has no evaluator");
  interval = widen_if_degenerate(interval);
  const int n = order + 1;
  const double mid = 0.5 * (interval.lo + interval.hi);
  const double half = 0.5 * (interval.hi - interval.lo);
  std::vector<double> values(n);
  for (int j = 0; j < n; ++j) {
    const double x = std::cos(std::numbers::pi * (j + 0.5) / n);
    const double lambda = mid + half * x;
    values[j] = gamma(lambda);
    if (!std::isfinite(values[j]))
      throw std::runtime_error("non-finite gamma at Chebyshev node lambda=" +
                               std::to_string(lambda));
  }
  std::vector<double> transformed = dct2(values);
  ChebyshevExpansion expansion;
  expansion.lo = interval.lo;
  expansion.hi = interval.hi;
  expansion.coeffs.resize(n);
  for (int k = 0; k < n; ++k) expansion.coeffs[k] = transformed[k] / n;
  return expansion;
}

namespace {

// max |gamma - P| and max |gamma| over a uniform grid (endpoints included)
std::pair<double, double> grid_errors(const SpectralFunction& gamma,
                                      const ChebyshevExpansion& expansion, int n_points) {
  double err = 0.0, sup = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double lambda =
        expansion.lo + (expansion.hi - expansion.lo) * static_cast<double>(i) / (n_points - 1);
    const double g = gamma(lambda);
    if (!std::isfinite(g))
      throw std::runtime_error("non-finite gamma at lambda=" + std::to_string(lambda));
    err = std::max(err, std::abs(g - expansion.evaluate(lambda)));
    sup = std::max(sup, std::abs(g));
  }
  return {err, sup};
}

}  // namespace

OrderSearch choose_order_search(const SpectralFunction& gamma, SpectralInterval interval,
                                double tol) {
  require(std::isfinite(tol) && tol > 0.0, "tolerance must be positive and finite");
  interval = widen_if_degenerate(interval);
  OrderSearch search;
  for (int k = kOrderLadderStart; k <= kOrderCap; k *= 2) {
    const ChebyshevExpansion expansion = chebyshev_fit(gamma, interval, k);
    const auto [err, sup] = grid_errors(gamma, expansion, 10 * (k + 1));
    search.order = k;
    search.achieved_error = err;
    search.path.emplace_back(k, err);
    if (err <= tol * std::max(1.0, sup)) return search;
  }
  throw OrderCapError("chebyshev order cap " + std::to_string(kOrderCap) +
                          " reached; achieved sup error " +
                          std::to_string(search.achieved_error) + " > tol " + std::to_string(tol),
                      kOrderCap, search.achieved_error);
}

int choose_order(const SpectralFunction& gamma, SpectralInterval interval, double tol) {
  return choose_order_search(gamma, interval, tol).order;
}

namespace {

void check_enclosure(const SymmetricSparse& s, const ChebyshevExpansion& expansion) {
  const SpectralInterval bound = gershgorin_bound(s);
  const double slack =
      1e-9 * std::max({1.0, std::abs(expansion.lo), std::abs(expansion.hi)});
  if (bound.lo < expansion.lo - slack || bound.hi > expansion.hi + slack)
    throw std::invalid_argument(
        "expansion interval [" + std::to_string(expansion.lo) + ", " +
        std::to_string(expansion.hi) + "] does not enclose the Gershgorin interval [" +
        std::to_string(bound.lo) + ", " + std::to_string(bound.hi) + "]");
}

// Three-term recurrence on a block of vectors; exactly K products with S.
Eigen::MatrixXd apply_block(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                            const Eigen::MatrixXd& v) {
  const auto& m = s.matrix();
  const double alpha = 2.0 / (expansion.hi - expansion.lo);
  const double mu = (expansion.hi + expansion.lo) / (expansion.hi - expansion.lo);
  const int order = expansion.order();

  Eigen::MatrixXd result = (0.5 * expansion.coeffs[0]) * v;
  if (order == 0) return result;

  Eigen::MatrixXd t_prev = v;
  Eigen::MatrixXd t_curr(v.rows(), v.cols());
  t_curr.noalias() = alpha * (m * v);
  t_curr -= mu * v;
  result += expansion.coeffs[1] * t_curr;

  Eigen::MatrixXd t_next(v.rows(), v.cols());
  for (int k = 2; k <= order; ++k) {
    t_next.noalias() = (2.0 * alpha) * (m * t_curr);
    t_next -= (2.0 * mu) * t_curr;
    t_next -= t_prev;
    result += expansion.coeffs[k] * t_next;
    t_prev.swap(t_curr);
    t_curr.swap(t_next);
  }
  return result;
}

}  // namespace

Eigen::VectorXd apply_chebyshev(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                                const Eigen::VectorXd& v) {
  require(s.order() == v.size(), "matrix order and vector length differ");
  require(!expansion.coeffs.empty(), "empty expansion");
  check_enclosure(s, expansion);
  return apply_block(s, expansion, v);
}

Eigen::MatrixXd apply_chebyshev(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                                const Eigen::MatrixXd& v) {
  require(s.order() == v.rows(), "matrix order and block row count differ");
  require(!expansion.coeffs.empty(), "empty expansion");
  check_enclosure(s, expansion);
  return apply_block(s, expansion, v);
}

}  // namespace specfield

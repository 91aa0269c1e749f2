#include "specfield/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "specfield/rng.hpp"

namespace specfield {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Gauss-Legendre nodes/weights on [0, 1] by Newton iteration on P_n.
struct GaussRule {
  std::vector<double> nodes, weights;
};

GaussRule gauss_legendre_unit(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = 0.5 * (x + 1.0);
    rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // already scaled for [0,1]
  }
  return rule;
}

// Tail sum sum_{j>n} gamma(lambda_j)^2 over doubling windows. Converged when
// the geometric continuation of the windows (or, at the cutoff, the integral
// test with the empirical window decay exponent) estimates the remainder
// below 1e-6 * (1 + total).
double tail_sum(const SpectralFunction& gamma, const AnalyticSpectrum& spectrum, int n) {
  const std::int64_t cutoff = spectrum.size();
  require(n >= 1 && n < cutoff, "tail start must lie inside the spectrum");
  double total = 0.0;
  double full_older = -1.0, full_newer = -1.0, last_term = 0.0;
  std::int64_t begin = n, width = n;
  while (begin < cutoff) {
    const std::int64_t end = std::min(begin + width, cutoff);
    double window = 0.0;
    for (std::int64_t j = begin; j < end; ++j) {
      const double g = gamma(spectrum.eigenvalues[j]);
      if (!std::isfinite(g))
        throw std::runtime_error("non-finite gamma in tail at lambda=" +
                                 std::to_string(spectrum.eigenvalues[j]));
      last_term = g * g;
      window += last_term;
    }
    total += window;
    if (window == 0.0) return total;  // compactly supported gamma
    if (end - begin == width) {       // full window
      if (full_newer > 0.0) {
        const double ratio = window / full_newer;
        if (ratio < 1.0 && window * ratio / (1.0 - ratio) <= 1e-6 * (1.0 + total)) return total;
      }
      full_older = full_newer;
      full_newer = window;
    }
    begin = end;
    width *= 2;
  }
  // cutoff reached: integral-test estimate with p from the window decay
  if (full_older > 0.0 && full_newer > 0.0 && full_newer < full_older) {
    const double p = 1.0 - std::log2(full_newer / full_older);
    if (p > 1.0) {
      const double remainder = last_term * static_cast<double>(cutoff) / (p - 1.0);
      if (remainder <= 1e-6 * (1.0 + total)) return total;
    }
  }
  throw std::runtime_error("non-convergent spectral tail at cutoff " + std::to_string(cutoff));
}

}  // namespace

AnalyticSpectrum AnalyticSpectrum::box(int d, int count) {
  require(d == 1 || d == 2, "analytic spectrum supports d = 1 or 2");
  require(count >= 1, "spectrum size must be positive");
  AnalyticSpectrum spectrum;
  spectrum.dim = d;
  if (d == 1) {
    spectrum.eigenvalues.resize(count);
    spectrum.indices.resize(count);
    for (int j = 1; j <= count; ++j) {
      spectrum.eigenvalues[j - 1] = static_cast<double>(j) * j;
      spectrum.indices[j - 1] = {j, 0};
    }
    return spectrum;
  }
  int m = static_cast<int>(std::sqrt(4.0 * count / std::numbers::pi)) + 2;
  for (;;) {
    std::vector<std::pair<double, std::array<int, 2>>> pairs;
    const double cap = static_cast<double>(m) * m;
    pairs.reserve(static_cast<std::size_t>(m) * m);
    for (int j = 1; j <= m; ++j)
      for (int k = 1; k <= m; ++k) {
        const double lambda = static_cast<double>(j) * j + static_cast<double>(k) * k;
        if (lambda <= cap) pairs.push_back({lambda, {j, k}});
      }
    if (static_cast<int>(pairs.size()) >= count) {
      std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
      });
      pairs.resize(count);
      spectrum.eigenvalues.reserve(count);
      spectrum.indices.reserve(count);
      for (const auto& [lambda, idx] : pairs) {
        spectrum.eigenvalues.push_back(lambda);
        spectrum.indices.push_back(idx);
      }
      return spectrum;
    }
    m += m / 2 + 1;
  }
}

double AnalyticSpectrum::eigenfunction(int j, const Eigen::VectorXd& x) const {
  require(j >= 0 && j < size(), "eigenfunction index out of range");
  require(x.size() == dim, "point dimension mismatch");
  const double norm = std::pow(std::sqrt(2.0 / std::numbers::pi), dim);
  double value = norm * std::sin(indices[j][0] * x[0]);
  if (dim == 2) value *= std::sin(indices[j][1] * x[1]);
  return value;
}

Eigen::MatrixXd empirical_covariance(const FieldSampleBatch& batch) {
  require(batch.n_samples() >= 2, "empirical covariance needs at least 2 samples");
  const Eigen::VectorXd mean = batch.weights.rowwise().mean();
  const Eigen::MatrixXd centered = batch.weights.colwise() - mean;
  return (centered * centered.transpose()) / (batch.n_samples() - 1.0);
}

std::pair<double, double> fit_loglog_slope(const std::vector<double>& x,
                                           const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs >= 2 matched points");
  const int n = static_cast<int>(x.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "slope fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0.0, "slope fit needs distinct abscissae");
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ly[i] - my - slope * (lx[i] - mx);
    rss += r * r;
  }
  const double half_width = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return {slope, half_width};
}

ConvergenceReport truncation_tail(const SpectralFunction& gamma, const AnalyticSpectrum& spectrum,
                                  const std::vector<int>& n_values) {
  require(gamma.beta.has_value(), "truncation tail needs gamma's decay exponent (beta)");
  require(n_values.size() >= 4, "truncation study needs at least 4 truncation levels");
  ConvergenceReport report;
  report.x.reserve(n_values.size());
  report.error.reserve(n_values.size());
  for (int n : n_values) {
    report.x.push_back(static_cast<double>(n));
    report.error.push_back(tail_sum(gamma, spectrum, n));
  }
  // fit over the positive tail values (compactly supported gammas hit 0)
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < report.x.size(); ++i)
    if (report.error[i] > 0.0) {
      fx.push_back(report.x[i]);
      fy.push_back(report.error[i]);
    }
  if (fx.size() >= 2) {
    const auto [slope, hw] = fit_loglog_slope(fx, fy);
    report.slope = slope;
    report.slope_half_width = hw;
  }
  // reference exponent -(2*alpha*beta - 1) with alpha fitted from the
  // sorted spectrum growth (see assumption_audit for the Weyl-value check)
  {
    std::vector<double> js(spectrum.size()), ls(spectrum.size());
    for (int j = 0; j < spectrum.size(); ++j) {
      js[j] = j + 1.0;
      ls[j] = spectrum.eigenvalues[j];
    }
    const auto [alpha, hw] = fit_loglog_slope(js, ls);
    (void)hw;
    report.reference_exponent = -(2.0 * alpha * (*gamma.beta) - 1.0);
  }
  return report;
}

namespace {

// Exact integrals of the 1D hat functions against sin(j x): contributions of
// the rising ((x-a)/L) and falling ((b-x)/L) halves over a segment [a, b].
double hat_rise_sine(double a, double b, int j) {
  const double len = b - a;
  return -std::cos(j * b) / j + (std::sin(j * b) - std::sin(j * a)) / (static_cast<double>(j) * j * len);
}

double hat_fall_sine(double a, double b, int j) {
  return (std::cos(j * a) - std::cos(j * b)) / j - hat_rise_sine(a, b, j);
}

// Rows: interior vertices (eliminated numbering); columns: analytic modes.
// B[i][j] = (psi_i, e_j)_H, exact in 1D, collapsed 10x10 Gauss in 2D.
Eigen::MatrixXd hat_mode_inner_products(const Mesh& mesh, const AnalyticSpectrum& spectrum,
                                        int n_modes) {
  const auto interior = interior_vertices(mesh);
  std::vector<int> pos(mesh.n_vertices(), -1);
  for (int k = 0; k < static_cast<int>(interior.size()); ++k) pos[interior[k]] = k;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<int>(interior.size()), n_modes);
  const double norm = std::pow(std::sqrt(2.0 / std::numbers::pi), mesh.dim);

  if (mesh.dim == 1) {
    for (int e = 0; e < mesh.n_elements(); ++e) {
      int va = mesh.elements(e, 0), vb = mesh.elements(e, 1);
      double xa = mesh.vertices(va, 0), xb = mesh.vertices(vb, 0);
      if (xa > xb) {
        std::swap(va, vb);
        std::swap(xa, xb);
      }
      for (int m = 0; m < n_modes; ++m) {
        const int j = spectrum.indices[m][0];
        if (pos[va] >= 0) b(pos[va], m) += norm * hat_fall_sine(xa, xb, j);
        if (pos[vb] >= 0) b(pos[vb], m) += norm * hat_rise_sine(xa, xb, j);
      }
    }
    return b;
  }

  static const GaussRule rule = gauss_legendre_unit(10);
  const int nq = static_cast<int>(rule.nodes.size());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const Eigen::Vector2d v0 = mesh.vertices.row(mesh.elements(e, 0)).transpose();
    const Eigen::Vector2d e1 =
        mesh.vertices.row(mesh.elements(e, 1)).transpose() - v0;
    const Eigen::Vector2d e2 =
        mesh.vertices.row(mesh.elements(e, 2)).transpose() - v0;
    const double jac = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    for (int a = 0; a < nq; ++a) {
      const double u = rule.nodes[a];
      for (int c = 0; c < nq; ++c) {
        const double v = rule.nodes[c] * (1.0 - u);  // Duffy collapse
        const double w = rule.weights[a] * rule.weights[c] * (1.0 - u) * jac;
        const double lambda[3] = {1.0 - u - v, u, v};
        const Eigen::Vector2d x = v0 + u * e1 + v * e2;
        for (int m = 0; m < n_modes; ++m) {
          const double mode =
              norm * std::sin(spectrum.indices[m][0] * x.x()) * std::sin(spectrum.indices[m][1] * x.y());
          for (int k = 0; k < 3; ++k) {
            const int p = pos[mesh.elements(e, k)];
            if (p >= 0) b(p, m) += w * lambda[k] * mode;
          }
        }
      }
    }
  }
  return b;
}

void check_box_domain(const Mesh& mesh) {
  const double pi = std::numbers::pi;
  const Eigen::VectorXd lo = mesh.vertices.colwise().minCoeff();
  const Eigen::VectorXd hi = mesh.vertices.colwise().maxCoeff();
  for (int c = 0; c < mesh.embed_dim; ++c)
    require(std::abs(lo[c]) < 1e-9 && std::abs(hi[c] - pi) < 1e-9,
            "fem_spectral_error expects meshes of [0,pi]^d");
  require(mesh.dim == mesh.embed_dim, "fem_spectral_error expects flat meshes");
}

}  // namespace

FemErrorReport fem_spectral_error(const std::vector<Mesh>& mesh_family,
                                  const SpectralFunction& gamma, int truncation_cap,
                                  bool exact_mass, int eigenvalue_j_cap,
                                  std::uint64_t sign_flip_seed) {
  require(mesh_family.size() >= 4, "need at least 4 refinement levels");
  require(truncation_cap >= 2, "truncation cap too small");
  const int d = mesh_family.front().dim;
  for (const auto& mesh : mesh_family) {
    require(mesh.dim == d, "mixed dimensions in mesh family");
    check_box_domain(mesh);
  }

  // one analytic spectrum, long enough for every level and for the tails
  int max_interior = 0;
  for (const auto& mesh : mesh_family)
    max_interior = std::max(max_interior, static_cast<int>(interior_vertices(mesh).size()));
  const int spectrum_size =
      std::min(std::max(truncation_cap, 4 * max_interior), 1000000);
  const AnalyticSpectrum spectrum = AnalyticSpectrum::box(d, spectrum_size);

  FemErrorReport report;
  for (const auto& mesh : mesh_family) {
    const SymmetricSparse mass = apply_dirichlet(assemble_mass(mesh), mesh);
    const SymmetricSparse stiffness = apply_dirichlet(assemble_stiffness(mesh), mesh);
    const DenseOracle oracle = dense_oracle(mass, stiffness, gamma, exact_mass);
    const int n_modes = mass.order();
    require(n_modes <= spectrum.size(), "analytic spectrum shorter than the FE space");

    const Eigen::MatrixXd b = hat_mode_inner_products(mesh, spectrum, n_modes);
    // coefficients of the discrete eigenfunctions over the interior hats
    Eigen::MatrixXd coeffs = oracle.c_inv_sqrt * oracle.eigenvectors;
    if (sign_flip_seed != 0) {
      SplitMix64 flips(sign_flip_seed);
      for (int j = 0; j < coeffs.cols(); ++j)
        if (flips.next_u64() & 1ULL) coeffs.col(j) = -coeffs.col(j);
    }
    const Eigen::MatrixXd inner = b.transpose() * coeffs;  // (e_j, e_k,h)_H
    Eigen::VectorXd fe_norm_sq(n_modes);                   // ||e_j,h||_H^2
    for (int j = 0; j < n_modes; ++j)
      fe_norm_sq[j] = coeffs.col(j).dot(mass.apply(coeffs.col(j)));

    // multiplicity clusters of the analytic spectrum; match by max overlap
    std::vector<int> match(n_modes);
    int cluster_begin = 0;
    while (cluster_begin < n_modes) {
      int cluster_end = cluster_begin + 1;
      while (cluster_end < n_modes &&
             spectrum.eigenvalues[cluster_end] - spectrum.eigenvalues[cluster_begin] <=
                 1e-8 * spectrum.eigenvalues[cluster_begin])
        ++cluster_end;
      const int size = cluster_end - cluster_begin;
      if (size == 1) {
        match[cluster_begin] = cluster_begin;
      } else {
        std::vector<bool> used_analytic(size, false), used_discrete(size, false);
        for (int pick = 0; pick < size; ++pick) {
          double best = -1.0;
          int best_a = -1, best_d = -1;
          for (int a = 0; a < size; ++a) {
            if (used_analytic[a]) continue;
            for (int dd = 0; dd < size; ++dd) {
              if (used_discrete[dd]) continue;
              const double overlap =
                  std::abs(inner(cluster_begin + a, cluster_begin + dd));
              if (overlap > best) {
                best = overlap;
                best_a = a;
                best_d = dd;
              }
            }
          }
          used_analytic[best_a] = true;
          used_discrete[best_d] = true;
          match[cluster_begin + best_a] = cluster_begin + best_d;
        }
      }
      cluster_begin = cluster_end;
    }

    double mode_sum = 0.0;
    for (int j = 0; j < n_modes; ++j) {
      const int k = match[j];
      const double ga = gamma(spectrum.eigenvalues[j]);
      const double gd = gamma(oracle.eigenvalues[k]);
      if (!std::isfinite(ga) || !std::isfinite(gd))
        throw std::runtime_error("non-finite gamma in mode error");
      // sign-align the discrete eigenfunction: (e_j, e_j,h) >= 0
      const double cross = std::abs(inner(j, k));
      mode_sum += ga * ga + gd * gd * fe_norm_sq[k] - 2.0 * ga * gd * cross;
    }
    const double tail =
        n_modes < spectrum.size() ? tail_sum(gamma, spectrum, n_modes) : 0.0;

    double eig_err = 0.0;
    for (int j = 0; j < std::min(eigenvalue_j_cap, n_modes); ++j)
      eig_err = std::max(eig_err,
                         std::abs(oracle.eigenvalues[j] - spectrum.eigenvalues[j]));

    report.h.push_back(mesh_stats(mesh).h);
    report.mode_error.push_back(mode_sum);
    report.truncation_error.push_back(tail);
    report.total_error.push_back(std::sqrt(std::max(0.0, mode_sum + tail)));
    report.eigenvalue_error.push_back(eig_err);
  }

  auto fill = [](ConvergenceReport& r, const std::vector<double>& h,
                 const std::vector<double>& err) {
    r.x = h;
    r.error = err;
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (err[i] > 0.0) {
        fx.push_back(h[i]);
        fy.push_back(err[i]);
      }
    if (fx.size() >= 2) {
      const auto [slope, hw] = fit_loglog_slope(fx, fy);
      r.slope = slope;
      r.slope_half_width = hw;
    }
  };
  fill(report.total, report.h, report.total_error);
  fill(report.eigenvalue, report.h, report.eigenvalue_error);
  return report;
}

AssumptionAudit assumption_audit(const AnalyticSpectrum& spectrum, const SpectralFunction& gamma,
                                 const AuditInputs& inputs) {
  require(spectrum.size() >= 2, "audit needs a nonempty spectrum");
  AssumptionAudit audit;

  {
    std::vector<double> js(spectrum.size()), ls(spectrum.size());
    for (int j = 0; j < spectrum.size(); ++j) {
      js[j] = j + 1.0;
      ls[j] = spectrum.eigenvalues[j];
    }
    audit.fitted_alpha = fit_loglog_slope(js, ls).first;
  }
  audit.weyl_alpha = 0.5 * spectrum.dim;
  audit.alpha_discrepancy =
      std::abs(audit.fitted_alpha - audit.weyl_alpha) > 0.05 * std::max(1.0, audit.weyl_alpha);

  if (gamma.beta) {
    const int n = spectrum.size();
    double sup_mid = 0.0, sup_tail = 0.0;
    for (int j = n / 2; j < 3 * n / 4; ++j)
      sup_mid = std::max(sup_mid, std::abs(gamma(spectrum.eigenvalues[j])) *
                                      std::pow(spectrum.eigenvalues[j], *gamma.beta));
    for (int j = 3 * n / 4; j < n; ++j)
      sup_tail = std::max(sup_tail, std::abs(gamma(spectrum.eigenvalues[j])) *
                                        std::pow(spectrum.eigenvalues[j], *gamma.beta));
    audit.gamma_tail_sup = std::max(sup_mid, sup_tail);
    audit.gamma_tail_bounded = sup_tail <= 1.25 * sup_mid + 1e-300;
  }

  if (inputs.h_values.size() >= 2 && inputs.h_values.size() == inputs.n_interior.size()) {
    std::vector<double> inv_h(inputs.h_values.size()), nh(inputs.h_values.size());
    for (std::size_t i = 0; i < inputs.h_values.size(); ++i) {
      inv_h[i] = 1.0 / inputs.h_values[i];
      nh[i] = static_cast<double>(inputs.n_interior[i]);
    }
    audit.fitted_dtilde = fit_loglog_slope(inv_h, nh).first;
  }

  if (!inputs.discrete_eigenvalues.empty()) {
    const int n = std::min<int>(static_cast<int>(inputs.discrete_eigenvalues.size()),
                                spectrum.size());
    double min_gap = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      const double gap = inputs.discrete_eigenvalues[j] - spectrum.eigenvalues[j];
      min_gap = std::min(min_gap, gap);
      if (gap < -1e-9 * std::max(1.0, spectrum.eigenvalues[j])) ok = false;
    }
    audit.min_eigen_gap = min_gap;
    audit.eigen_lower_bound_ok = ok;
  }
  return audit;
}

}  // namespace specfield

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Each criterion carries a wall-clock budget that is part
// of the pass condition.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "specfield/analysis.hpp"
#include "specfield/fem.hpp"
#include "specfield/mesh.hpp"
#include "specfield/rng.hpp"
#include "specfield/sampler.hpp"
#include "specfield/spectral.hpp"

using namespace specfield;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct System {
  SymmetricSparse mass;
  SymmetricSparse stiffness;
  LumpedMass lumped;
  SymmetricSparse s;
};

System dirichlet_system(const Mesh& mesh) {
  System sys;
  sys.mass = apply_dirichlet(assemble_mass(mesh), mesh);
  sys.stiffness = apply_dirichlet(assemble_stiffness(mesh), mesh);
  sys.lumped = lump_mass(sys.mass);
  sys.s = build_S(sys.lumped, sys.stiffness);
  return sys;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome covariance_exactness() {
  const Mesh mesh = build_interval_mesh(0, kPi, 51);  // 50 interior vertices
  const System sys = dirichlet_system(mesh);
  const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);

  SamplerConfig cfg;
  cfg.seed = 20250817;
  cfg.n_samples = 200000;
  cfg.tol = 1e-8;
  cfg.use_dirichlet = true;
  const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, gamma, cfg);
  const Eigen::MatrixXd emp = empirical_covariance(batch);
  const Eigen::MatrixXd& ref = dense_oracle(sys.mass, sys.stiffness, gamma, false).sigma_z;

  double worst_ratio = 0.0;
  for (int i = 0; i < emp.rows(); ++i)
    for (int j = 0; j < emp.cols(); ++j) {
      const double se =
          std::sqrt((ref(i, i) * ref(j, j) + ref(i, j) * ref(i, j)) / cfg.n_samples);
      worst_ratio = std::max(worst_ratio, std::abs(emp(i, j) - ref(i, j)) / se);
    }
  const double frob = (emp - ref).norm() / ref.norm();

  Outcome out;
  out.pass = worst_ratio <= 5.0 && frob <= 0.02;
  out.detail = "max |err|/SE = " + fmt(worst_ratio) + " (<= 5), frobenius_rel = " + fmt(frob) +
               " (<= 0.02), n=50, 2e5 samples";
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome chebyshev_fidelity() {
  Outcome out;
  out.pass = true;
  double worst = 0.0;

  auto check_operator = [&](const SymmetricSparse& s, const SpectralFunction& gamma,
                            std::uint64_t seed) {
    const SpectralInterval iv = gershgorin_bound(s);
    const ChebyshevExpansion expansion = chebyshev_fit(gamma, iv, choose_order(gamma, iv, 1e-10));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.dense());
    Eigen::VectorXd g(s.order());
    for (int i = 0; i < s.order(); ++i) g[i] = gamma(es.eigenvalues()[i]);
    const Eigen::MatrixXd dense =
        es.eigenvectors() * g.asDiagonal() * es.eigenvectors().transpose();
    for (int trial = 0; trial < 20; ++trial) {
      NormalSampler normals(substream_seed(seed, trial));
      Eigen::VectorXd v(s.order());
      for (int i = 0; i < s.order(); ++i) v[i] = normals.next();
      const Eigen::VectorXd expected = dense * v;
      const double rel = (apply_chebyshev(s, expansion, v) - expected).norm() / expected.norm();
      worst = std::max(worst, rel);
    }
  };

  // random PSD, n = 200
  {
    NormalSampler normals(4242);
    Eigen::MatrixXd a(200, 200);
    for (int i = 0; i < 200; ++i)
      for (int j = 0; j < 200; ++j) a(i, j) = normals.next();
    check_operator(SymmetricSparse::from_dense(25.0 * (a.transpose() * a) / 200),
                   matern_spectral(2.0, 1.0, 2, 1.0), 1);
  }
  // 2D FEM operator, n <= 300
  {
    const Mesh mesh = build_rectangle_mesh(kPi, kPi, 12, 12);
    const System sys = dirichlet_system(mesh);
    check_operator(sys.s, matern_spectral(3.0, 1.0, 2, 1.0), 2);
  }
  out.pass = worst <= 1e-8;
  out.detail = "max rel error over 20 vectors x 2 operators = " + fmt(worst) + " (<= 1e-8)";
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome white_noise_identity() {
  double worst = 0.0;
  for (const Mesh& mesh : {build_interval_mesh(0, kPi, 40), build_rectangle_mesh(1, 1, 6, 6)}) {
    const SymmetricSparse mass = apply_dirichlet(assemble_mass(mesh), mesh);
    const SymmetricSparse stiffness = apply_dirichlet(assemble_stiffness(mesh), mesh);
    const DenseOracle oracle = dense_oracle(mass, stiffness, constant_spectral(1.0), true);
    const Eigen::MatrixXd c_inv = mass.dense().inverse();
    worst = std::max(worst, (oracle.sigma_z - c_inv).norm() / c_inv.norm());
  }
  Outcome out;
  out.pass = worst <= 1e-10;
  out.detail = "max rel deviation of sigma_z from C^-1 = " + fmt(worst) + " (<= 1e-10)";
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome eigenvalue_consistency() {
  const Mesh mesh = build_interval_mesh(0, kPi, 100);
  const System sys = dirichlet_system(mesh);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lumped_es(sys.s.dense());
  double worst_rel = 0.0;
  for (int j = 1; j <= 5; ++j)
    worst_rel = std::max(worst_rel,
                         std::abs(lumped_es.eigenvalues()[j - 1] - j * j) / (j * j));

  const DenseOracle exact = dense_oracle(sys.mass, sys.stiffness, constant_spectral(1.0), true);
  double min_gap = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= exact.eigenvalues.size(); ++j)
    min_gap = std::min(min_gap, exact.eigenvalues[j - 1] - static_cast<double>(j) * j);

  Outcome out;
  out.pass = worst_rel <= 0.01 && min_gap >= -1e-9;
  out.detail = "lumped max rel eig error (j<=5) = " + fmt(worst_rel) +
               " (<= 0.01); exact-mass min(lambda_jh - j^2) = " + fmt(min_gap) + " (>= -1e-9)";
  return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome truncation_slopes() {
  const AnalyticSpectrum spectrum = AnalyticSpectrum::box(1, 1000000);
  const std::vector<int> n_values = {16, 32, 64, 128, 256};
  const std::vector<std::pair<double, double>> cases = {
      {-1.0, -3.0}, {-0.75, -2.0}, {-1.25, -4.0}};
  Outcome out;
  out.pass = true;
  std::ostringstream detail;
  for (const auto& [exponent, expected] : cases) {
    const ConvergenceReport report =
        truncation_tail(power_spectral(exponent), spectrum, n_values);
    const bool ok = std::abs(report.slope - expected) <= 0.15 * std::abs(expected);
    out.pass = out.pass && ok;
    detail << "gamma=x^" << exponent << ": slope " << fmt(report.slope) << " vs " << expected
           << "; ";
  }
  detail << "(each within 15%)";
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome fem_error_rates() {
  std::vector<Mesh> family;
  for (int n : {16, 32, 64, 128}) family.push_back(build_interval_mesh(0, kPi, n));
  const FemErrorReport report =
      fem_spectral_error(family, matern_spectral(5.0, 1.0, 1, 1.0), 1000000, false);

  bool monotone = true;
  for (std::size_t i = 1; i < report.total_error.size(); ++i)
    monotone = monotone && report.total_error[i] < report.total_error[i - 1];
  const bool slope_ok = std::abs(report.eigenvalue.slope - 2.0) <= 0.3;

  Outcome out;
  out.pass = monotone && slope_ok;
  std::ostringstream detail;
  detail << "total error";
  for (double e : report.total_error) detail << " " << fmt(e);
  detail << (monotone ? " strictly decreasing" : " NOT decreasing");
  detail << "; eigenvalue slope " << fmt(report.eigenvalue.slope) << " (2 +- 0.3)";
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------- criterion 7
struct LagClass {
  double lag = 0.0;
  std::vector<int> a, b;      // interior indices of the pairs
  double sum = 0.0, sum_sq = 0.0;  // per-sample class averages accumulated
};

double matern_covariance_nu1(double kappa, double r) {
  if (r == 0.0) return 1.0;
  const double t = kappa * r;
  return t * std::cyl_bessel_k(1.0, t);
}

Outcome matern_field_sanity(int grid, double tol, int n_samples) {
  const double kappa = 12.0;
  const SpectralFunction gamma = matern_spectral(kappa, 1.0, 2, 1.0);

  // practical range: correlation 0.05
  double lo = 1e-6, hi = 10.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (matern_covariance_nu1(kappa, mid) > 0.05 ? lo : hi) = mid;
  }
  const double range = 0.5 * (lo + hi);

  const Mesh mesh = build_rectangle_mesh(kPi, kPi, grid, grid);
  const System sys = dirichlet_system(mesh);
  const auto interior = interior_vertices(mesh);
  std::vector<int> interior_pos(mesh.n_vertices(), -1);
  for (int k = 0; k < static_cast<int>(interior.size()); ++k) interior_pos[interior[k]] = k;

  const double h = kPi / grid;
  const int margin = static_cast<int>(std::ceil(range / h));  // boundary ring excluded
  const int max_axis = static_cast<int>(std::floor(2.0 * range / h));
  const int max_diag = static_cast<int>(std::floor(2.0 * range / (h * std::numbers::sqrt2)));

  auto vid = [&](int i, int j) { return j * (grid + 1) + i; };
  std::vector<LagClass> classes;
  auto add_class = [&](int di, int dj) {
    LagClass cls;
    cls.lag = h * std::sqrt(static_cast<double>(di) * di + static_cast<double>(dj) * dj);
    for (int j = margin; j <= grid - margin - dj; ++j)
      for (int i = margin; i <= grid - margin - di; ++i) {
        const int a = interior_pos[vid(i, j)], b = interior_pos[vid(i + di, j + dj)];
        if (a >= 0 && b >= 0) {
          cls.a.push_back(a);
          cls.b.push_back(b);
        }
      }
    // cap pairs per class; stride subsampling keeps spatial spread
    const std::size_t cap = 1024;
    if (cls.a.size() > cap) {
      std::vector<int> a2, b2;
      const double stride = static_cast<double>(cls.a.size()) / cap;
      for (std::size_t k = 0; k < cap; ++k) {
        const std::size_t idx = static_cast<std::size_t>(k * stride);
        a2.push_back(cls.a[idx]);
        b2.push_back(cls.b[idx]);
      }
      cls.a.swap(a2);
      cls.b.swap(b2);
    }
    if (!cls.a.empty()) classes.push_back(std::move(cls));
  };
  for (int k = 0; k <= max_axis; ++k) add_class(k, 0);
  for (int k = 1; k <= max_diag; ++k) add_class(k, k);

  SamplerConfig cfg;
  cfg.seed = 777;
  cfg.n_samples = n_samples;
  cfg.tol = tol;
  cfg.use_dirichlet = true;
  WeightSampler sampler(sys.s, sys.lumped, gamma, cfg, mesh.content_hash());

  int remaining = n_samples;
  while (remaining > 0) {
    const int block_size = std::min(remaining, 2048);
    const Eigen::MatrixXd block = sampler.next_block(block_size);
    for (auto& cls : classes) {
      const std::size_t m = cls.a.size();
      for (int s = 0; s < block_size; ++s) {
        const double* col = block.col(s).data();
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += col[cls.a[k]] * col[cls.b[k]];
        const double avg = acc / static_cast<double>(m);
        cls.sum += avg;
        cls.sum_sq += avg * avg;
      }
    }
    remaining -= block_size;
  }

  // gates: per class max(10% relative, 5 SE); plain 10% where resolvable;
  // 10% aggregate over the class vector
  bool per_class_ok = true, resolvable_ok = true;
  double agg_num = 0.0, agg_den = 0.0, worst_rel = 0.0;
  std::ostringstream table;
  for (const auto& cls : classes) {
    const double emp = cls.sum / n_samples;
    const double var = std::max(0.0, cls.sum_sq / n_samples - emp * emp);
    const double se = std::sqrt(var / n_samples);
    const double truth = matern_covariance_nu1(kappa, cls.lag);
    const double err = std::abs(emp - truth);
    agg_num += err * err;
    agg_den += truth * truth;
    if (err > std::max(0.10 * std::abs(truth), 5.0 * se)) per_class_ok = false;
    if (0.10 * std::abs(truth) >= 5.0 * se) {
      worst_rel = std::max(worst_rel, err / std::abs(truth));
      if (err > 0.10 * std::abs(truth)) resolvable_ok = false;
    }
  }
  const double aggregate = std::sqrt(agg_num / agg_den);

  Outcome out;
  out.pass = per_class_ok && resolvable_ok && aggregate <= 0.10;
  out.detail = std::to_string(classes.size()) + " lag classes (lag <= 2 ranges, ring width " +
               fmt(range) + " excluded): worst resolvable rel err = " + fmt(worst_rel) +
               " (<= 0.1), aggregate rel L2 = " + fmt(aggregate) + " (<= 0.1), all within max(10%, 5 SE): " +
               (per_class_ok ? "yes" : "NO");
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome determinism() {
  bool ok = true;
  std::string detail;

  // criterion 1 configuration, sampled twice end to end
  {
    const Mesh mesh = build_interval_mesh(0, kPi, 51);
    const System sys = dirichlet_system(mesh);
    const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
    SamplerConfig cfg;
    cfg.seed = 20250817;
    cfg.n_samples = 200000;
    cfg.tol = 1e-8;
    const FieldSampleBatch a = sample_weights(sys.s, sys.lumped, gamma, cfg);
    const FieldSampleBatch b = sample_weights(sys.s, sys.lumped, gamma, cfg);
    const bool same = std::memcmp(a.weights.data(), b.weights.data(),
                                  sizeof(double) * a.weights.size()) == 0;
    ok = ok && same;
    detail += std::string("criterion-1 batch rerun bitwise ") + (same ? "equal" : "UNEQUAL");
  }
  // criterion 7 configuration, first block sampled twice
  {
    const Mesh mesh = build_rectangle_mesh(kPi, kPi, 48, 48);
    const System sys = dirichlet_system(mesh);
    const SpectralFunction gamma = matern_spectral(12.0, 1.0, 2, 1.0);
    SamplerConfig cfg;
    cfg.seed = 777;
    cfg.n_samples = 1000;
    cfg.tol = 1e-6;
    WeightSampler s1(sys.s, sys.lumped, gamma, cfg, mesh.content_hash());
    WeightSampler s2(sys.s, sys.lumped, gamma, cfg, mesh.content_hash());
    const Eigen::MatrixXd a = s1.next_block(1000);
    const Eigen::MatrixXd b = s2.next_block(1000);
    const bool same = std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
    ok = ok && same;
    detail += std::string("; criterion-7 block rerun bitwise ") + (same ? "equal" : "UNEQUAL");
  }
  Outcome out;
  out.pass = ok;
  out.detail = detail;
  return out;
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "covariance exactness vs dense oracle", 60.0, covariance_exactness},
      {2, "chebyshev apply fidelity", 10.0, chebyshev_fidelity},
      {3, "white-noise identity sigma_z = C^-1", 5.0, white_noise_identity},
      {4, "eigenvalue consistency on [0,pi]", 5.0, eigenvalue_consistency},
      {5, "truncation tail slopes", 5.0, truncation_slopes},
      {6, "fem error monotonicity and eigenvalue rate", 120.0, fem_error_rates},
      {7, "matern field sanity on [0,pi]^2", 300.0,
       [] { return matern_field_sanity(64, 1e-6, 100000); }},
      {8, "determinism of sample batches", 120.0, determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds <= criterion.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    if (!pass) ++failures;
    std::printf("CRITERION %d %s: %s [%s] (%.1fs of %.0fs budget)\n", criterion.id,
                pass ? "PASS" : "FAIL", criterion.name.c_str(), outcome.detail.c_str(), seconds,
                criterion.budget_seconds);
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  else std::printf("all 8 criteria PASS\n");
  return failures == 0 ? 0 : 1;
}

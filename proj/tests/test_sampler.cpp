#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "specfield/analysis.hpp"
#include "specfield/fem.hpp"
#include "specfield/rng.hpp"
#include "specfield/sampler.hpp"

using namespace specfield;

namespace {

constexpr double kPi = std::numbers::pi;

struct System {
  Mesh mesh;
  SymmetricSparse mass;
  SymmetricSparse stiffness;
  LumpedMass lumped;
  SymmetricSparse s;
};

System interval_system(int cells, bool dirichlet = true) {
  System sys;
  sys.mesh = build_interval_mesh(0, kPi, cells);
  sys.mass = assemble_mass(sys.mesh);
  sys.stiffness = assemble_stiffness(sys.mesh);
  if (dirichlet) {
    sys.mass = apply_dirichlet(sys.mass, sys.mesh);
    sys.stiffness = apply_dirichlet(sys.stiffness, sys.mesh);
  }
  sys.lumped = lump_mass(sys.mass);
  sys.s = build_S(sys.lumped, sys.stiffness);
  return sys;
}

// standard normal CDF for the KS check
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("rng substreams") {
  SUBCASE("streams are deterministic and index-separated") {
    NormalSampler a(substream_seed(7, 3)), b(substream_seed(7, 3)), c(substream_seed(7, 4));
    bool all_equal = true, any_equal_across = false;
    for (int i = 0; i < 100; ++i) {
      const double va = a.next(), vb = b.next(), vc = c.next();
      all_equal = all_equal && (va == vb);
      any_equal_across = any_equal_across || (va == vc);
    }
    CHECK(all_equal);
    CHECK_FALSE(any_equal_across);
  }
  SUBCASE("moments are plausible") {
    NormalSampler normals(substream_seed(123, 0));
    double sum = 0, sum_sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double x = normals.next();
      sum += x;
      sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("sample_weights basics") {
  const System sys = interval_system(20);
  SamplerConfig cfg;
  cfg.seed = 11;
  cfg.n_samples = 16;
  cfg.tol = 1e-8;

  SUBCASE("zero gamma gives an all-zero batch") {
    const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, constant_spectral(0.0), cfg);
    CHECK(batch.weights.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("white noise reduces to D^{-1/2} eps") {
    const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, constant_spectral(1.0), cfg);
    for (int c = 0; c < cfg.n_samples; ++c) {
      NormalSampler normals(substream_seed(cfg.seed, c));
      for (int r = 0; r < batch.n(); ++r) {
        const double eps = normals.next();
        CHECK(batch.weights(r, c) ==
              doctest::Approx(sys.lumped.inv_sqrt[r] * eps).epsilon(1e-12));
      }
    }
  }
  SUBCASE("deterministic for a fixed config") {
    const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
    const FieldSampleBatch a = sample_weights(sys.s, sys.lumped, gamma, cfg);
    const FieldSampleBatch b = sample_weights(sys.s, sys.lumped, gamma, cfg);
    CHECK(std::memcmp(a.weights.data(), b.weights.data(),
                      sizeof(double) * a.weights.size()) == 0);
    CHECK(a.meta.order == b.meta.order);
  }
  SUBCASE("streaming blocks match one-shot sampling bitwise") {
    const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
    const FieldSampleBatch whole = sample_weights(sys.s, sys.lumped, gamma, cfg);
    WeightSampler stream(sys.s, sys.lumped, gamma, cfg);
    const Eigen::MatrixXd first = stream.next_block(5);
    const Eigen::MatrixXd rest = stream.next_block(11);
    CHECK((whole.weights.leftCols(5) - first).cwiseAbs().maxCoeff() == 0.0);
    CHECK((whole.weights.rightCols(11) - rest).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("doubling gamma exactly doubles the batch") {
    // loose tolerance pins the same K for both scalings
    SamplerConfig loose = cfg;
    loose.tol = 1e-4;
    SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
    SpectralFunction twice = gamma;
    auto base = gamma.eval;
    twice.eval = [base](double x) { return 2.0 * base(x); };
    const FieldSampleBatch a = sample_weights(sys.s, sys.lumped, gamma, loose);
    const FieldSampleBatch b = sample_weights(sys.s, sys.lumped, twice, loose);
    REQUIRE(a.meta.order == b.meta.order);
    CHECK((b.weights - 2.0 * a.weights).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scaling by a non-dyadic factor stays within rounding") {
    SamplerConfig loose = cfg;
    loose.tol = 1e-4;
    SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
    SpectralFunction scaled = gamma;
    auto base = gamma.eval;
    scaled.eval = [base](double x) { return 3.0 * base(x); };
    const FieldSampleBatch a = sample_weights(sys.s, sys.lumped, gamma, loose);
    const FieldSampleBatch b = sample_weights(sys.s, sys.lumped, scaled, loose);
    CHECK((b.weights - 3.0 * a.weights).cwiseAbs().maxCoeff() <
          1e-13 * a.weights.cwiseAbs().maxCoeff());
  }
  SUBCASE("rejects bad configs") {
    const SpectralFunction gamma = constant_spectral(1.0);
    SamplerConfig bad = cfg;
    bad.n_samples = 0;
    CHECK_THROWS_AS(sample_weights(sys.s, sys.lumped, gamma, bad), std::invalid_argument);
    bad = cfg;
    bad.tol = 0.0;
    CHECK_THROWS_AS(sample_weights(sys.s, sys.lumped, gamma, bad), std::invalid_argument);
  }
}

TEST_CASE("dense oracle") {
  const System sys = interval_system(20);

  SUBCASE("white noise covariance is the inverse mass matrix (exact mode)") {
    const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, constant_spectral(1.0), true);
    const Eigen::MatrixXd c_inv = sys.mass.dense().inverse();
    CHECK((oracle.sigma_z - c_inv).norm() <= 1e-10 * c_inv.norm());
  }
  SUBCASE("gamma = lambda matches the direct dense product") {
    const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, power_spectral(1.0), true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.mass.dense());
    const Eigen::MatrixXd c_inv_sqrt = es.eigenvectors() *
                                       es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                       es.eigenvectors().transpose();
    const Eigen::MatrixXd s_exact = c_inv_sqrt * sys.stiffness.dense() * c_inv_sqrt;
    const Eigen::MatrixXd expected = c_inv_sqrt * s_exact * s_exact * c_inv_sqrt;
    CHECK((oracle.sigma_z - expected).norm() <= 1e-10 * expected.norm());
  }
  SUBCASE("2x2 hand case") {
    const SymmetricSparse c = SymmetricSparse::from_dense(Eigen::Matrix2d::Identity());
    const SymmetricSparse g = SymmetricSparse::from_dense(Eigen::Vector2d(1, 4).asDiagonal());
    const DenseOracle oracle = dense_oracle(c, g, power_spectral(-0.5), true);
    CHECK(oracle.sigma_z(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(oracle.sigma_z(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(oracle.sigma_z(0, 1)) < 1e-12);
    CHECK(oracle.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(oracle.eigenvalues[1] == doctest::Approx(4.0));
  }
  SUBCASE("eigenvalues come back sorted and sigma_z is PSD") {
    const DenseOracle oracle =
        dense_oracle(sys.mass, sys.stiffness, matern_spectral(5.0, 1.0, 1, 1.0), false);
    for (int j = 1; j < oracle.eigenvalues.size(); ++j)
      CHECK(oracle.eigenvalues[j] >= oracle.eigenvalues[j - 1]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle.sigma_z);
    CHECK(es.eigenvalues().minCoeff() >=
          -1e-10 * oracle.sigma_z.trace() / oracle.sigma_z.rows());
  }
  SUBCASE("size guard") {
    const SymmetricSparse big =
        SymmetricSparse::from_dense(Eigen::MatrixXd::Identity(2001, 2001));
    CHECK_THROWS_WITH_AS(dense_oracle(big, big, constant_spectral(1.0), true),
                         doctest::Contains("2000"), std::invalid_argument);
  }
}

TEST_CASE("sample_dense") {
  const System sys = interval_system(10);
  const DenseOracle oracle =
      dense_oracle(sys.mass, sys.stiffness, matern_spectral(4.0, 1.0, 1, 1.0), true);
  SamplerConfig cfg;
  cfg.seed = 99;

  SUBCASE("single sample") {
    cfg.n_samples = 1;
    const FieldSampleBatch batch = sample_dense(oracle, cfg);
    CHECK(batch.n_samples() == 1);
    CHECK(batch.weights.allFinite());
  }
  SUBCASE("seed determinism") {
    cfg.n_samples = 32;
    const FieldSampleBatch a = sample_dense(oracle, cfg);
    const FieldSampleBatch b = sample_dense(oracle, cfg);
    CHECK(std::memcmp(a.weights.data(), b.weights.data(),
                      sizeof(double) * a.weights.size()) == 0);
  }
  SUBCASE("empirical covariance concentrates on sigma_z") {
    cfg.n_samples = 100000;
    const FieldSampleBatch batch = sample_dense(oracle, cfg);
    const Eigen::MatrixXd emp = empirical_covariance(batch);
    CHECK((emp - oracle.sigma_z).norm() <= 0.02 * oracle.sigma_z.norm());
  }
}

TEST_CASE("chebyshev path matches the lumped dense oracle") {
  const System sys = interval_system(50);
  const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);

  SUBCASE("implied covariance at tol 1e-8") {
    // Sigma_implied = D^{-1/2} P(S)^2 D^{-1/2} against the lumped oracle
    const SpectralInterval iv = gershgorin_bound(sys.s);
    const int order = choose_order(gamma, iv, 1e-8);
    const ChebyshevExpansion expansion = chebyshev_fit(gamma, iv, order);
    const int n = sys.s.order();
    const Eigen::MatrixXd p = apply_chebyshev(sys.s, expansion, Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)));
    const Eigen::MatrixXd implied = sys.lumped.inv_sqrt.asDiagonal() * (p * p) *
                                    sys.lumped.inv_sqrt.asDiagonal();
    const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, gamma, false);
    CHECK((implied - oracle.sigma_z).norm() <= 1e-6 * oracle.sigma_z.norm());
  }
  SUBCASE("empirical covariance within 5 standard errors") {
    SamplerConfig cfg;
    cfg.seed = 7;
    cfg.n_samples = 50000;
    cfg.tol = 1e-8;
    const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, gamma, cfg);
    const Eigen::MatrixXd emp = empirical_covariance(batch);
    const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, gamma, false);
    const Eigen::MatrixXd& ref = oracle.sigma_z;
    double worst = 0.0;
    for (int i = 0; i < emp.rows(); ++i)
      for (int j = 0; j < emp.cols(); ++j) {
        const double se =
            std::sqrt((ref(i, i) * ref(j, j) + ref(i, j) * ref(i, j)) / cfg.n_samples);
        worst = std::max(worst, std::abs(emp(i, j) - ref(i, j)) / se);
      }
    CHECK(worst <= 5.0);
  }
  SUBCASE("empirical mean stays within its own standard error band") {
    SamplerConfig cfg;
    cfg.seed = 3;
    cfg.n_samples = 20000;
    const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, gamma, cfg);
    const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, gamma, false);
    const Eigen::VectorXd mean = batch.weights.rowwise().mean();
    double bound = 0.0;
    for (int i = 0; i < mean.size(); ++i)
      bound = std::max(bound, std::sqrt(oracle.sigma_z(i, i) / cfg.n_samples));
    CHECK(mean.cwiseAbs().maxCoeff() <= 4.0 * bound);
  }
}

TEST_CASE("gaussianity smoke test (Kolmogorov-Smirnov)") {
  const System sys = interval_system(24);
  const SpectralFunction gamma = matern_spectral(5.0, 1.0, 1, 1.0);
  SamplerConfig cfg;
  cfg.seed = 2024;
  cfg.n_samples = 10000;
  const FieldSampleBatch batch = sample_weights(sys.s, sys.lumped, gamma, cfg);
  const DenseOracle oracle = dense_oracle(sys.mass, sys.stiffness, gamma, false);

  // KS critical value at significance 1e-3: c = sqrt(-ln(alpha/2)/2)
  const double critical = std::sqrt(-std::log(0.5e-3) / 2.0) / std::sqrt(cfg.n_samples);
  for (int coord : {0, 5, 11, 17, 22}) {
    std::vector<double> standardized(cfg.n_samples);
    const double sd = std::sqrt(oracle.sigma_z(coord, coord));
    for (int c = 0; c < cfg.n_samples; ++c) standardized[c] = batch.weights(coord, c) / sd;
    std::sort(standardized.begin(), standardized.end());
    double d_stat = 0.0;
    for (int i = 0; i < cfg.n_samples; ++i) {
      const double cdf = normal_cdf(standardized[i]);
      d_stat = std::max(d_stat, std::abs(cdf - (i + 1.0) / cfg.n_samples));
      d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / cfg.n_samples));
    }
    CHECK(d_stat < critical);
  }
}

TEST_CASE("evaluate_field") {
  SUBCASE("vertices and midpoints in 1D") {
    const Mesh mesh = build_interval_mesh(0, 1, 4);
    Eigen::VectorXd z(5);
    z << 1, 2, 3, 4, 5;
    Eigen::MatrixXd points(3, 1);
    points << 0.25, 0.375, 1.0;
    const Eigen::VectorXd values = evaluate_field(mesh, z, points);
    CHECK(values[0] == doctest::Approx(2.0).epsilon(1e-14));    // vertex 1
    CHECK(values[1] == doctest::Approx(2.5).epsilon(1e-14));    // midpoint of cell 1
    CHECK(values[2] == doctest::Approx(5.0).epsilon(1e-14));    // right endpoint
  }
  SUBCASE("triangle barycenter averages the corners") {
    const Mesh mesh = build_rectangle_mesh(1, 1, 2, 2);
    Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(9, 0, 8);
    const int e = 3;
    Eigen::MatrixXd barycenter(1, 2);
    barycenter.setZero();
    for (int k = 0; k < 3; ++k) barycenter += mesh.vertices.row(mesh.elements(e, k)) / 3.0;
    const Eigen::VectorXd values = evaluate_field(mesh, z, barycenter);
    const double expected =
        (z[mesh.elements(e, 0)] + z[mesh.elements(e, 1)] + z[mesh.elements(e, 2)]) / 3.0;
    CHECK(values[0] == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("outside points report the distance to the mesh") {
    const Mesh mesh = build_rectangle_mesh(1, 1, 2, 2);
    Eigen::MatrixXd outside(1, 2);
    outside << 2.0, 0.5;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(9);
    CHECK_THROWS_WITH_AS(evaluate_field(mesh, z, outside), doctest::Contains("distance"),
                         std::invalid_argument);
  }
}

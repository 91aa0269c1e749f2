#include "specfield/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "specfield/rng.hpp"

namespace specfield {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void fill_gaussian_block(Eigen::MatrixXd& block, std::uint64_t seed, int first_index) {
  for (int c = 0; c < block.cols(); ++c) {
    NormalSampler normals(substream_seed(seed, static_cast<std::uint64_t>(first_index + c)));
    for (int r = 0; r < block.rows(); ++r) block(r, c) = normals.next();
  }
}

// Applies P(S) column-chunk-wise across workers; per-column results do not
// depend on the partitioning.
Eigen::MatrixXd apply_parallel(const SymmetricSparse& s, const ChebyshevExpansion& expansion,
                               const Eigen::MatrixXd& block) {
  const int threads = std::min<int>(worker_count(), static_cast<int>(block.cols()));
  if (threads <= 1) return apply_chebyshev(s, expansion, block);
  Eigen::MatrixXd result(block.rows(), block.cols());
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int cols = static_cast<int>(block.cols());
  const int chunk = (cols + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int begin = t * chunk;
    const int width = std::min(chunk, cols - begin);
    if (width <= 0) break;
    pool.emplace_back([&, begin, width] {
      const Eigen::MatrixXd sub = block.middleCols(begin, width);
      result.middleCols(begin, width) = apply_chebyshev(s, expansion, sub);
    });
  }
  for (auto& th : pool) th.join();
  return result;
}

}  // namespace

int worker_count() noexcept {
  static const int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("SF_THREADS")) {
      char* end = nullptr;
      const long cap = std::strtol(env, &end, 10);
      if (end != env && cap > 0) n = std::min<long>(n, cap);
    }
    return n;
  }();
  return cached;
}

WeightSampler::WeightSampler(const SymmetricSparse& s, const LumpedMass& lumped,
                             const SpectralFunction& gamma, const SamplerConfig& cfg,
                             std::uint64_t mesh_hash)
    : s_(s), inv_sqrt_(lumped.inv_sqrt) {
  require(lumped.inv_sqrt.size() == s.order(), "lumped mass and operator orders differ");
  require(cfg.tol > 0.0 && std::isfinite(cfg.tol), "tolerance must be positive");
  const SpectralInterval interval = gershgorin_bound(s);
  const int order = choose_order(gamma, interval, cfg.tol);
  expansion_ = chebyshev_fit(gamma, interval, order);
  meta_.seed = cfg.seed;
  meta_.order = order;
  meta_.interval = {expansion_.lo, expansion_.hi};
  meta_.mesh_hash = mesh_hash;
}

Eigen::MatrixXd WeightSampler::next_block(int count) {
  require(count >= 1, "block size must be at least 1");
  const int n = s_.order();
  Eigen::MatrixXd block(n, count);
  fill_gaussian_block(block, meta_.seed, cursor_);
  Eigen::MatrixXd weights = apply_parallel(s_, expansion_, block);
  weights.array().colwise() *= inv_sqrt_.array();
  if (!weights.allFinite())
    throw std::runtime_error("non-finite sample output (gamma overflow on the interval?)");
  cursor_ += count;
  return weights;
}

FieldSampleBatch sample_weights(const SymmetricSparse& s, const LumpedMass& lumped,
                                const SpectralFunction& gamma, const SamplerConfig& cfg,
                                std::uint64_t mesh_hash) {
  require(cfg.n_samples >= 1, "n_samples must be at least 1");
  WeightSampler sampler(s, lumped, gamma, cfg, mesh_hash);
  FieldSampleBatch batch;
  batch.weights = sampler.next_block(cfg.n_samples);
  batch.meta = sampler.meta();
  return batch;
}

DenseOracle dense_oracle(const SymmetricSparse& c, const SymmetricSparse& g,
                         const SpectralFunction& gamma, bool exact_mass) {
  require(c.order() == g.order(), "mass and stiffness orders differ");
  require(c.order() >= 1, "empty system");
  require(c.order() <= 2000, "dense oracle is guarded to n <= 2000");
  const int n = c.order();

  DenseOracle oracle;
  oracle.exact_mass = exact_mass;
  if (exact_mass) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.dense());
    if (es.info() != Eigen::Success) throw std::runtime_error("mass eigendecomposition failed");
    const Eigen::VectorXd& w = es.eigenvalues();
    if (w.minCoeff() <= 0.0) throw std::runtime_error("mass matrix is not positive definite");
    oracle.c_inv_sqrt = es.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
  } else {
    oracle.c_inv_sqrt = lump_mass(c).inv_sqrt.asDiagonal();
  }

  Eigen::MatrixXd s = oracle.c_inv_sqrt * g.dense() * oracle.c_inv_sqrt;
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("operator eigendecomposition failed");
  oracle.eigenvalues = es.eigenvalues();
  oracle.eigenvectors = es.eigenvectors();

  Eigen::VectorXd gamma_sq(n);
  for (int j = 0; j < n; ++j) {
    const double value = gamma(oracle.eigenvalues[j]);
    if (!std::isfinite(value))
      throw std::runtime_error("non-finite gamma at eigenvalue " +
                               std::to_string(oracle.eigenvalues[j]));
    gamma_sq[j] = value * value;
  }
  Eigen::MatrixXd inner =
      oracle.eigenvectors * gamma_sq.asDiagonal() * oracle.eigenvectors.transpose();
  oracle.sigma_z = oracle.c_inv_sqrt * inner * oracle.c_inv_sqrt;
  oracle.sigma_z = 0.5 * (oracle.sigma_z + oracle.sigma_z.transpose()).eval();
  return oracle;
}

FieldSampleBatch sample_dense(const DenseOracle& oracle, const SamplerConfig& cfg) {
  require(cfg.n_samples >= 1, "n_samples must be at least 1");
  const int n = static_cast<int>(oracle.sigma_z.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle.sigma_z);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("covariance eigendecomposition failed");
  const Eigen::VectorXd& w = es.eigenvalues();
  const double scale = std::max(1e-300, oracle.sigma_z.trace() / n);
  if (w.minCoeff() < -1e-10 * scale)
    throw std::runtime_error("sigma_z numerically indefinite: min eigenvalue " +
                             std::to_string(w.minCoeff()));
  const Eigen::MatrixXd root = es.eigenvectors() * w.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                               es.eigenvectors().transpose();

  FieldSampleBatch batch;
  batch.weights.resize(n, cfg.n_samples);
  Eigen::MatrixXd eps(n, cfg.n_samples);
  fill_gaussian_block(eps, cfg.seed, 0);
  batch.weights.noalias() = root * eps;
  batch.meta.seed = cfg.seed;
  batch.meta.order = 0;
  batch.meta.interval = {oracle.eigenvalues.minCoeff(), oracle.eigenvalues.maxCoeff()};
  batch.meta.mesh_hash = 0;
  return batch;
}

namespace {

double point_segment_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b) {
  const Eigen::VectorXd ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Eigen::VectorXd evaluate_field(const Mesh& mesh, const Eigen::VectorXd& z,
                               const Eigen::MatrixXd& points) {
  require(z.size() == mesh.n_vertices(), "weight vector length must equal the vertex count");
  require(points.cols() == mesh.embed_dim, "point coordinate width mismatch");
  const int d = mesh.dim;
  const double h = mesh_stats(mesh).h;
  const double bary_tol = 1e-10;
  const double residual_tol = 1e-8 * (1.0 + h);

  Eigen::VectorXd values(points.rows());
  for (int pi = 0; pi < points.rows(); ++pi) {
    const Eigen::VectorXd p = points.row(pi).transpose();
    bool found = false;
    double nearest = std::numeric_limits<double>::infinity();
    for (int e = 0; e < mesh.n_elements() && !found; ++e) {
      Eigen::MatrixXd edges(mesh.embed_dim, d);
      const Eigen::VectorXd v0 = mesh.vertices.row(mesh.elements(e, 0)).transpose();
      for (int k = 1; k <= d; ++k)
        edges.col(k - 1) = mesh.vertices.row(mesh.elements(e, k)).transpose() - v0;
      const Eigen::VectorXd r = p - v0;
      Eigen::VectorXd lambda_rest;
      double residual = 0.0;
      if (mesh.embed_dim == d) {
        lambda_rest = edges.colPivHouseholderQr().solve(r);
      } else {
        lambda_rest = (edges.transpose() * edges).ldlt().solve(edges.transpose() * r);
        residual = (r - edges * lambda_rest).norm();
      }
      const double lambda0 = 1.0 - lambda_rest.sum();
      const bool inside = lambda0 >= -bary_tol && lambda_rest.minCoeff() >= -bary_tol &&
                          residual <= residual_tol;
      if (inside) {
        double value = lambda0 * z[mesh.elements(e, 0)];
        for (int k = 1; k <= d; ++k) value += lambda_rest[k - 1] * z[mesh.elements(e, k)];
        values[pi] = value;
        found = true;
      } else {
        // track distance to the element for the error report
        if (d == 1) {
          nearest = std::min(nearest,
                             point_segment_distance(p, v0, v0 + edges.col(0).eval()));
        } else {
          double dist = std::numeric_limits<double>::infinity();
          if (lambda0 >= -bary_tol && lambda_rest.minCoeff() >= -bary_tol)
            dist = residual;  // above the element; off-plane only
          const Eigen::VectorXd v1 = v0 + edges.col(0), v2 = v0 + edges.col(1);
          dist = std::min({dist, point_segment_distance(p, v0, v1),
                           point_segment_distance(p, v1, v2), point_segment_distance(p, v2, v0)});
          nearest = std::min(nearest, dist);
        }
      }
    }
    if (!found)
      throw std::invalid_argument("point " + std::to_string(pi) +
                                  " lies outside the mesh (distance to nearest element " +
                                  std::to_string(nearest) + ")");
  }
  return values;
}

}  // namespace specfield

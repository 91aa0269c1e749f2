#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "specfield/fem.hpp"
#include "specfield/spectral.hpp"

namespace specfield {

struct SamplerConfig {
  std::uint64_t seed = 0;
  int n_samples = 1;
  double tol = 1e-8;         // Chebyshev sup-norm tolerance
  bool use_dirichlet = false;
};

struct BatchMeta {
  std::uint64_t seed = 0;
  int order = 0;  // Chebyshev order K actually used (0 for dense sampling)
  SpectralInterval interval;
  std::uint64_t mesh_hash = 0;
};

/// Weight vectors z, one column per sample, plus provenance.
struct FieldSampleBatch {
  Eigen::MatrixXd weights;  // n x n_samples
  BatchMeta meta;

  int n() const { return static_cast<int>(weights.rows()); }
  int n_samples() const { return static_cast<int>(weights.cols()); }
};

/// Dense reference for desk-scale validation: eigendecomposition of S and
/// the exact weight covariance sigma_z = C^{-1/2} gamma^2(S) C^{-1/2}.
/// exact_mass = true uses the symmetric square root of C, false the lumped
/// diagonal, so the lumping discrepancy itself is measurable.
struct DenseOracle {
  Eigen::MatrixXd sigma_z;
  Eigen::VectorXd eigenvalues;   // of S, ascending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  Eigen::MatrixXd c_inv_sqrt;    // C^{-1/2} (dense or diagonal-as-dense)
  bool exact_mass = true;
};

/// Chebyshev sampling path: per sample, eps ~ N(0, I) from the substream of
/// the sample index, u = P(S) eps, z = D^{-1/2} u. Deterministic for fixed
/// (seed, S, gamma, tol) under any thread count.
FieldSampleBatch sample_weights(const SymmetricSparse& s, const LumpedMass& lumped,
                                const SpectralFunction& gamma, const SamplerConfig& cfg,
                                std::uint64_t mesh_hash = 0);

/// Streaming form of sample_weights for batches too large to hold at once.
/// Sample j always uses substream j regardless of block boundaries, so block
/// sizes do not change the values drawn.
class WeightSampler {
 public:
  WeightSampler(const SymmetricSparse& s, const LumpedMass& lumped, const SpectralFunction& gamma,
                const SamplerConfig& cfg, std::uint64_t mesh_hash = 0);

  /// Next `count` samples as columns; advances the cursor.
  Eigen::MatrixXd next_block(int count);

  const BatchMeta& meta() const { return meta_; }
  int cursor() const { return cursor_; }

 private:
  const SymmetricSparse& s_;
  Eigen::VectorXd inv_sqrt_;
  ChebyshevExpansion expansion_;
  BatchMeta meta_;
  int cursor_ = 0;
};

/// Dense eigendecomposition reference; guarded to n <= 2000.
DenseOracle dense_oracle(const SymmetricSparse& c, const SymmetricSparse& g,
                         const SpectralFunction& gamma, bool exact_mass = true);

/// Exact-distribution sampler z = sigma_z^{1/2} eps (same substream discipline).
FieldSampleBatch sample_dense(const DenseOracle& oracle, const SamplerConfig& cfg);

/// P1 interpolation of weights at arbitrary points (one row per point).
/// Points must lie in some element; the error for an outside point reports
/// its distance to the nearest element.
Eigen::VectorXd evaluate_field(const Mesh& mesh, const Eigen::VectorXd& z,
                               const Eigen::MatrixXd& points);

/// Worker cap: min(hardware_concurrency, SF_THREADS if set). At least 1.
int worker_count() noexcept;

}  // namespace specfield

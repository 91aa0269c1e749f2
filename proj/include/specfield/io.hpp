#pragma once

#include <string>

#include "specfield/analysis.hpp"
#include "specfield/mesh.hpp"
#include "specfield/sampler.hpp"
#include "specfield/spectral.hpp"

namespace specfield {

/// CSV: one row per weight, one column per sample, full precision (%.17g).
void write_batch_csv(const std::string& path, const FieldSampleBatch& batch);

/// Raw little-endian float64, column-major, plus a JSON sidecar
/// {n, n_samples, seed, K} at sidecar_path.
void write_batch_binary(const std::string& path, const std::string& sidecar_path,
                        const FieldSampleBatch& batch);

/// Legacy VTK ASCII with one POINT_DATA scalar field per vertex.
void write_vtk_point_data(const std::string& path, const Mesh& mesh,
                          const Eigen::VectorXd& values, const std::string& name);

/// Expansion dump {lo, hi, coeffs[]}.
void write_expansion_json(const std::string& path, const ChebyshevExpansion& expansion);

std::string convergence_report_json(const ConvergenceReport& report);
void write_convergence_report_json(const std::string& path, const ConvergenceReport& report);

/// Two-column CSV (x, error).
void write_convergence_report_csv(const std::string& path, const ConvergenceReport& report);

}  // namespace specfield

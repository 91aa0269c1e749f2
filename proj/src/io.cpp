#include "specfield/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace specfield {

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_batch_csv(const std::string& path, const FieldSampleBatch& batch) {
  auto out = open_out(path);
  for (int r = 0; r < batch.n(); ++r) {
    for (int c = 0; c < batch.n_samples(); ++c) {
      if (c) out << ',';
      out << format_full(batch.weights(r, c));
    }
    out << '\n';
  }
  finish(out, path);
}

void write_batch_binary(const std::string& path, const std::string& sidecar_path,
                        const FieldSampleBatch& batch) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(batch.weights.data()),
              static_cast<std::streamsize>(sizeof(double)) * batch.weights.size());
  } else {
    for (Eigen::Index i = 0; i < batch.weights.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, batch.weights.data() + i, sizeof(bits));
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      out.write(bytes, 8);
    }
  }
  finish(out, path);

  nlohmann::json sidecar = {{"n", batch.n()},
                            {"n_samples", batch.n_samples()},
                            {"seed", batch.meta.seed},
                            {"K", batch.meta.order}};
  auto side = open_out(sidecar_path);
  side << sidecar.dump(2) << '\n';
  finish(side, sidecar_path);
}

void write_vtk_point_data(const std::string& path, const Mesh& mesh,
                          const Eigen::VectorXd& values, const std::string& name) {
  if (values.size() != mesh.n_vertices())
    throw std::invalid_argument("value count must equal the vertex count");
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "specfield sample\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (int i = 0; i < mesh.n_vertices(); ++i) {
    double xyz[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < mesh.embed_dim; ++c) xyz[c] = mesh.vertices(i, c);
    out << format_full(xyz[0]) << ' ' << format_full(xyz[1]) << ' ' << format_full(xyz[2])
        << '\n';
  }
  const int per_cell = mesh.dim + 1;
  out << "CELLS " << mesh.n_elements() << ' ' << mesh.n_elements() * (per_cell + 1) << '\n';
  for (int e = 0; e < mesh.n_elements(); ++e) {
    out << per_cell;
    for (int k = 0; k < per_cell; ++k) out << ' ' << mesh.elements(e, k);
    out << '\n';
  }
  const int vtk_type = mesh.dim == 1 ? 3 : 5;  // VTK_LINE / VTK_TRIANGLE
  out << "CELL_TYPES " << mesh.n_elements() << '\n';
  for (int e = 0; e < mesh.n_elements(); ++e) out << vtk_type << '\n';
  out << "POINT_DATA " << mesh.n_vertices() << '\n';
  out << "SCALARS " << name << " double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (int i = 0; i < mesh.n_vertices(); ++i) out << format_full(values[i]) << '\n';
  finish(out, path);
}

void write_expansion_json(const std::string& path, const ChebyshevExpansion& expansion) {
  nlohmann::json j = {{"lo", expansion.lo}, {"hi", expansion.hi}, {"coeffs", expansion.coeffs}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::string convergence_report_json(const ConvergenceReport& report) {
  nlohmann::json j = {{"x", report.x},
                      {"error", report.error},
                      {"slope", report.slope},
                      {"slope_half_width", report.slope_half_width}};
  if (report.reference_exponent) j["reference_exponent"] = *report.reference_exponent;
  return j.dump(2);
}

void write_convergence_report_json(const std::string& path, const ConvergenceReport& report) {
  auto out = open_out(path);
  out << convergence_report_json(report) << '\n';
  finish(out, path);
}

void write_convergence_report_csv(const std::string& path, const ConvergenceReport& report) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < report.x.size(); ++i)
    out << format_full(report.x[i]) << ',' << format_full(report.error[i]) << '\n';
  finish(out, path);
}

}  // namespace specfield

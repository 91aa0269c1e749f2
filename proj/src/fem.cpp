#include "specfield/fem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace specfield {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct ElementGeometry {
  double volume = 0.0;
  Eigen::MatrixXd gradients;  // d x (d+1), columns = grad lambda_0 .. lambda_d
};

// P1 geometry in the element's local frame. For embedded simplices (m > d)
// the frame is an orthonormal basis of the tangent plane (QR of the edge
// matrix); gradients and any diffusion matrix live in that frame.
ElementGeometry element_geometry(const Mesh& mesh, int e) {
  const int d = mesh.dim, m = mesh.embed_dim;
  Eigen::MatrixXd edges(m, d);
  for (int k = 1; k <= d; ++k)
    edges.col(k - 1) =
        (mesh.vertices.row(mesh.elements(e, k)) - mesh.vertices.row(mesh.elements(e, 0)))
            .transpose();

  Eigen::MatrixXd local(d, d);
  if (m == d) {
    local = edges;
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(edges);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, d);
    local = q.transpose() * edges;
  }

  double factorial = 1.0;
  for (int k = 2; k <= d; ++k) factorial *= k;
  const double det = local.determinant();
  ElementGeometry geom;
  geom.volume = std::abs(det) / factorial;
  if (!(geom.volume > 0.0))
    throw std::invalid_argument("degenerate element " + std::to_string(e));

  Eigen::MatrixXd grads_1d = local.inverse().transpose();  // columns = grad lambda_1..d
  geom.gradients.resize(d, d + 1);
  geom.gradients.col(0) = -grads_1d.rowwise().sum();
  geom.gradients.rightCols(d) = grads_1d;
  return geom;
}

}  // namespace

SymmetricSparse SymmetricSparse::from_upper_triplets(
    int n, const std::vector<Eigen::Triplet<double>>& upper) {
  require(n >= 0, "matrix order must be nonnegative");
  for (const auto& t : upper)
    require(t.row() <= t.col() && t.row() >= 0 && t.col() < n, "triplet outside upper triangle");
  Eigen::SparseMatrix<double> u(n, n);
  u.setFromTriplets(upper.begin(), upper.end());
  Eigen::SparseMatrix<double> full = u.selfadjointView<Eigen::Upper>();
  full.prune([](int, int, double v) { return v != 0.0; });
  full.makeCompressed();
  return SymmetricSparse(std::move(full));
}

SymmetricSparse SymmetricSparse::from_dense(const Eigen::MatrixXd& a, double drop_tol) {
  require(a.rows() == a.cols(), "dense matrix must be square");
  const int n = static_cast<int>(a.rows());
  std::vector<Eigen::Triplet<double>> upper;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      if (std::abs(v) > drop_tol) upper.emplace_back(i, j, v);
    }
  return from_upper_triplets(n, upper);
}

void SymmetricSparse::write_matrix_market(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  std::int64_t lower_nnz = 0;
  for (int k = 0; k < mat_.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(mat_, k); it; ++it)
      if (it.row() >= it.col()) ++lower_nnz;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << mat_.rows() << " " << mat_.cols() << " " << lower_nnz << "\n";
  char buf[64];
  for (int k = 0; k < mat_.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(mat_, k); it; ++it)
      if (it.row() >= it.col()) {
        std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", static_cast<long>(it.row() + 1),
                      static_cast<long>(it.col() + 1), it.value());
        out << buf;
      }
  if (!out) throw std::runtime_error("write failed: " + path);
}

SymmetricSparse assemble_mass(const Mesh& mesh) {
  validate_mesh(mesh);
  const int d = mesh.dim;
  const double diag_w = 2.0 / ((d + 1) * (d + 2));
  const double off_w = 1.0 / ((d + 1) * (d + 2));
  std::vector<Eigen::Triplet<double>> upper;
  upper.reserve(static_cast<std::size_t>(mesh.n_elements()) * (d + 1) * (d + 2) / 2);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const double vol = mesh.element_volume(e);
    if (!(vol > 0.0)) throw std::invalid_argument("degenerate element " + std::to_string(e));
    for (int a = 0; a <= d; ++a)
      for (int b = a; b <= d; ++b) {
        int i = mesh.elements(e, a), j = mesh.elements(e, b);
        if (i > j) std::swap(i, j);
        upper.emplace_back(i, j, vol * (a == b ? diag_w : off_w));
      }
  }
  return SymmetricSparse::from_upper_triplets(mesh.n_vertices(), upper);
}

SymmetricSparse assemble_stiffness(const Mesh& mesh, const OperatorCoeffs& coeffs) {
  validate_mesh(mesh);
  require(coeffs.kappa2 >= 0.0, "kappa2 must be nonnegative");
  const int d = mesh.dim;
  const bool has_diffusion = !coeffs.diffusion.empty();
  if (has_diffusion)
    require(static_cast<int>(coeffs.diffusion.size()) == mesh.n_elements(),
            "diffusion list must have one matrix per element");

  const double mass_diag_w = 2.0 / ((d + 1) * (d + 2));
  const double mass_off_w = 1.0 / ((d + 1) * (d + 2));

  std::vector<Eigen::Triplet<double>> upper;
  upper.reserve(static_cast<std::size_t>(mesh.n_elements()) * (d + 1) * (d + 2) / 2);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry geom = element_geometry(mesh, e);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    if (has_diffusion) {
      a = coeffs.diffusion[e];
      require(a.rows() == d && a.cols() == d, "diffusion matrix must be dim x dim");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
      const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      if (es.eigenvalues().minCoeff() < -1e-12 * scale)
        throw std::invalid_argument("non-SPD diffusion matrix for element " + std::to_string(e));
    }
    const Eigen::MatrixXd flux = a * geom.gradients;  // d x (d+1)
    for (int p = 0; p <= d; ++p)
      for (int q = p; q <= d; ++q) {
        double value = geom.volume * geom.gradients.col(p).dot(flux.col(q));
        if (coeffs.kappa2 > 0.0)
          value += coeffs.kappa2 * geom.volume * (p == q ? mass_diag_w : mass_off_w);
        int i = mesh.elements(e, p), j = mesh.elements(e, q);
        if (i > j) std::swap(i, j);
        upper.emplace_back(i, j, value);
      }
  }
  return SymmetricSparse::from_upper_triplets(mesh.n_vertices(), upper);
}

SymmetricSparse apply_dirichlet(const SymmetricSparse& a, const Mesh& mesh) {
  require(a.order() == mesh.n_vertices(), "matrix order must equal the mesh vertex count");
  const auto interior = interior_vertices(mesh);
  if (static_cast<int>(interior.size()) == mesh.n_vertices()) return a;
  std::vector<int> new_index(mesh.n_vertices(), -1);
  for (int k = 0; k < static_cast<int>(interior.size()); ++k) new_index[interior[k]] = k;
  std::vector<Eigen::Triplet<double>> upper;
  const auto& m = a.matrix();
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      if (it.row() > it.col()) continue;
      const int i = new_index[it.row()], j = new_index[it.col()];
      if (i >= 0 && j >= 0) upper.emplace_back(i, j, it.value());
    }
  return SymmetricSparse::from_upper_triplets(static_cast<int>(interior.size()), upper);
}

LumpedMass lump_mass(const SymmetricSparse& c) {
  const auto& m = c.matrix();
  LumpedMass lumped;
  lumped.diag = Eigen::VectorXd::Zero(c.order());
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      lumped.diag[it.row()] += it.value();
  for (int i = 0; i < c.order(); ++i)
    if (!(lumped.diag[i] > 0.0))
      throw std::invalid_argument("nonpositive lumped mass at vertex " + std::to_string(i) +
                                  " (broken mesh?)");
  lumped.inv_sqrt = lumped.diag.cwiseSqrt().cwiseInverse();
  return lumped;
}

SymmetricSparse build_S(const LumpedMass& lumped, const SymmetricSparse& g) {
  require(lumped.diag.size() == g.order(), "lumped mass and stiffness orders differ");
  std::vector<Eigen::Triplet<double>> upper;
  upper.reserve(static_cast<std::size_t>(g.nnz() / 2 + g.order()));
  const auto& m = g.matrix();
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
      if (it.row() > it.col()) continue;
      upper.emplace_back(it.row(), it.col(),
                         lumped.inv_sqrt[it.row()] * it.value() * lumped.inv_sqrt[it.col()]);
    }
  return SymmetricSparse::from_upper_triplets(g.order(), upper);
}

Eigen::VectorXd scatter_interior(const Mesh& mesh, const Eigen::VectorXd& interior_values) {
  const auto interior = interior_vertices(mesh);
  require(interior_values.size() == static_cast<Eigen::Index>(interior.size()),
          "interior value count mismatch");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(mesh.n_vertices());
  for (int k = 0; k < static_cast<int>(interior.size()); ++k)
    full[interior[k]] = interior_values[k];
  return full;
}

}  // namespace specfield

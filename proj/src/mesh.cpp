#include "specfield/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace specfield {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t double_bits(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof(b));
  return b;
}

}  // namespace

double Mesh::element_volume(int e) const {
  const int nv = dim + 1;
  Eigen::MatrixXd edges(embed_dim, dim);
  for (int k = 1; k < nv; ++k)
    edges.col(k - 1) = (vertices.row(elements(e, k)) - vertices.row(elements(e, 0))).transpose();
  if (dim == 1) return edges.col(0).norm();
  const Eigen::MatrixXd gram = edges.transpose() * edges;
  double det = gram.determinant();
  if (det < 0.0) det = 0.0;  // roundoff on degenerate simplices
  double factorial = 1.0;
  for (int k = 2; k <= dim; ++k) factorial *= k;
  return std::sqrt(det) / factorial;
}

std::uint64_t Mesh::content_hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = hash_mix(h, static_cast<std::uint64_t>(dim));
  h = hash_mix(h, static_cast<std::uint64_t>(embed_dim));
  h = hash_mix(h, static_cast<std::uint64_t>(n_vertices()));
  h = hash_mix(h, static_cast<std::uint64_t>(n_elements()));
  for (int i = 0; i < n_vertices(); ++i)
    for (int c = 0; c < embed_dim; ++c) h = hash_mix(h, double_bits(vertices(i, c)));
  for (int e = 0; e < n_elements(); ++e)
    for (int k = 0; k <= dim; ++k) h = hash_mix(h, static_cast<std::uint64_t>(elements(e, k)));
  return h;
}

void compute_boundary_flags(Mesh& mesh) {
  mesh.boundary_vertex.assign(mesh.n_vertices(), 0);
  if (mesh.dim == 1) {
    std::vector<int> incidence(mesh.n_vertices(), 0);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      ++incidence[mesh.elements(e, 0)];
      ++incidence[mesh.elements(e, 1)];
    }
    for (int i = 0; i < mesh.n_vertices(); ++i)
      if (incidence[i] == 1) mesh.boundary_vertex[i] = 1;
    return;
  }
  // d = 2: facets are edges
  std::map<std::pair<int, int>, int> incidence;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int k = 0; k < 3; ++k) {
      int a = mesh.elements(e, k), b = mesh.elements(e, (k + 1) % 3);
      if (a > b) std::swap(a, b);
      ++incidence[{a, b}];
    }
  }
  for (const auto& [edge, count] : incidence) {
    if (count == 1) {
      mesh.boundary_vertex[edge.first] = 1;
      mesh.boundary_vertex[edge.second] = 1;
    }
  }
}

void validate_mesh(const Mesh& mesh) {
  require(mesh.dim == 1 || mesh.dim == 2, "mesh dim must be 1 or 2");
  require(mesh.embed_dim >= mesh.dim && mesh.embed_dim <= 3, "embed_dim must satisfy dim <= m <= 3");
  require(mesh.vertices.cols() == mesh.embed_dim, "vertex coordinate width mismatch");
  require(mesh.elements.cols() == mesh.dim + 1, "element tuple width mismatch");
  require(static_cast<int>(mesh.boundary_vertex.size()) == mesh.n_vertices(),
          "boundary flag count mismatch");
  const int n = mesh.n_vertices();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int k = 0; k <= mesh.dim; ++k) {
      const int idx = mesh.elements(e, k);
      if (idx < 0 || idx >= n)
        throw std::invalid_argument("dangling index " + std::to_string(idx) + " in element " +
                                    std::to_string(e));
    }
    if (!(mesh.element_volume(e) > 0.0))
      throw std::invalid_argument("zero-volume element " + std::to_string(e));
  }
  if (mesh.dim == 2) {
    std::map<std::pair<int, int>, int> incidence;
    for (int e = 0; e < mesh.n_elements(); ++e)
      for (int k = 0; k < 3; ++k) {
        int a = mesh.elements(e, k), b = mesh.elements(e, (k + 1) % 3);
        if (a > b) std::swap(a, b);
        ++incidence[{a, b}];
      }
    for (const auto& [edge, count] : incidence)
      require(count == 1 || count == 2, "facet shared by more than two elements");
  }
}

Mesh build_interval_mesh(double a, double b, int n_cells) {
  require(std::isfinite(a) && std::isfinite(b), "interval bounds must be finite");
  require(a < b, "interval requires a < b");
  require(n_cells >= 2, "interval mesh needs at least 2 cells");
  Mesh mesh;
  mesh.dim = 1;
  mesh.embed_dim = 1;
  mesh.vertices.resize(n_cells + 1, 1);
  for (int i = 0; i <= n_cells; ++i)
    mesh.vertices(i, 0) = a + (b - a) * static_cast<double>(i) / n_cells;
  mesh.elements.resize(n_cells, 2);
  for (int e = 0; e < n_cells; ++e) {
    mesh.elements(e, 0) = e;
    mesh.elements(e, 1) = e + 1;
  }
  compute_boundary_flags(mesh);
  return mesh;
}

Mesh build_rectangle_mesh(double lx, double ly, int nx, int ny) {
  require(std::isfinite(lx) && std::isfinite(ly) && lx > 0 && ly > 0,
          "rectangle extents must be positive");
  require(nx >= 2 && ny >= 2, "rectangle mesh needs at least 2 cells per side");
  Mesh mesh;
  mesh.dim = 2;
  mesh.embed_dim = 2;
  const int nvx = nx + 1, nvy = ny + 1;
  mesh.vertices.resize(nvx * nvy, 2);
  auto vid = [nvx](int i, int j) { return j * nvx + i; };
  for (int j = 0; j < nvy; ++j)
    for (int i = 0; i < nvx; ++i) {
      mesh.vertices(vid(i, j), 0) = lx * static_cast<double>(i) / nx;
      mesh.vertices(vid(i, j), 1) = ly * static_cast<double>(j) / ny;
    }
  mesh.elements.resize(2 * nx * ny, 3);
  int e = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.elements.row(e++) << v00, v10, v11;
      mesh.elements.row(e++) << v00, v11, v01;
    }
  compute_boundary_flags(mesh);
  return mesh;
}

Mesh build_icosphere_mesh(double radius, int subdivisions) {
  require(std::isfinite(radius) && radius > 0, "icosphere radius must be positive");
  require(subdivisions >= 0 && subdivisions <= 7, "icosphere subdivisions must lie in [0, 7]");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector3d m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> refined;
    refined.reserve(4 * faces.size());
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    faces = std::move(refined);
  }

  Mesh mesh;
  mesh.dim = 2;
  mesh.embed_dim = 3;
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (int i = 0; i < static_cast<int>(verts.size()); ++i)
    mesh.vertices.row(i) = (radius * verts[i]).transpose();
  mesh.elements.resize(static_cast<int>(faces.size()), 3);
  for (int e = 0; e < static_cast<int>(faces.size()); ++e)
    mesh.elements.row(e) << faces[e][0], faces[e][1], faces[e][2];
  compute_boundary_flags(mesh);
  return mesh;
}

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;
  std::string current{};

  // Next non-empty, non-comment line; false at EOF.
  bool next(bool skip_blank = true) {
    while (std::getline(in, current)) {
      ++line_no;
      const auto first = current.find_first_not_of(" \t\r");
      if (first == std::string::npos) {
        if (skip_blank) continue;
        current.clear();
        return true;
      }
      if (current[first] == '#' && current.compare(first, 9, "#vertices") != 0) continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + msg);
  }
};

Mesh finish_loaded(Mesh mesh) {
  compute_boundary_flags(mesh);
  validate_mesh(mesh);
  return mesh;
}

Mesh load_off(std::istream& in) {
  LineReader reader{in};
  if (!reader.next()) reader.fail("empty file");
  {
    std::istringstream hs(reader.current);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") reader.fail("expected OFF header");
  }
  if (!reader.next()) reader.fail("missing counts line");
  int nv = 0, nf = 0, ne = 0;
  {
    std::istringstream cs(reader.current);
    if (!(cs >> nv >> nf >> ne)) reader.fail("bad counts line");
  }
  if (nv <= 0 || nf <= 0) reader.fail("OFF needs positive vertex and face counts");
  Mesh mesh;
  mesh.dim = 2;
  mesh.embed_dim = 3;
  mesh.vertices.resize(nv, 3);
  for (int i = 0; i < nv; ++i) {
    if (!reader.next()) reader.fail("unexpected EOF in vertex list");
    std::istringstream vs(reader.current);
    if (!(vs >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2)))
      reader.fail("bad vertex coordinates");
  }
  mesh.elements.resize(nf, 3);
  for (int f = 0; f < nf; ++f) {
    if (!reader.next()) reader.fail("unexpected EOF in face list");
    std::istringstream fs(reader.current);
    int k = 0;
    if (!(fs >> k)) reader.fail("bad face line");
    if (k != 3) reader.fail("only triangular faces are supported");
    if (!(fs >> mesh.elements(f, 0) >> mesh.elements(f, 1) >> mesh.elements(f, 2)))
      reader.fail("bad face indices");
  }
  return finish_loaded(std::move(mesh));
}

// Header "#vertices m", one m-column coordinate row per vertex, a blank
// line, then one 0-based index row per element.
Mesh load_node_element(std::istream& in) {
  LineReader reader{in};
  if (!reader.next()) reader.fail("empty file");
  int m = 0;
  {
    std::istringstream hs(reader.current);
    std::string tag;
    hs >> tag;
    if (tag != "#vertices") reader.fail("expected '#vertices m' header");
    if (!(hs >> m) || m < 1 || m > 3) reader.fail("bad ambient dimension in header");
  }
  std::vector<std::vector<double>> coords;
  while (reader.next(/*skip_blank=*/false)) {
    if (reader.current.find_first_not_of(" \t\r") == std::string::npos) break;  // blank separator
    std::istringstream vs(reader.current);
    std::vector<double> row(m);
    for (int c = 0; c < m; ++c)
      if (!(vs >> row[c])) reader.fail("expected " + std::to_string(m) + " coordinates");
    coords.push_back(std::move(row));
  }
  if (coords.empty()) reader.fail("no vertices");
  std::vector<std::vector<int>> elems;
  while (reader.next()) {
    std::istringstream es(reader.current);
    std::vector<int> idx;
    int v;
    while (es >> v) idx.push_back(v);
    if (idx.size() != 2 && idx.size() != 3) reader.fail("element rows need 2 or 3 indices");
    if (!elems.empty() && elems.front().size() != idx.size()) reader.fail("mixed element arity");
    elems.push_back(std::move(idx));
  }
  if (elems.empty()) reader.fail("no elements");
  Mesh mesh;
  mesh.dim = static_cast<int>(elems.front().size()) - 1;
  mesh.embed_dim = m;
  mesh.vertices.resize(static_cast<int>(coords.size()), m);
  for (int i = 0; i < static_cast<int>(coords.size()); ++i)
    for (int c = 0; c < m; ++c) mesh.vertices(i, c) = coords[i][c];
  mesh.elements.resize(static_cast<int>(elems.size()), mesh.dim + 1);
  for (int e = 0; e < static_cast<int>(elems.size()); ++e)
    for (int k = 0; k <= mesh.dim; ++k) mesh.elements(e, k) = elems[e][k];
  return finish_loaded(std::move(mesh));
}

}  // namespace

Mesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  if (format == MeshFormat::Auto) {
    std::string head;
    in >> head;
    in.seekg(0);
    format = (head == "OFF") ? MeshFormat::Off : MeshFormat::NodeElement;
  }
  return format == MeshFormat::Off ? load_off(in) : load_node_element(in);
}

MeshStats mesh_stats(const Mesh& mesh) {
  MeshStats stats;
  stats.n_vertices = mesh.n_vertices();
  stats.n_elements = mesh.n_elements();
  stats.n_interior = static_cast<int>(interior_vertices(mesh).size());
  double h = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e)
    for (int a = 0; a <= mesh.dim; ++a)
      for (int b = a + 1; b <= mesh.dim; ++b)
        h = std::max(h, (mesh.vertices.row(mesh.elements(e, a)) -
                         mesh.vertices.row(mesh.elements(e, b)))
                            .norm());
  stats.h = h;
  return stats;
}

std::vector<int> interior_vertices(const Mesh& mesh) {
  std::vector<int> result;
  result.reserve(mesh.n_vertices());
  for (int i = 0; i < mesh.n_vertices(); ++i)
    if (!mesh.boundary_vertex[i]) result.push_back(i);
  return result;
}

double total_volume(const Mesh& mesh) {
  double vol = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) vol += mesh.element_volume(e);
  return vol;
}

}  // namespace specfield

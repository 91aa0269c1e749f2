#include "specfield/runspec.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace specfield {

namespace {

[[noreturn]] void bad_spec(const std::string& what, const std::string& text) {
  throw std::invalid_argument(what + ": '" + text + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

double to_number(const std::string& s, const std::string& context) {
  if (s == "pi") return std::numbers::pi;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    bad_spec("bad number in " + context, s);
  }
  if (used != s.size()) bad_spec("bad number in " + context, s);
  return v;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::map<std::string, double> parse_kv(const std::string& body, const std::string& text) {
  std::map<std::string, double> kv;
  if (body.empty()) return kv;
  for (const auto& part : split(body, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) bad_spec("expected key=value", text);
    kv[part.substr(0, eq)] = to_number(part.substr(eq + 1), text);
  }
  return kv;
}

}  // namespace

MeshSpec parse_mesh_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) bad_spec("mesh spec needs 'kind:args'", text);
  const std::string kind = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  const auto args = split(body, ',');
  if (kind == "interval") {
    if (args.size() != 3) bad_spec("interval needs a,b,n", text);
    to_number(args[0], text);
    to_number(args[1], text);
    to_number(args[2], text);
  } else if (kind == "rect") {
    if (args.size() != 4) bad_spec("rect needs lx,ly,nx,ny", text);
    for (const auto& a : args) to_number(a, text);
  } else if (kind == "icosphere") {
    if (args.size() != 2) bad_spec("icosphere needs radius,subdivisions", text);
    for (const auto& a : args) to_number(a, text);
  } else if (kind == "file") {
    if (body.empty()) bad_spec("file needs a path", text);
  } else {
    bad_spec("unknown mesh kind", text);
  }
  return MeshSpec{text};
}

Mesh MeshSpec::build() const {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  const auto args = split(body, ',');
  if (kind == "interval")
    return build_interval_mesh(to_number(args[0], text), to_number(args[1], text),
                               static_cast<int>(to_number(args[2], text)));
  if (kind == "rect")
    return build_rectangle_mesh(to_number(args[0], text), to_number(args[1], text),
                                static_cast<int>(to_number(args[2], text)),
                                static_cast<int>(to_number(args[3], text)));
  if (kind == "icosphere")
    return build_icosphere_mesh(to_number(args[0], text),
                                static_cast<int>(to_number(args[1], text)));
  if (kind == "file") {
    const bool off = body.size() >= 4 && body.compare(body.size() - 4, 4, ".off") == 0;
    return load_mesh(body, off ? MeshFormat::Off : MeshFormat::Auto);
  }
  bad_spec("unknown mesh kind", text);
}

GammaSpec parse_gamma_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = colon == std::string::npos ? text : text.substr(0, colon);
  const std::string body = colon == std::string::npos ? "" : text.substr(colon + 1);
  const auto kv = parse_kv(body, text);
  auto get = [&](const std::string& key, double fallback, bool required = false) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      if (required) bad_spec("missing key '" + key + "'", text);
      return fallback;
    }
    return it->second;
  };

  GammaSpec spec;
  spec.name = name;
  if (name == "matern") {
    spec.kappa = get("kappa", 0, true);
    spec.nu = get("nu", 0, true);
    spec.sigma2 = get("sigma2", 1.0);
    spec.d = static_cast<int>(get("d", 0));
  } else if (name == "spde") {
    spec.kappa2 = get("kappa2", 0, true);
    spec.alpha = get("alpha", 0, true);
  } else if (name == "power") {
    spec.exponent = get("exponent", 0, true);
  } else if (name == "const") {
    spec.value = get("value", 1.0);
  } else {
    bad_spec("unknown gamma kind", text);
  }
  return spec;
}

SpectralFunction GammaSpec::build(int mesh_dim) const {
  if (name == "matern") {
    const int dim = d > 0 ? d : mesh_dim;
    return matern_spectral(kappa, nu, dim, sigma2);
  }
  if (name == "spde") {
    if (!(kappa2 >= 0.0)) throw std::invalid_argument("spde: kappa2 must be nonnegative");
    SpectralFunction g;
    const double k2 = kappa2, a = alpha;
    g.eval = [k2, a](double x) { return std::pow(k2 + x, 0.5 * a); };
    g.beta = -0.5 * a;  // |g| grows like x^{a/2}
    g.label = "spde_symbol(kappa2=" + format_number(k2) + ",alpha=" + format_number(a) + ")";
    return from_spde_symbol(g);
  }
  if (name == "power") return power_spectral(exponent);
  if (name == "const") return constant_spectral(value);
  throw std::invalid_argument("unknown gamma kind: " + name);
}

std::string GammaSpec::format() const {
  if (name == "matern") {
    std::string out = "matern:kappa=" + format_number(kappa) + ",nu=" + format_number(nu) +
                      ",sigma2=" + format_number(sigma2);
    if (d > 0) out += ",d=" + format_number(d);
    return out;
  }
  if (name == "spde")
    return "spde:kappa2=" + format_number(kappa2) + ",alpha=" + format_number(alpha);
  if (name == "power") return "power:exponent=" + format_number(exponent);
  if (name == "const") return "const:value=" + format_number(value);
  return name;
}

}  // namespace specfield

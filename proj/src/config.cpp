#include "athero/config.hpp"

#include "athero/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace athero::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parse_double(const std::string& s) {
  const std::string v = trim(s);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidInput("expected a number, got '" + s + "'");
  return x;
}

int parse_int(const std::string& s) {
  const std::string v = trim(s);
  int x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidInput("expected an integer, got '" + s + "'");
  return x;
}

bool parse_bool(const std::string& s) {
  std::string v = trim(s);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw InvalidInput("expected a boolean, got '" + s + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

// "2x2, 4x4"
std::vector<verify::GridSpec> parse_grids(const std::string& s) {
  std::vector<verify::GridSpec> out;
  for (const std::string& item : split(s, ',')) {
    const auto x = item.find_first_of("xX");
    if (x == std::string::npos) throw InvalidInput("expected NxM, got '" + item + "'");
    out.push_back({parse_int(item.substr(0, x)), parse_int(item.substr(x + 1))});
  }
  return out;
}

// "0.010:0.005, 0.012:0.005"
std::vector<std::pair<double, double>> parse_pairs(const std::string& s) {
  std::vector<std::pair<double, double>> out;
  for (const std::string& item : split(s, ',')) {
    const auto c = item.find(':');
    if (c == std::string::npos) throw InvalidInput("expected L0:H0, got '" + item + "'");
    out.emplace_back(parse_double(item.substr(0, c)), parse_double(item.substr(c + 1)));
  }
  return out;
}

Method parse_method(const std::string& s) {
  const std::string v = trim(s);
  if (v == "direct") return Method::Direct;
  if (v == "indirect") return Method::Indirect;
  if (v == "both") return Method::Both;
  throw InvalidInput("expected direct, indirect or both, got '" + s + "'");
}

// ref is a generic accessor returning a reference into the config.
template <typename Parse, typename Ref>
ConfigKey typed_key(std::string section, std::string name, std::string help, Parse parse, Ref ref) {
  return {section, name, help,
          [parse, ref](RunConfig& c, const std::string& v) { ref(c) = parse(v); },
          [ref](const RunConfig& c) { return nlohmann::json(ref(c)); }};
}

#define ATHERO_REF(expr) [](auto& c) -> auto& { return c.expr; }
#define ATHERO_REAL(section, name, help, expr) typed_key(section, name, help, parse_double, ATHERO_REF(expr))
#define ATHERO_INT(section, name, help, expr) typed_key(section, name, help, parse_int, ATHERO_REF(expr))
#define ATHERO_BOOL(section, name, help, expr) typed_key(section, name, help, parse_bool, ATHERO_REF(expr))

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
#define ATHERO_MODEL_KEY(field, help) k.push_back(ATHERO_REAL("model", #field, help, params.field))
  ATHERO_MODEL_KEY(k1, "LDL ingestion by macrophages (1/day)");
  ATHERO_MODEL_KEY(K1, "LDL saturation (g/cm^3)");
  ATHERO_MODEL_KEY(k2, "HDL removal of LDL from foam cells (1/day)");
  ATHERO_MODEL_KEY(K2, "foam cell saturation (g/cm^3)");
  ATHERO_MODEL_KEY(r1, "LDL degradation (1/day)");
  ATHERO_MODEL_KEY(r2, "HDL degradation (1/day)");
  ATHERO_MODEL_KEY(D, "foam cell diffusion (cm^2/day)");
  ATHERO_MODEL_KEY(mu1, "macrophage death rate (1/day)");
  ATHERO_MODEL_KEY(mu2, "foam cell death rate (1/day)");
  ATHERO_MODEL_KEY(lambda, "macrophage production by ox-LDL (1/day)");
  ATHERO_MODEL_KEY(delta, "HDL saturation");
  ATHERO_MODEL_KEY(M0, "macrophage density (g/cm^3)");
  ATHERO_MODEL_KEY(alpha, "LDL influx rate (1/cm)");
  ATHERO_MODEL_KEY(beta, "macrophage influx rate (1/cm)");
  ATHERO_MODEL_KEY(L0, "LDL concentration in the blood (g/cm^3)");
  ATHERO_MODEL_KEY(H0, "HDL concentration in the blood (g/cm^3)");
  ATHERO_MODEL_KEY(epsilon, "initial inner plaque radius");
  ATHERO_MODEL_KEY(T, "final time (days)");
  ATHERO_MODEL_KEY(Kbound, "control upper bound (1/day)");
  ATHERO_MODEL_KEY(denominator_floor, "smallest admissible denominator magnitude");
#undef ATHERO_MODEL_KEY

  k.push_back(ATHERO_INT("grid", "N", "space basis functions", N));
  k.push_back(ATHERO_INT("grid", "M", "time basis functions and control segments", M));
  k.push_back(ATHERO_INT("grid", "Ne", "reference grid N for the convergence study", Ne));
  k.push_back(ATHERO_INT("grid", "Me", "reference grid M for the convergence study", Me));

  k.push_back({"run", "method", "solver used by the run command: direct, indirect or both",
               [](RunConfig& c, const std::string& v) { c.method = parse_method(v); },
               [](const RunConfig& c) { return nlohmann::json(method_name(c.method)); }});
  k.push_back({"run", "out", "output directory",
               [](RunConfig& c, const std::string& v) { c.out = trim(v); },
               [](const RunConfig& c) { return nlohmann::json(c.out); }});

  k.push_back(ATHERO_REAL("fixed_point", "tol", "sup-norm stopping threshold", solver.fixed_point.tol));
  k.push_back(ATHERO_INT("fixed_point", "max_iter", "iteration cap", solver.fixed_point.max_iter));
  k.push_back(ATHERO_BOOL("fixed_point", "implicit_reaction", "linearize the own-field reaction term", solver.fixed_point.implicit_reaction));

  k.push_back(ATHERO_REAL("sqp", "fd_step", "gradient step relative to the bound width", solver.nlp.fd_step));
  k.push_back(ATHERO_REAL("sqp", "tol", "projected-gradient tolerance", solver.nlp.tol));
  k.push_back(ATHERO_INT("sqp", "max_iter", "iteration cap", solver.nlp.max_iter));
  k.push_back(ATHERO_REAL("sqp", "armijo_c", "sufficient-decrease constant", solver.nlp.armijo_c));
  k.push_back(ATHERO_INT("sqp", "max_backtracks", "line-search halvings", solver.nlp.max_backtracks));
  k.push_back(ATHERO_REAL("sqp", "damping", "Powell damping threshold", solver.nlp.damping));
  k.push_back(ATHERO_BOOL("sqp", "concurrent_gradient", "evaluate gradient probes concurrently", solver.nlp.concurrent_gradient));

  k.push_back(ATHERO_REAL("shooting", "fd_step", "Jacobian probe step", solver.shooting.fd_step));
  k.push_back(ATHERO_REAL("shooting", "tol", "residual sup-norm tolerance", solver.shooting.tol));
  k.push_back(ATHERO_INT("shooting", "max_iter", "Newton iteration cap", solver.shooting.max_iter));
  k.push_back(ATHERO_INT("shooting", "max_halvings", "damping halvings per Newton step", solver.shooting.max_halvings));
  k.push_back(ATHERO_REAL("shooting", "sentinel", "residual reported for failed integrations", solver.shooting.sentinel));
  k.push_back(ATHERO_BOOL("shooting", "concurrent_jacobian", "evaluate Jacobian columns concurrently", solver.shooting.concurrent_jacobian));

  k.push_back(ATHERO_INT("rk4", "steps", "minimum uniform steps on [-1, 1]", solver.rk4.steps));
  k.push_back(ATHERO_BOOL("rk4", "stiffness_steps", "raise steps to the stability limit", solver.rk4.stiffness_steps));
  k.push_back(ATHERO_REAL("rk4", "stability_margin", "bound on h times the spectral radius", solver.rk4.stability_margin));
  k.push_back(ATHERO_REAL("rk4", "blowup", "state magnitude treated as instability", solver.rk4.blowup));
  k.push_back(ATHERO_BOOL("rk4", "retry_on_failure", "rerun once with half the step", solver.rk4.retry_on_failure));

  k.push_back({"convergence", "grids", "coarse grids, e.g. 2x2,4x4,8x8",
               [](RunConfig& c, const std::string& v) { c.convergence_grids = parse_grids(v); },
               [](const RunConfig& c) {
                 nlohmann::json j = nlohmann::json::array();
                 for (const auto& g : c.convergence_grids) j.push_back({g.N, g.M});
                 return j;
               }});

  k.push_back({"sweep", "pairs", "(L0, H0) points, e.g. 0.010:0.005,0.012:0.005",
               [](RunConfig& c, const std::string& v) { c.sweep_pairs = parse_pairs(v); },
               [](const RunConfig& c) {
                 nlohmann::json j = nlohmann::json::array();
                 for (const auto& [L0, H0] : c.sweep_pairs) j.push_back({L0, H0});
                 return j;
               }});
  k.push_back(ATHERO_INT("sweep", "samples", "radius samples per trajectory", sweep_samples));
  k.push_back(ATHERO_BOOL("sweep", "concurrent", "solve pairs concurrently", sweep_concurrent));
  return k;
}

#undef ATHERO_BOOL
#undef ATHERO_INT
#undef ATHERO_REAL
#undef ATHERO_REF

const ConfigKey* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : config_keys())
    if (k.section == section && k.name == name) return &k;
  return nullptr;
}

// Line of `name` inside [section], for error messages; 0 when not found.
int locate(const std::string& text, const std::string& section, const std::string& name) {
  std::istringstream in(text);
  std::string line, current;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t[0] == '[') {
      current = trim(t.substr(1, t.find(']') - 1));
    } else if (current == section && trim(t.substr(0, t.find('='))) == name) {
      return n;
    }
  }
  return 0;
}

std::string where(const std::string& origin, int line) {
  return line > 0 ? fmt::format("{}:{}: ", origin, line) : origin + ": ";
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Direct: return "direct";
    case Method::Indirect: return "indirect";
    case Method::Both: return "both";
  }
  return "both";
}

void RunConfig::validate() const {
  params.validate();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidInput("config: " + what);
  };
  require(N >= 1 && M >= 1, "grid N and M must be >= 1");
  require(Ne >= 1 && Me >= 1, "grid Ne and Me must be >= 1");
  for (const auto& g : convergence_grids) {
    require(g.N >= 1 && g.M >= 1, "convergence grids must have N, M >= 1");
    require(g.N < Ne && g.M < Me,
            fmt::format("reference grid ({},{}) must be finer than convergence grid ({},{})", Ne, Me,
                        g.N, g.M));
  }
  require(!out.empty(), "run.out must be non-empty");
  require(solver.fixed_point.tol > 0, "fixed_point.tol must be > 0");
  require(solver.fixed_point.max_iter >= 1, "fixed_point.max_iter must be >= 1");
  require(solver.nlp.fd_step > 0, "sqp.fd_step must be > 0");
  require(solver.nlp.tol > 0, "sqp.tol must be > 0");
  require(solver.nlp.max_iter >= 0, "sqp.max_iter must be >= 0");
  require(solver.nlp.max_backtracks >= 0, "sqp.max_backtracks must be >= 0");
  require(solver.shooting.fd_step > 0, "shooting.fd_step must be > 0");
  require(solver.shooting.tol > 0, "shooting.tol must be > 0");
  require(solver.shooting.max_iter >= 0, "shooting.max_iter must be >= 0");
  require(solver.shooting.max_halvings >= 0, "shooting.max_halvings must be >= 0");
  require(solver.rk4.steps >= 1, "rk4.steps must be >= 1");
  require(solver.rk4.stability_margin > 0, "rk4.stability_margin must be > 0");
  require(solver.rk4.blowup > 0, "rk4.blowup must be > 0");
  require(sweep_samples >= 2, "sweep.samples must be >= 2");
  for (const auto& [L0, H0] : sweep_pairs) {
    require(L0 > 0 && H0 > 0, "sweep pairs must be positive");
    model::ModelParameters p = params;
    p.L0 = L0;
    p.H0 = H0;
    p.validate();
  }
}

void apply_override(RunConfig& cfg, const std::string& dotted, const std::string& value) {
  const auto dot = dotted.find('.');
  const ConfigKey* k =
      dot == std::string::npos ? nullptr : find_key(dotted.substr(0, dot), dotted.substr(dot + 1));
  if (!k) throw InvalidInput("unknown configuration key '" + dotted + "'");
  try {
    k->set(cfg, value);
  } catch (const InvalidInput& e) {
    throw InvalidInput(dotted + ": " + e.what());
  }
}

namespace {

// Drops "; ..." and "# ..." tails that follow whitespace; line count is kept.
std::string strip_inline_comments(const std::string& raw) {
  std::istringstream in(raw);
  std::string out, line;
  while (std::getline(in, line)) {
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == ';' || line[i] == '#') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.erase(i);
        break;
      }
    }
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& raw, const std::string& origin) {
  namespace pt = boost::property_tree;
  const std::string text = strip_inline_comments(raw);
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidInput(where(origin, static_cast<int>(e.line())) + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw InvalidInput(where(origin, locate(text, "", section)) + "key '" + section +
                         "' outside a section");
    }
    for (const auto& [name, leaf] : body) {
      const int line = locate(text, section, name);
      const ConfigKey* k = find_key(section, name);
      if (!k) throw InvalidInput(where(origin, line) + "unknown key '" + name + "' in [" + section + "]");
      try {
        k->set(cfg, leaf.data());
      } catch (const InvalidInput& e) {
        throw InvalidInput(where(origin, line) + section + "." + name + ": " + e.what());
      }
    }
  }
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str(), path);
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k.section][k.name] = k.get(cfg);
  return j;
}

}  // namespace athero::cli

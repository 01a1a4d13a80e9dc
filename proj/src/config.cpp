#include "dbwave/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace dbwave {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::string joined(std::initializer_list<const char*> names) {
  std::string out;
  for (const char* n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

/// Reject keys outside the allowed set, pointing at the offending path.
void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail("expected an object at " + path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* name : allowed)
      if (item.key() == name) {
        known = true;
        break;
      }
    if (!known)
      fail("unknown key '" + item.key() + "' at " + path + " (allowed: " + joined(allowed) + ")");
  }
}

double get_double(const json& j, const std::string& path, const char* key, double dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number()) fail("expected a number at " + path + "/" + key);
  return v.get<double>();
}

int get_int(const json& j, const std::string& path, const char* key, int dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail("expected an integer at " + path + "/" + key);
  return v.get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& path, const char* key,
                      std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    fail("expected a nonnegative integer at " + path + "/" + key);
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_string()) fail("expected a string at " + path + "/" + key);
  return v.get<std::string>();
}

std::vector<double> get_vector(const json& j, const std::string& path, const char* key,
                               std::vector<double> dflt) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_array()) fail("expected an array of numbers at " + path + "/" + key);
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) fail("expected an array of numbers at " + path + "/" + key);
    out.push_back(e.get<double>());
  }
  return out;
}

// --- enum <-> string -------------------------------------------------------

const char* family_name(Family f) {
  switch (f) {
    case Family::zero: return "zero";
    case Family::polynomial: return "polynomial";
    case Family::sine_gordon: return "sine_gordon";
    case Family::klein_gordon: return "klein_gordon";
    case Family::table: return "table";
  }
  return "zero";
}

Family family_from(const std::string& s, const std::string& path) {
  if (s == "zero") return Family::zero;
  if (s == "polynomial") return Family::polynomial;
  if (s == "sine_gordon") return Family::sine_gordon;
  if (s == "klein_gordon") return Family::klein_gordon;
  if (s == "table") return Family::table;
  fail("unknown nonlinearity family '" + s + "' at " + path +
       " (allowed: zero, polynomial, sine_gordon, klein_gordon, table)");
}

const char* scheme_name(Scheme s) {
  return s == Scheme::bdf2 ? "bdf2" : "implicit_midpoint";
}

Scheme scheme_from(const std::string& s, const std::string& path) {
  if (s == "implicit_midpoint") return Scheme::implicit_midpoint;
  if (s == "bdf2") return Scheme::bdf2;
  fail("unknown scheme '" + s + "' at " + path + " (allowed: implicit_midpoint, bdf2)");
}

const char* initial_family_name(InitialFamily f) {
  switch (f) {
    case InitialFamily::random_smooth: return "random_smooth";
    case InitialFamily::constant: return "constant";
    case InitialFamily::gaussian_bump: return "gaussian_bump";
  }
  return "random_smooth";
}

InitialFamily initial_family_from(const std::string& s, const std::string& path) {
  if (s == "random_smooth") return InitialFamily::random_smooth;
  if (s == "constant") return InitialFamily::constant;
  if (s == "gaussian_bump") return InitialFamily::gaussian_bump;
  fail("unknown initial family '" + s + "' at " + path +
       " (allowed: random_smooth, constant, gaussian_bump)");
}

// --- section parsers -------------------------------------------------------

ScalarNonlinearity scalar_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"family", "coeffs", "amplitude", "gamma", "table_s", "table_f"});
  ScalarNonlinearity s;
  s.family = family_from(get_string(j, path, "family", "zero"), path + "/family");
  s.coeffs = get_vector(j, path, "coeffs", {});
  s.amplitude = get_double(j, path, "amplitude", 1.0);
  s.gamma = get_double(j, path, "gamma", 3.0);
  s.table_s = get_vector(j, path, "table_s", {});
  s.table_f = get_vector(j, path, "table_f", {});
  return s;
}

json scalar_to_json(const ScalarNonlinearity& s) {
  json j;
  j["family"] = family_name(s.family);
  j["coeffs"] = s.coeffs;
  j["amplitude"] = s.amplitude;
  j["gamma"] = s.gamma;
  j["table_s"] = s.table_s;
  j["table_f"] = s.table_f;
  return j;
}

}  // namespace

InitialData initial_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"family", "radius", "seed", "center_x", "center_y", "width"});
  InitialData init;
  init.family =
      initial_family_from(get_string(j, path, "family", "random_smooth"), path + "/family");
  init.radius = get_double(j, path, "radius", 1.0);
  init.seed = get_u64(j, path, "seed", 1ull);
  init.center_x = get_double(j, path, "center_x", 0.3);
  init.center_y = get_double(j, path, "center_y", 0.0);
  init.width = get_double(j, path, "width", 0.25);
  return init;
}

RunConfig config_from_json(const json& doc, const std::string& origin) {
  const std::string root = origin + ":";
  check_keys(doc, root, {"run_name", "seed", "output_dir", "mesh", "operator", "nonlinearity",
                         "stepper", "initial", "experiment"});
  RunConfig cfg;
  cfg.run_name = get_string(doc, root, "run_name", "run");
  if (cfg.run_name.empty() || cfg.run_name.find('/') != std::string::npos ||
      cfg.run_name.find("..") != std::string::npos)
    fail("run_name must be a nonempty path-free name at " + root + "/run_name");
  cfg.seed = get_u64(doc, root, "seed", 1ull);
  cfg.output_dir = get_string(doc, root, "output_dir", "");

  if (doc.contains("mesh")) {
    const json& m = doc.at("mesh");
    const std::string path = root + "/mesh";
    check_keys(m, path, {"n_r", "n_theta"});
    cfg.mesh.n_r = get_int(m, path, "n_r", cfg.mesh.n_r);
    cfg.mesh.n_theta = get_int(m, path, "n_theta", cfg.mesh.n_theta);
  }
  if (doc.contains("operator")) {
    const json& o = doc.at("operator");
    const std::string path = root + "/operator";
    check_keys(o, path, {"alpha", "omega"});
    cfg.op.alpha = get_double(o, path, "alpha", cfg.op.alpha);
    cfg.op.omega = get_double(o, path, "omega", cfg.op.omega);
  }
  if (doc.contains("nonlinearity")) {
    const json& n = doc.at("nonlinearity");
    const std::string path = root + "/nonlinearity";
    check_keys(n, path, {"f", "g", "ell1", "ell2", "rho", "mu1", "mu2"});
    if (n.contains("f")) cfg.nonlinearity.f = scalar_from_json(n.at("f"), path + "/f");
    if (n.contains("g")) cfg.nonlinearity.g = scalar_from_json(n.at("g"), path + "/g");
    cfg.nonlinearity.ell1 = get_double(n, path, "ell1", cfg.nonlinearity.ell1);
    cfg.nonlinearity.ell2 = get_double(n, path, "ell2", cfg.nonlinearity.ell2);
    cfg.nonlinearity.rho = get_double(n, path, "rho", cfg.nonlinearity.rho);
    cfg.nonlinearity.mu1 = get_double(n, path, "mu1", cfg.nonlinearity.mu1);
    cfg.nonlinearity.mu2 = get_double(n, path, "mu2", cfg.nonlinearity.mu2);
  }
  if (doc.contains("stepper")) {
    const json& s = doc.at("stepper");
    const std::string path = root + "/stepper";
    check_keys(s, path,
               {"dt", "T", "scheme", "newton_tol", "newton_max", "max_dt_halvings",
                "state_stride"});
    cfg.stepper.dt = get_double(s, path, "dt", cfg.stepper.dt);
    cfg.stepper.T = get_double(s, path, "T", cfg.stepper.T);
    cfg.stepper.scheme =
        scheme_from(get_string(s, path, "scheme", "implicit_midpoint"), path + "/scheme");
    cfg.stepper.newton_tol = get_double(s, path, "newton_tol", cfg.stepper.newton_tol);
    cfg.stepper.newton_max = get_int(s, path, "newton_max", cfg.stepper.newton_max);
    cfg.stepper.max_dt_halvings =
        get_int(s, path, "max_dt_halvings", cfg.stepper.max_dt_halvings);
    cfg.stepper.state_stride = get_int(s, path, "state_stride", cfg.stepper.state_stride);
  }
  if (doc.contains("initial")) cfg.initial = initial_from_json(doc.at("initial"), root + "/initial");
  if (doc.contains("experiment")) {
    if (!doc.at("experiment").is_object()) fail("expected an object at " + root + "/experiment");
    cfg.experiment = doc.at("experiment");
  }

  // Structural sanity that does not depend on the subcommand.
  if (cfg.mesh.n_r < 1 || cfg.mesh.n_theta < 3)
    fail("mesh must have n_r >= 1 and n_theta >= 3 at " + root + "/mesh");
  if (!(cfg.op.alpha >= 0.0 && cfg.op.alpha <= 1.0))
    fail("operator alpha must lie in [0, 1] at " + root + "/operator/alpha");
  if (!(cfg.op.omega > 0.0 && cfg.op.omega <= 1.0))
    fail("operator omega must lie in (0, 1] at " + root + "/operator/omega");
  if (!(cfg.stepper.dt > 0.0)) fail("stepper dt must be positive at " + root + "/stepper/dt");
  if (!(cfg.stepper.T >= 0.0)) fail("stepper T must be nonnegative at " + root + "/stepper/T");
  try {
    cfg.nonlinearity.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid nonlinearity at ") + root + "/nonlinearity: " + e.what());
  }
  return cfg;
}

nlohmann::json parse_document(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line/column diagnostic.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": malformed configuration: " << e.what();
    fail(os.str());
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  return config_from_json(parse_document(text, origin), origin);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open configuration file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail("override '" + assignment + "' must have the form key.path=value");
  std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);
  for (char& c : path)
    if (c == '.') c = '/';
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::parse_error&) {
    value = value_text;  // bare words become strings
  }
  try {
    doc[json::json_pointer("/" + path)] = value;
  } catch (const json::exception& e) {
    fail("cannot apply override '" + assignment + "': " + e.what());
  }
}

nlohmann::json RunConfig::resolved() const {
  json j;
  j["run_name"] = run_name;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["mesh"] = {{"n_r", mesh.n_r}, {"n_theta", mesh.n_theta}};
  j["operator"] = {{"alpha", op.alpha}, {"omega", op.omega}};
  json n;
  n["f"] = scalar_to_json(nonlinearity.f);
  n["g"] = scalar_to_json(nonlinearity.g);
  n["ell1"] = nonlinearity.ell1;
  n["ell2"] = nonlinearity.ell2;
  n["rho"] = nonlinearity.rho;
  n["mu1"] = nonlinearity.mu1;
  n["mu2"] = nonlinearity.mu2;
  j["nonlinearity"] = n;
  j["stepper"] = {{"dt", stepper.dt},
                  {"T", stepper.T},
                  {"scheme", scheme_name(stepper.scheme)},
                  {"newton_tol", stepper.newton_tol},
                  {"newton_max", stepper.newton_max},
                  {"max_dt_halvings", stepper.max_dt_halvings},
                  {"state_stride", stepper.state_stride}};
  j["initial"] = {{"family", initial_family_name(initial.family)},
                  {"radius", initial.radius},
                  {"seed", initial.seed},
                  {"center_x", initial.center_x},
                  {"center_y", initial.center_y},
                  {"width", initial.width}};
  j["experiment"] = experiment;
  return j;
}

void expect_keys(const nlohmann::json& j, const std::string& path,
                 const std::vector<std::string>& allowed) {
  if (!j.is_object()) fail("expected an object at " + path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const std::string& name : allowed)
      if (item.key() == name) {
        known = true;
        break;
      }
    if (!known) {
      std::string list;
      for (const std::string& name : allowed) {
        if (!list.empty()) list += ", ";
        list += name;
      }
      fail("unknown key '" + item.key() + "' at " + path + " (allowed: " + list + ")");
    }
  }
}

double json_number(const nlohmann::json& j, const std::string& path, const char* key,
                   double dflt) {
  return get_double(j, path, key, dflt);
}

int json_integer(const nlohmann::json& j, const std::string& path, const char* key, int dflt) {
  return get_int(j, path, key, dflt);
}

std::string json_text(const nlohmann::json& j, const std::string& path, const char* key,
                      const std::string& dflt) {
  return get_string(j, path, key, dflt);
}

std::vector<double> json_numbers(const nlohmann::json& j, const std::string& path,
                                 const char* key, std::vector<double> dflt) {
  return get_vector(j, path, key, std::move(dflt));
}

std::string RunConfig::content_hash() const {
  const std::string dump = resolved().dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dbwave

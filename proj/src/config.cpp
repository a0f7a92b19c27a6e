#include "hfgl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hfgl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && p == e;
}

struct Entry {
  std::string value;
  int line;
};

struct KeySpec {
  std::string unit;  // empty = dimensionless or non-numeric
  bool required = false;
  std::function<void(RunConfig&, const std::string& key, const Entry&)> apply;
};

// Numeric tokens of a value with an optional trailing unit suffix.
std::vector<double> numbers(const std::string& key, const Entry& e, const std::string& unit) {
  auto tok = split_ws(e.value);
  if (tok.empty()) throw ConfigError(key, e.line, "missing value");
  double probe = 0.0;
  if (!parse_double(tok.back(), probe)) {
    if (unit.empty()) throw ConfigError(key, e.line, "unexpected unit suffix '" + tok.back() + "'");
    if (tok.back() != unit)
      throw ConfigError(key, e.line, "wrong unit suffix '" + tok.back() + "', expected '" + unit + "'");
    tok.pop_back();
  }
  std::vector<double> out;
  for (const auto& t : tok) {
    double v = 0.0;
    if (!parse_double(t, v)) throw ConfigError(key, e.line, "cannot parse number '" + t + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key, e.line, "missing value");
  return out;
}

double scalar(const std::string& key, const Entry& e, const std::string& unit) {
  const auto v = numbers(key, e, unit);
  if (v.size() != 1) throw ConfigError(key, e.line, "expected a single number");
  return v[0];
}

int integer(const std::string& key, const Entry& e) {
  const double v = scalar(key, e, "");
  if (v != static_cast<double>(static_cast<long>(v))) throw ConfigError(key, e.line, "expected an integer");
  return static_cast<int>(v);
}

bool boolean(const std::string& key, const Entry& e) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, e.line, "expected true or false");
}

std::vector<Side> sides(const std::string& key, const Entry& e) {
  std::vector<Side> out;
  for (const auto& t : split_ws(e.value)) {
    if (t == "left") out.push_back(Side::left);
    else if (t == "right") out.push_back(Side::right);
    else if (t == "bottom") out.push_back(Side::bottom);
    else if (t == "top") out.push_back(Side::top);
    else if (t == "none") continue;
    else throw ConfigError(key, e.line, "unknown side '" + t + "'");
  }
  return out;
}

// Semicolon-separated groups of numbers.
std::vector<std::vector<double>> groups(const std::string& key, const Entry& e, const std::string& unit) {
  std::vector<std::vector<double>> out;
  std::string buf;
  std::istringstream is(e.value);
  while (std::getline(is, buf, ';')) {
    if (trim(buf).empty()) continue;
    out.push_back(numbers(key, Entry{buf, e.line}, unit));
  }
  return out;
}

std::map<std::string, KeySpec> key_table() {
  std::map<std::string, KeySpec> t;
  auto mat = [&](const std::string& name, const std::string& unit, double MaterialParams::*field, bool req) {
    t["material." + name] = {unit, req, [field, unit](RunConfig& c, const std::string& k, const Entry& e) {
                               c.material.*field = scalar(k, e, unit);
                             }};
  };
  mat("E", "GPa", &MaterialParams::E, true);
  mat("nu", "", &MaterialParams::nu, true);
  mat("M", "GPa", &MaterialParams::M, true);
  mat("B", "", &MaterialParams::B, true);
  mat("K", "m^2", &MaterialParams::K_intr, true);
  mat("K_c", "m^3*s/kg", &MaterialParams::K_c, true);
  mat("zeta", "", &MaterialParams::zeta, true);
  mat("eta_F", "kg/(m*s)", &MaterialParams::eta_F, true);
  mat("sigma_c", "GPa", &MaterialParams::sigma_c, true);
  mat("n_F0", "", &MaterialParams::n_F0, false);
  mat("k_res", "", &MaterialParams::k_res, false);
  t["material.l"] = {"m", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                       c.material.l = scalar(k, e, "m");
                       c.l_given = true;
                     }};

  t["geometry.extent"] = {"m", true, [](RunConfig& c, const std::string& k, const Entry& e) {
                            const auto v = numbers(k, e, "m");
                            if (v.size() != 4) throw ConfigError(k, e.line, "expected x0 y0 x1 y1");
                            c.extent = Box{{v[0], v[1]}, {v[2], v[3]}};
                          }};
  t["geometry.nx"] = {"", true, [](RunConfig& c, const std::string& k, const Entry& e) { c.nx = integer(k, e); }};
  t["geometry.ny"] = {"", true, [](RunConfig& c, const std::string& k, const Entry& e) { c.ny = integer(k, e); }};
  t["geometry.level"] = {"", false,
                         [](RunConfig& c, const std::string& k, const Entry& e) { c.level = integer(k, e); }};
  t["geometry.notches"] = {"m", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                             c.notches.clear();
                             for (const auto& g : groups(k, e, "m")) {
                               if (g.size() != 4) throw ConfigError(k, e.line, "each notch needs x0 y0 x1 y1");
                               c.notches.push_back({{g[0], g[1]}, {g[2], g[3]}, 0.0});
                             }
                           }};
  t["geometry.footprint"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                               c.initial_footprint.clear();
                               for (double v : numbers(k, e, "")) c.initial_footprint.push_back(static_cast<int>(v));
                             }};

  t["loads.f_bar"] = {"m^2/s", false, [](RunConfig&, const std::string&, const Entry&) {}};  // applied after notches
  t["loads.r_F"] = {"1/s", false,
                    [](RunConfig& c, const std::string& k, const Entry& e) { c.r_F = scalar(k, e, "1/s"); }};
  for (const auto& [name, side] : {std::pair{"left", Side::left}, std::pair{"right", Side::right},
                                   std::pair{"bottom", Side::bottom}, std::pair{"top", Side::top}}) {
    const Side sd = side;
    t[std::string("loads.traction_") + name] = {"GPa", false,
                                                [sd](RunConfig& c, const std::string& k, const Entry& e) {
                                                  const auto v = numbers(k, e, "GPa");
                                                  if (v.size() != 2) throw ConfigError(k, e.line, "expected tx ty");
                                                  c.tractions.push_back({sd, Vec2(v[0], v[1])});
                                                }};
  }

  t["bc.u_fixed"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) { c.u_fixed = sides(k, e); }};
  t["bc.p_fixed"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) { c.p_fixed = sides(k, e); }};

  t["time.dt"] = {"s", true, [](RunConfig& c, const std::string& k, const Entry& e) { c.time.dt = scalar(k, e, "s"); }};
  t["time.t_end"] = {"s", true,
                     [](RunConfig& c, const std::string& k, const Entry& e) { c.time.t_end = scalar(k, e, "s"); }};
  t["time.stagger_tol"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                             c.time.stagger_tol = scalar(k, e, "");
                           }};
  t["time.stagger_max"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                             c.time.stagger_max = integer(k, e);
                           }};
  t["time.max_halvings"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                              c.time.max_halvings = integer(k, e);
                            }};

  t["solver.mode"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                        const std::string v = trim(e.value);
                        if (v == "single") c.mode = SolverMode::single;
                        else if (v == "gl") c.mode = SolverMode::gl;
                        else throw ConfigError(k, e.line, "expected single or gl");
                      }};
  t["solver.newton_tol_abs"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                  c.newton.tol_abs = scalar(k, e, "");
                                }};
  t["solver.newton_tol_rel"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                  c.newton.tol_rel = scalar(k, e, "");
                                }};
  t["solver.newton_max_iter"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                   c.newton.max_iter = integer(k, e);
                                 }};
  t["solver.newton_reuse"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                c.newton.reuse_factorization = boolean(k, e);
                              }};
  t["solver.gl_tol"] = {"", false,
                        [](RunConfig& c, const std::string& k, const Entry& e) { c.gl.gl_tol = scalar(k, e, ""); }};
  t["solver.gl_max_iter"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                               c.gl.gl_max_iter = integer(k, e);
                             }};
  t["solver.aug_refresh"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                               const std::string v = trim(e.value);
                               if (v == "per-step") c.gl.aug_refresh = AugRefresh::per_step;
                               else if (v == "per-run") c.gl.aug_refresh = AugRefresh::per_run;
                               else throw ConfigError(k, e.line, "expected per-step or per-run");
                             }};
  t["solver.coupled_robin"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                 c.gl.coupled_robin = boolean(k, e);
                               }};
  t["solver.inner_up_loop"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                 c.gl.inner_up_loop = boolean(k, e);
                               }};
  t["solver.single_level"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                c.single_level = integer(k, e);
                              }};
  t["solver.adaptivity"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                              c.adapt.enabled = boolean(k, e);
                            }};
  t["solver.d_threshold"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                               c.adapt.d_threshold = scalar(k, e, "");
                             }};
  t["solver.buffer_layers"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                 c.adapt.buffer_layers = integer(k, e);
                               }};
  t["solver.max_correctors"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                  c.adapt.max_correctors = integer(k, e);
                                }};

  t["output.dir"] = {"", false, [](RunConfig& c, const std::string&, const Entry& e) { c.output_dir = trim(e.value); }};
  t["output.snapshot_stride"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) {
                                   c.snapshot_stride = integer(k, e);
                                 }};
  t["output.quiet"] = {"", false, [](RunConfig& c, const std::string& k, const Entry& e) { c.quiet = boolean(k, e); }};
  return t;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  const auto table = key_table();
  std::map<std::string, Entry> entries;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, lineno, "expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!table.count(key)) throw ConfigError(key, lineno, "unknown key");
    if (entries.count(key)) throw ConfigError(key, lineno, "duplicate key");
    entries[key] = {value, lineno};
  }
  for (const auto& [key, spec] : table) {
    if (spec.required && !entries.count(key)) throw ConfigError(key, 0, "missing required key");
  }

  RunConfig cfg;
  for (const auto& [key, e] : entries) table.at(key).apply(cfg, key, e);

  if (entries.count("loads.f_bar")) {
    const Entry& e = entries.at("loads.f_bar");
    const auto v = numbers("loads.f_bar", e, "m^2/s");
    if (v.size() == 1) {
      for (auto& n : cfg.notches) n.f_bar = v[0];
    } else if (v.size() == cfg.notches.size()) {
      for (std::size_t i = 0; i < v.size(); ++i) cfg.notches[i].f_bar = v[i];
    } else {
      throw ConfigError("loads.f_bar", e.line, "expected one value or one per notch");
    }
  }

  auto line_of = [&](const std::string& k) { return entries.count(k) ? entries.at(k).line : 0; };
  if (cfg.nx < 1) throw ConfigError("geometry.nx", line_of("geometry.nx"), "must be >= 1");
  if (cfg.ny < 1) throw ConfigError("geometry.ny", line_of("geometry.ny"), "must be >= 1");
  if (cfg.level < 1) throw ConfigError("geometry.level", line_of("geometry.level"), "must be >= 1");
  if (!(cfg.extent.width() > 0.0) || !(cfg.extent.height() > 0.0))
    throw ConfigError("geometry.extent", line_of("geometry.extent"), "extent must be positive");
  if (!(cfg.time.dt > 0.0)) throw ConfigError("time.dt", line_of("time.dt"), "must be positive");
  if (cfg.time.t_end < cfg.time.dt * (1.0 - 1e-12))
    throw ConfigError("time.t_end", line_of("time.t_end"), "must be >= time.dt");
  if (!(cfg.gl.gl_tol > 0.0)) throw ConfigError("solver.gl_tol", line_of("solver.gl_tol"), "must be positive");
  if (!(cfg.adapt.d_threshold > 0.0 && cfg.adapt.d_threshold < 1.0))
    throw ConfigError("solver.d_threshold", line_of("solver.d_threshold"), "must lie in (0, 1)");
  if (cfg.adapt.buffer_layers < 1)
    throw ConfigError("solver.buffer_layers", line_of("solver.buffer_layers"), "must be >= 1");

  if (!cfg.l_given) cfg.material.l = 2.0 * cfg.h_local();
  try {
    cfg.material.derive();
  } catch (const std::invalid_argument& ex) {
    // name the offending key
    std::string msg = ex.what();
    std::string key = "material";
    for (const char* k : {"E", "nu", "M", "B", "K_intr", "eta_F", "zeta", "sigma_c", "k_res", "l"}) {
      if (msg.find(std::string(": ") + k + " ") != std::string::npos) {
        key = std::string("material.") + (std::string(k) == "K_intr" ? "K" : k);
        break;
      }
    }
    throw ConfigError(key, line_of(key), msg);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path, 0, "cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace hfgl

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hfgl/constitutive.hpp"
#include "hfgl/linalg.hpp"
#include "hfgl/mesh.hpp"
#include "hfgl/poro_problem.hpp"

namespace hfgl {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& msg)
      : std::runtime_error(format(key, line, msg)), key_(key), line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& msg) {
    std::string s = key;
    if (line > 0) s += " (line " + std::to_string(line) + ")";
    return s + ": " + msg;
  }
  std::string key_;
  int line_;
};

struct TimeConfig {
  double dt = 0.1;          // s
  double t_end = 1.0;       // s
  double stagger_tol = 1e-5;
  int stagger_max = 50;
  int max_halvings = 4;
};

enum class AugRefresh { per_step, per_run };

struct GLConfig {
  double gl_tol = 1e-6;
  int gl_max_iter = 25;
  AugRefresh aug_refresh = AugRefresh::per_step;
  bool coupled_robin = true;  // keep u-p cross blocks in the Robin matrices
  bool inner_up_loop = false;
};

struct AdaptConfig {
  double d_threshold = 0.5;
  int buffer_layers = 2;
  int max_correctors = 5;
  bool enabled = true;
};

enum class SolverMode { single, gl };

struct RunConfig {
  MaterialParams material;
  bool l_given = false;

  Box extent{{0.0, 0.0}, {80.0, 80.0}};
  int nx = 10;
  int ny = 10;
  int level = 1;
  std::vector<Notch> notches;
  std::vector<int> initial_footprint;  // optional explicit global cells

  double r_F = 0.0;
  std::vector<SideTraction> tractions;

  std::vector<Side> u_fixed{Side::left, Side::right, Side::bottom, Side::top};
  std::vector<Side> p_fixed{Side::left, Side::right, Side::bottom, Side::top};

  TimeConfig time;
  SolverMode mode = SolverMode::single;
  NewtonOptions newton{.reuse_factorization = true};
  GLConfig gl;
  AdaptConfig adapt;
  int single_level = -1;  // refinement of the single-scale mesh; -1 = geometry.level

  std::string output_dir = "out";
  int snapshot_stride = 0;  // 0 = no snapshots
  bool quiet = false;

  double h_global() const { return extent.width() / nx; }
  double h_local() const { return h_global() / (1 << level); }
};

/// Parses the `section.key = value [unit]` format. Unknown keys, bad values
/// and wrong units raise ConfigError naming the key and line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace hfgl

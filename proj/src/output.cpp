#include "hfgl/output.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hfgl {

double crack_pressure_max(const FieldState& s, double threshold) {
  double best = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < s.p.size(); ++i) {
    if (s.d[i] > threshold && (!any || s.p[i] > best)) {
      best = s.p[i];
      any = true;
    }
  }
  return any ? best : 0.0;
}

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(17);
  return f;
}
}  // namespace

void write_series_csv(const TimeSeries& ts, const std::string& path) {
  auto f = open_out(path);
  f << "t,p_crack_max,total_dofs,gl_iters,wall_ms\n";
  for (const auto& r : ts.rows) {
    f << r.t << ',' << r.p_crack_max << ',' << r.total_dofs << ',' << r.gl_iters << ',' << r.wall_ms << '\n';
  }
}

TimeSeries read_series_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  if (line.rfind("t,p_crack_max", 0) != 0) throw std::runtime_error(path + ": unexpected header");
  TimeSeries ts;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(is, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5) throw std::runtime_error(path + ": bad row at line " + std::to_string(lineno));
    SeriesRow r;
    r.t = std::stod(cols[0]);
    r.p_crack_max = std::stod(cols[1]);
    r.total_dofs = std::stol(cols[2]);
    r.gl_iters = std::stoi(cols[3]);
    r.wall_ms = std::stod(cols[4]);
    ts.rows.push_back(r);
  }
  return ts;
}

void write_gl_diag_csv(const std::vector<GlDiagRow>& rows, const std::string& path) {
  auto f = open_out(path);
  f << "step,corrector_pass,k,imbalance_phi,imbalance_p,force_imbalance,cells_added\n";
  for (const auto& r : rows) {
    f << r.step << ',' << r.corrector_pass << ',' << r.k << ',' << r.imbalance_phi << ',' << r.imbalance_p << ','
      << r.force_imbalance << ',' << r.cells_added << '\n';
  }
}

double max_relative_pressure_diff(const TimeSeries& a, const TimeSeries& b) {
  if (a.rows.size() != b.rows.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const double pa = a.rows[i].p_crack_max;
    const double pb = b.rows[i].p_crack_max;
    const double scale = std::max(std::abs(pa), std::abs(pb));
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(pa - pb) / scale);
  }
  return worst;
}

void write_vtk(const Mesh& mesh, const FieldState& s, const std::string& path) {
  if (s.num_nodes() != mesh.num_nodes()) throw std::invalid_argument("write_vtk: field size does not match mesh");
  auto f = open_out(path);
  f << "# vtk DataFile Version 3.0\nhfgl fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& x : mesh.nodes) f << x.x() << ' ' << x.y() << " 0\n";
  f << "CELLS " << mesh.num_cells() << ' ' << 5 * mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells) f << "4 " << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
  f << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) f << "9\n";
  f << "POINT_DATA " << mesh.num_nodes() << '\n';
  f << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < s.p.size(); ++i) f << s.p[i] << '\n';
  f << "SCALARS phasefield double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < s.d.size(); ++i) f << s.d[i] << '\n';
  f << "VECTORS displacement double\n";
  for (Eigen::Index i = 0; i < s.p.size(); ++i) f << s.u[2 * i] << ' ' << s.u[2 * i + 1] << " 0\n";
  if (!f) throw std::runtime_error("write_vtk: write failed for " + path);
}

VtkData read_vtk(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  VtkData v;
  std::string tok;
  auto fail = [&](const std::string& m) { throw std::runtime_error(path + ": " + m); };
  while (f >> tok) {
    if (tok == "POINTS") {
      std::size_t n;
      std::string type;
      f >> n >> type;
      v.points.resize(n);
      for (auto& p : v.points) {
        double z;
        f >> p.x() >> p.y() >> z;
      }
    } else if (tok == "CELLS") {
      std::size_t n, total;
      f >> n >> total;
      v.cells.resize(n);
      for (auto& c : v.cells) {
        int k;
        f >> k;
        if (k != 4) fail("non-quad cell");
        f >> c[0] >> c[1] >> c[2] >> c[3];
      }
    } else if (tok == "CELL_TYPES") {
      std::size_t n;
      f >> n;
      v.cell_types.resize(n);
      for (auto& t : v.cell_types) f >> t;
    } else if (tok == "SCALARS") {
      std::string name, type, lt, ltname;
      int ncomp;
      f >> name >> type >> ncomp >> lt >> ltname;
      auto& dst = name == "pressure" ? v.pressure : v.phasefield;
      if (name != "pressure" && name != "phasefield") fail("unknown scalar " + name);
      dst.resize(v.points.size());
      for (auto& x : dst) f >> x;
    } else if (tok == "VECTORS") {
      std::string name, type;
      f >> name >> type;
      v.displacement.resize(v.points.size());
      for (auto& x : v.displacement) {
        double z;
        f >> x.x() >> x.y() >> z;
      }
    }
  }
  return v;
}

}  // namespace hfgl

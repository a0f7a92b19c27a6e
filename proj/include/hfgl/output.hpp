#pragma once

#include <string>
#include <vector>

#include "hfgl/assembly.hpp"
#include "hfgl/mesh.hpp"

namespace hfgl {

struct SeriesRow {
  double t = 0.0;
  double p_crack_max = 0.0;  // GPa
  long total_dofs = 0;
  int gl_iters = 0;
  double wall_ms = 0.0;
};

struct TimeSeries {
  std::vector<SeriesRow> rows;
};

struct GlDiagRow {
  int step = 0;
  int corrector_pass = 0;
  int k = 0;
  double imbalance_phi = 0.0;
  double imbalance_p = 0.0;
  double force_imbalance = 0.0;
  int cells_added = 0;
};

/// Max nodal pressure over nodes with d > 0.9; 0 if there are none.
double crack_pressure_max(const FieldState& s, double threshold = 0.9);

void write_series_csv(const TimeSeries& ts, const std::string& path);
TimeSeries read_series_csv(const std::string& path);
void write_gl_diag_csv(const std::vector<GlDiagRow>& rows, const std::string& path);

/// Largest pointwise relative difference of p_crack_max between two series
/// sampled at the same times. Series of different length compare as infinite.
double max_relative_pressure_diff(const TimeSeries& a, const TimeSeries& b);

/// VTK legacy ASCII unstructured grid with pressure, phasefield, displacement.
void write_vtk(const Mesh& mesh, const FieldState& s, const std::string& path);

struct VtkData {
  std::vector<Vec2> points;
  std::vector<std::array<int, 4>> cells;
  std::vector<int> cell_types;
  std::vector<double> pressure;
  std::vector<double> phasefield;
  std::vector<Vec2> displacement;
};

VtkData read_vtk(const std::string& path);

}  // namespace hfgl

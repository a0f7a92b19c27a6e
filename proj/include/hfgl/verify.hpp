#pragma once

#include <string>
#include <vector>

namespace hfgl {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error (or count)
  double tolerance = 0.0;  // pass when value < tolerance
  std::string detail;
  double seconds = 0.0;
};

/// First Piola stress against central differences of the pseudo-energy at
/// `samples` random admissible states, plus the degradation constraints.
CheckResult check_constitutive_fd(int samples = 20, unsigned seed = 7);

/// Mechanics, pressure and phase-field tangents against central differences
/// of the residuals on a 4 x 4 mesh with a partly cracked state.
CheckResult check_tangents_fd();

/// Uniform history without boundary conditions: d = H / (psi_c + H).
CheckResult check_phasefield_closed_form();

/// Sealed, displacement-fixed box with a uniform source: dp = M dt r_F per step.
CheckResult check_sealed_box();

/// GL fixed point with d frozen at 0 against the monolithic mortar-tied solve
/// of the same complement + local problem, over a few injection steps.
CheckResult check_gl_linear(int steps = 2);

/// Dirichlet-Neumann variant reaches the fixed point of the Robin iteration.
CheckResult check_dirichlet_neumann();

/// Mortar partition of unity and nesting identity on an L-shaped footprint.
CheckResult check_mortar_identities();

/// Runs every check above in order.
std::vector<CheckResult> run_verify_suite();

}  // namespace hfgl

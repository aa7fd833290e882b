// Non-reciprocal SSH chain: parameters, real-space Hamiltonian and the
// closed-form model quantities (skin parameter, dispersion, velocity bounds).
#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace nhqlif {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Raised when model parameters or lattice geometry violate their invariants.
class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Boundary { open };

struct ModelParams {
  double t1 = 1.0;     // intracell hopping
  double t2 = 0.5;     // intercell hopping
  double gamma = 0.0;  // non-reciprocity, |gamma| < t1
  int n_cells = 21;
  Boundary boundary = Boundary::open;

  [[nodiscard]] int sites() const { return 2 * n_cells; }

  /// Throws InvalidParams unless t1, t2 > 0, |gamma| < t1 and n_cells >= 1.
  void validate() const;

  [[nodiscard]] ModelParams with_gamma(double g) const {
    ModelParams p = *this;
    p.gamma = g;
    return p;
  }
  [[nodiscard]] ModelParams with_cells(int n) const {
    ModelParams p = *this;
    p.n_cells = n;
    return p;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

enum class SkinDirection { left, right, none };
enum class Phase { topological, trivial, critical };
enum class Sublattice { alpha, beta };

std::string to_string(SkinDirection d);
std::string to_string(Phase p);
std::string to_string(Sublattice s);

struct SkinProfile {
  double r = 1.0;
  double xi = 0.0;  // +infinity in the Hermitian limit
  SkinDirection direction = SkinDirection::none;
  double ipr_th = 0.0;
};

struct PhaseInfo {
  double gap = 0.0;
  Phase phase = Phase::critical;
  double v_max = 0.0;
  double v_lr = 0.0;
};

/// Site-basis Hamiltonian of the open chain. Cell j owns sites 2j (alpha) and
/// 2j+1 (beta); H(2j, 2j+1) = t1 + gamma, H(2j+1, 2j) = t1 - gamma and the
/// intercell bond beta_j -- alpha_{j+1} carries t2 in both directions.
CMatrix build_hamiltonian(const ModelParams& params);

SkinProfile skin_profile(const ModelParams& params);

/// r = sqrt(|(t1 - gamma) / (t1 + gamma)|).
double skin_parameter(double t1, double gamma);

/// Inverse of the skin length map on one branch: returns gamma such that
/// 1/|ln r(gamma)| = xi, with gamma > 0 for SkinDirection::left and gamma < 0
/// for SkinDirection::right.
double gamma_for_skin_length(double xi, SkinDirection branch, double t1);

/// Hermitian band energy E(k) = sqrt(t1^2 + t2^2 + 2 t1 t2 cos k); gamma is ignored.
double dispersion_hermitian(double k, const ModelParams& params);

/// +/- sqrt(d_x^2 + d_y^2) with d_x = t1 + t2 cos k, d_y = t2 sin k + i gamma.
std::pair<Complex, Complex> bloch_energies(double k, const ModelParams& params);

/// dE/dk of the Hermitian band.
double group_velocity(double k, const ModelParams& params);

/// Closed form min(t1, t2).
double max_group_velocity(const ModelParams& params);

/// max |group_velocity| over a uniform grid of `points` momenta on [-pi, pi].
double max_group_velocity_numeric(const ModelParams& params, int points = 100001);

/// 2 max(t1, t2).
double lieb_robinson_velocity(const ModelParams& params);

/// Topological for t2 < t1, trivial for t2 > t1, critical when equal.
PhaseInfo classify_phase(const ModelParams& params);

Sublattice sublattice_of(int site, int n_sites);

/// Alpha site closest to the chain centre (site 20 for 21 cells).
int center_alpha_site(int n_cells);

}  // namespace nhqlif

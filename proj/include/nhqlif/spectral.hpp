// Biorthogonal eigendecomposition, spectral and brute-force propagation, IPR.
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "nhqlif/model.hpp"

namespace nhqlif {

/// Residual above which a spectrum is treated as defective. The residual is
/// max(max|L^H R - I|, kappa * machine epsilon) with kappa the largest
/// eigenvector condition number.
inline constexpr double kBiorthTolerance = 1e-8;

/// Relative eigenvalue tolerance used to pair right/left eigenvectors and to
/// group (near-)degenerate eigenvalues.
inline constexpr double kPairingTolerance = 1e-6;

class DefectiveSpectrum : public std::runtime_error {
 public:
  explicit DefectiveSpectrum(double residual);
  [[nodiscard]] double residual() const { return residual_; }

 private:
  double residual_;
};

/// The state decayed below the representable range and cannot be renormalized.
class DecayedState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Right eigenvectors are columns of `right` (unit 2-norm, largest component
/// real-positive); columns of `left` are the duals with left.adjoint() * right = I.
struct Spectrum {
  CVector eigenvalues;
  CMatrix right;
  CMatrix left;
  double biorth_residual = 0.0;

  [[nodiscard]] int size() const { return static_cast<int>(eigenvalues.size()); }
};

struct WaveState {
  CVector amplitudes;
  double time = 0.0;
  bool normalized = false;

  [[nodiscard]] double norm_squared() const { return amplitudes.squaredNorm(); }
};

/// How a state is scaled after non-unitary evolution.
enum class Normalization {
  renormalize,  // rescale to unit total probability at every requested time
  raw,          // keep the amplitudes of e^{-iHt} psi0 as they are
};

/// Unit-norm state localized on `site`.
WaveState delta_state(int n_sites, int site);

/// Eigenpairs sorted by (Re E, Im E). Throws DefectiveSpectrum when the
/// biorthogonality residual reaches kBiorthTolerance.
Spectrum diagonalize(const CMatrix& h);

/// Same decomposition without the defectiveness check; the caller reads
/// biorth_residual.
Spectrum diagonalize_unchecked(const CMatrix& h);

WaveState propagate(const Spectrum& spectrum, const WaveState& psi0, double t,
                    Normalization mode = Normalization::renormalize);

/// Largest time step accepted by the oracle for this matrix.
double oracle_max_step(const CMatrix& h);

/// Brute-force reference propagator: repeated order-12 Taylor steps of
/// exp(-i H dt) with dt <= dt_sub. dt_sub must not exceed oracle_max_step(h).
WaveState taylor_expm_oracle(const CMatrix& h, const WaveState& psi0, double t, double dt_sub,
                             Normalization mode = Normalization::renormalize);

/// Amplitudes at every time of `times` (columns), evolved from psi0 under h.
/// Uses the spectral propagator and falls back to the Taylor oracle when the
/// spectrum is defective.
struct Evolution {
  CMatrix amplitudes;  // n_sites x n_times
  double biorth_residual = 0.0;
  bool used_oracle = false;
};

Evolution evolve_on_grid(const CMatrix& h, const WaveState& psi0, std::span<const double> times,
                         Normalization mode = Normalization::renormalize);

/// sum |psi|^4 / (sum |psi|^2)^2.
double ipr_numeric(const CVector& psi);

/// Closed-form IPR of an exponential envelope r^n over n_cells cells; 1/n_cells at r = 1.
double ipr_theory(double r, int n_cells);

/// Arithmetic mean of ipr_numeric over the right eigenvectors.
double mean_ipr(const Spectrum& spectrum);

}  // namespace nhqlif

// Quantum Liang information flow for a single excitation: freezing, binary
// site entropy, cumulative QLIF series and the directional asymmetry.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nhqlif/model.hpp"
#include "nhqlif/spectral.hpp"

namespace nhqlif {

/// Copy of h with row and column `site` zeroed.
CMatrix freeze(const CMatrix& h, int site);

/// -p ln p - (1-p) ln(1-p) in nats, p clamped to [0, 1].
double binary_entropy(double p);

double site_entropy(const WaveState& psi, int site);

/// Uniform grid 0, dt, 2 dt, ... up to t_max (inclusive when it lands on a step).
std::vector<double> make_time_grid(double dt = 0.05, double t_max = 20.0);

struct QlifConfig {
  ModelParams params;
  int j0 = 20;
  int source = 26;  // frozen site B
  int target = 14;  // observed site A
  std::vector<double> times = make_time_grid();
  bool allow_mixed_sublattice = false;
  Normalization normalization = Normalization::renormalize;

  /// Throws InvalidParams on bad geometry or grid.
  void validate() const;
};

struct QlifSeries {
  std::vector<double> times;
  std::vector<double> values;  // cumulative T_{B->A}(t), nats
  QlifConfig config;
  double max_biorth_residual = 0.0;
  bool used_oracle = false;
};

/// Evolutions of a delta excitation for one model, cached per
/// (initial site, frozen site). Safe to share between threads.
class QlifSolver {
 public:
  QlifSolver(ModelParams params, std::vector<double> times,
             Normalization normalization = Normalization::renormalize);

  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] const std::vector<double>& times() const { return times_; }

  /// Renormalized amplitudes on the grid; `frozen` selects H with that site frozen.
  const Evolution& evolution(int j0, std::optional<int> frozen) const;

  /// T_{source -> target}(t) for an excitation starting at j0.
  QlifSeries series(int j0, int source, int target, bool allow_mixed_sublattice = false) const;

  /// T_{R->L} - T_{L->R} with L = j0 - d and R = j0 + d.
  QlifSeries delta(int j0, int d, bool allow_mixed_sublattice = false) const;

  /// Largest biorthogonality residual over every evolution computed so far.
  [[nodiscard]] double max_biorth_residual() const;

 private:
  ModelParams params_;
  CMatrix hamiltonian_;
  std::vector<double> times_;
  Normalization normalization_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<Evolution>> cache_;
};

QlifSeries qlif_series(const QlifConfig& config);

/// Directional asymmetry T_{R->L} - T_{L->R}; d must be even unless
/// allow_mixed_sublattice is set.
QlifSeries delta_T(const ModelParams& params, int j0, int d, std::span<const double> times,
                   bool allow_mixed_sublattice = false,
                   Normalization normalization = Normalization::renormalize);

/// Trapezoidal integral of the series over [t_start, t_end].
double integrated_qlif(const QlifSeries& series, double t_start = 4.0, double t_end = 10.0);

/// Finite-difference time derivative of a cumulative series (the QLIF rate).
std::vector<double> qlif_rate(const QlifSeries& series);

/// Linear interpolation of the series at time t (must lie inside the grid).
double value_at(const QlifSeries& series, double t);

}  // namespace nhqlif

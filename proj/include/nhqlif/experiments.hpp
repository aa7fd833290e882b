// Orchestration of the QLIF experiments and the model parameter tables.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhqlif/model.hpp"
#include "nhqlif/qlif.hpp"

namespace nhqlif {

/// Runs task(i) for i in [0, n) on up to `jobs` threads (0 = hardware
/// concurrency). Results must be written by index, so the outcome does not
/// depend on scheduling. The first exception thrown by a task is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task);

/// Geometry shared by the experiments; defaults are the standard 42-site setup.
struct ExperimentSetup {
  ModelParams params;  // gamma is overridden per experiment
  int j0 = 20;
  int d = 6;
  double dt = 0.05;
  double t_max = 20.0;
  double epsilon = 1e-6;
  unsigned jobs = 0;

  [[nodiscard]] std::vector<double> grid() const { return make_time_grid(dt, t_max); }
};

/// Regime boundaries (onset | stabilization | oscillation).
inline constexpr double kRegimeOneEnd = 4.0;
inline constexpr double kRegimeTwoEnd = 10.0;

struct ScissorsPair {
  double gamma = 0.0;
  QlifSeries t_rl;  // source j0 + d, target j0 - d
  QlifSeries t_lr;  // source j0 - d, target j0 + d
  [[nodiscard]] std::vector<double> delta() const;
};

std::vector<ScissorsPair> run_scissors(const ExperimentSetup& setup,
                                       const std::vector<double>& gammas = {-0.3, 0.0, 0.3});

/// Symmetric grid -limit, ..., 0, ..., +limit with the given step.
std::vector<double> gamma_grid(double step = 0.05, double limit = 0.95);

struct GammaScanResult {
  std::vector<double> gammas;
  std::map<double, std::vector<double>> delta_at_t;  // sample time -> Delta_T per gamma
  std::map<double, double> peak_gamma_pos;           // sample time -> argmax |Delta_T|, gamma > 0
  std::map<double, double> peak_gamma_neg;
  std::vector<double> biorth_residuals;  // per gamma; >= kBiorthTolerance means oracle fallback
};

GammaScanResult run_gamma_scan(const ExperimentSetup& setup, const std::vector<double>& gammas,
                               const std::vector<double>& sample_times = {10.0, 15.0});

struct XiScanResult {
  SkinDirection branch = SkinDirection::left;
  std::vector<double> xis;
  std::vector<double> gammas;
  std::vector<double> delta_T;
  double sample_time = 10.0;
  double xi_opt = 0.0;
  std::vector<double> biorth_residuals;
};

std::vector<double> default_xi_targets();

XiScanResult run_xi_scan(const ExperimentSetup& setup, SkinDirection branch,
                         const std::vector<double>& xis, double sample_time = 10.0);

/// Placement of the excitation and observation sites for one sublattice curve.
struct SublatticeConfig {
  std::string label;  // sublattices of (j0, left site, right site), e.g. "aaa"
  int j0 = 20;
  int d = 6;
};

/// Two same-sublattice placements (j0 and j0 + 1 at distance d) and three
/// mixed ones with odd distances d - 1 and d + 1. Labels list the sublattices
/// of j0, j0 - d and j0 + d, with a _d<n> suffix for the mixed placements.
std::vector<SublatticeConfig> default_sublattice_configs(int j0 = 20, int d = 6,
                                                         int n_sites = 42);

struct SublatticeCurve {
  SublatticeConfig config;
  bool same_sublattice = true;
  std::vector<double> delta;  // Delta_T at the sample time, per gamma
  double offset_at_zero = 0.0;
  std::vector<double> biorth_residuals;
};

struct SublatticeComparison {
  std::vector<double> gammas;
  double sample_time = 10.0;
  std::vector<SublatticeCurve> curves;
};

SublatticeComparison run_sublattice_comparison(
    const ExperimentSetup& setup, const std::vector<double>& gammas,
    const std::vector<SublatticeConfig>& configs = default_sublattice_configs(),
    double sample_time = 10.0);

/// First time |value| > epsilon, linearly interpolated between the bracketing
/// grid points; nullopt if never exceeded.
std::optional<double> onset_time(const QlifSeries& series, double epsilon = 1e-6);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct OnsetCurve {
  double gamma = 0.0;
  std::vector<int> distances;
  std::vector<std::optional<double>> onset_times;
  double epsilon = 1e-6;
  LinearFit fit;             // t* = intercept + slope * d over d <= fit_max_distance
  double v_eff = 0.0;        // 1 / slope, sites per unit time
  double v_eff_cells = 0.0;  // v_eff / 2
  std::vector<double> excess;  // (t* - fit(d)) / fit(d); +inf when no onset
  bool blocking = false;       // some d > fit_max_distance exceeds the fit by > 50%
  double max_biorth_residual = 0.0;
};

inline constexpr int kFitMaxDistance = 10;
inline constexpr double kBlockingExcess = 0.5;

std::vector<OnsetCurve> run_lightcone(const ExperimentSetup& setup,
                                      const std::vector<double>& gammas = {-0.3, 0.0, 0.3},
                                      const std::vector<int>& distances = {2, 4, 6, 8, 10, 12,
                                                                           14, 16});

struct OscillationFit {
  double period = 0.0;
  double amplitude = 0.0;  // mean peak value minus mean trough value
  std::vector<double> peak_times;
};

/// Peak analysis of values over t > t_min: local maxima with prominence above
/// prominence_fraction * max|value| in the window, refined by a parabola
/// through the three samples around each maximum. Throws if fewer than three
/// peaks are found.
OscillationFit analyze_oscillation(const std::vector<double>& times,
                                   const std::vector<double>& values, double t_min = 10.0,
                                   double prominence_fraction = 0.1);

struct OscillationReport {
  double gamma = 0.0;
  int n_sites = 0;
  double period = 0.0;
  double delta_e_implied = 0.0;
  double amplitude = 0.0;
  double max_biorth_residual = 0.0;
};

/// Analyses T_{R->L} (standard d, j0 at the central alpha site) for every
/// (gamma, L) on a grid extended to t_max.
std::vector<OscillationReport> run_oscillation(const ExperimentSetup& setup,
                                               const std::vector<double>& gammas = {0.0, 0.3},
                                               const std::vector<int>& sizes = {20, 42, 120},
                                               double t_max = 40.0);

/// Amplitude(L = small) / amplitude(L = large) at fixed gamma.
double amplitude_ratio(const std::vector<OscillationReport>& reports, double gamma, int small_l,
                       int large_l);

struct Table1Row {
  double gamma = 0.0;
  SkinProfile skin;
  double mean_ipr = 0.0;
};

std::vector<Table1Row> build_table1(const ModelParams& base,
                                    const std::vector<double>& gammas = {-0.4, -0.2, 0.0, 0.2,
                                                                         0.4});

struct Table2Row {
  double t2 = 0.0;
  Phase phase = Phase::critical;
  double v_max_numeric = 0.0;
  double v_max_formula = 0.0;
};

std::vector<Table2Row> build_table2(double t1 = 1.0,
                                    const std::vector<double>& t2_values = {0.6, 0.8, 1.0, 1.2,
                                                                            1.4});

/// Mean IPR of the right eigenvectors, without requiring a well-conditioned
/// biorthogonal pairing.
double mean_ipr_of(const ModelParams& params);

}  // namespace nhqlif

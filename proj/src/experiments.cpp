#include "nhqlif/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace nhqlif {

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(jobs, n));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> ScissorsPair::delta() const {
  std::vector<double> out(t_rl.values.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = t_rl.values[k] - t_lr.values[k];
  return out;
}

std::vector<ScissorsPair> run_scissors(const ExperimentSetup& setup,
                                       const std::vector<double>& gammas) {
  std::vector<ScissorsPair> out(gammas.size());
  const auto grid = setup.grid();
  parallel_for(gammas.size(), setup.jobs, [&](std::size_t i) {
    const QlifSolver solver(setup.params.with_gamma(gammas[i]), grid);
    out[i].gamma = gammas[i];
    out[i].t_rl = solver.series(setup.j0, setup.j0 + setup.d, setup.j0 - setup.d);
    out[i].t_lr = solver.series(setup.j0, setup.j0 - setup.d, setup.j0 + setup.d);
  });
  std::sort(out.begin(), out.end(),
            [](const ScissorsPair& a, const ScissorsPair& b) { return a.gamma < b.gamma; });
  return out;
}

std::vector<double> gamma_grid(double step, double limit) {
  if (!(step > 0.0) || !(limit >= 0.0)) throw InvalidParams("gamma grid needs step > 0");
  const auto half = static_cast<int>(std::floor(limit / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * half + 1));
  for (int i = -half; i <= half; ++i) out.push_back(i * step);
  return out;
}

namespace {

std::vector<double> sample_grid(const std::vector<double>& sample_times) {
  std::vector<double> grid{0.0};
  std::vector<double> sorted = sample_times;
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    if (!(t > grid.back())) throw InvalidParams("sample times must be positive and distinct");
    grid.push_back(t);
  }
  return grid;
}

}  // namespace

GammaScanResult run_gamma_scan(const ExperimentSetup& setup, const std::vector<double>& gammas,
                               const std::vector<double>& sample_times) {
  const std::vector<double> grid = sample_grid(sample_times);
  GammaScanResult res;
  res.gammas = gammas;
  std::sort(res.gammas.begin(), res.gammas.end());
  const std::size_t n = res.gammas.size();

  std::vector<std::vector<double>> rows(n);
  res.biorth_residuals.assign(n, 0.0);
  parallel_for(n, setup.jobs, [&](std::size_t i) {
    const QlifSolver solver(setup.params.with_gamma(res.gammas[i]), grid);
    const QlifSeries delta = solver.delta(setup.j0, setup.d);
    rows[i] = delta.values;
    res.biorth_residuals[i] = delta.max_biorth_residual;
  });

  for (double t : sample_times) {
    const auto k = static_cast<std::size_t>(
        std::find(grid.begin(), grid.end(), t) - grid.begin());
    auto& column = res.delta_at_t[t];
    column.resize(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = rows[i][k];

    double best_pos = -1.0;
    double best_neg = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(column[i]);
      if (res.gammas[i] > 0.0 && mag > best_pos) {
        best_pos = mag;
        res.peak_gamma_pos[t] = res.gammas[i];
      } else if (res.gammas[i] < 0.0 && mag > best_neg) {
        best_neg = mag;
        res.peak_gamma_neg[t] = res.gammas[i];
      }
    }
  }
  return res;
}

std::vector<double> default_xi_targets() {
  return {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5,
          6.0, 7.0, 8.0, 10.0, 12.0, 15.0, 20.0, 30.0, 50.0, 100.0};
}

XiScanResult run_xi_scan(const ExperimentSetup& setup, SkinDirection branch,
                         const std::vector<double>& xis, double sample_time) {
  XiScanResult res;
  res.branch = branch;
  res.sample_time = sample_time;
  res.xis = xis;
  std::sort(res.xis.begin(), res.xis.end());
  for (double xi : res.xis) {
    if (!(xi > 0.0)) throw InvalidParams("skin length targets must be positive");
  }
  const std::size_t n = res.xis.size();
  res.gammas.resize(n);
  res.delta_T.resize(n);
  res.biorth_residuals.resize(n);
  const std::vector<double> grid{0.0, sample_time};
  const double cap = 0.999 * setup.params.t1;
  parallel_for(n, setup.jobs, [&](std::size_t i) {
    double g = gamma_for_skin_length(res.xis[i], branch, setup.params.t1);
    g = std::clamp(g, -cap, cap);
    res.gammas[i] = g;
    const QlifSolver solver(setup.params.with_gamma(g), grid);
    const QlifSeries delta = solver.delta(setup.j0, setup.d);
    res.delta_T[i] = delta.values.back();
    res.biorth_residuals[i] = delta.max_biorth_residual;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(res.delta_T[i]) > std::abs(res.delta_T[best])) best = i;
  }
  res.xi_opt = n > 0 ? res.xis[best] : 0.0;
  return res;
}

std::vector<SublatticeConfig> default_sublattice_configs(int j0, int d, int n_sites) {
  auto make = [n_sites](int center, int dist, bool suffix) {
    std::string label;
    for (int site : {center, center - dist, center + dist}) {
      label += sublattice_of(site, n_sites) == Sublattice::alpha ? 'a' : 'b';
    }
    if (suffix) label += "_d" + std::to_string(dist);
    return SublatticeConfig{label, center, dist};
  };
  return {make(j0, d, false), make(j0 + 1, d, false), make(j0, d - 1, true),
          make(j0 + 1, d - 1, true), make(j0, d + 1, true)};
}

SublatticeComparison run_sublattice_comparison(const ExperimentSetup& setup,
                                               const std::vector<double>& gammas,
                                               const std::vector<SublatticeConfig>& configs,
                                               double sample_time) {
  SublatticeComparison res;
  res.gammas = gammas;
  std::sort(res.gammas.begin(), res.gammas.end());
  res.sample_time = sample_time;
  res.curves.resize(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    res.curves[c].config = configs[c];
    res.curves[c].same_sublattice = configs[c].d % 2 == 0;
    res.curves[c].delta.resize(res.gammas.size());
    res.curves[c].biorth_residuals.resize(res.gammas.size());
  }

  const std::vector<double> grid{0.0, sample_time};
  const std::size_t ng = res.gammas.size();
  parallel_for(ng * configs.size(), setup.jobs, [&](std::size_t task) {
    const std::size_t c = task / ng;
    const std::size_t i = task % ng;
    const QlifSolver solver(setup.params.with_gamma(res.gammas[i]), grid);
    const bool mixed = configs[c].d % 2 != 0;
    const QlifSeries delta = solver.delta(configs[c].j0, configs[c].d, mixed);
    res.curves[c].delta[i] = delta.values.back();
    res.curves[c].biorth_residuals[i] = delta.max_biorth_residual;
  });

  for (auto& curve : res.curves) {
    const auto zero = std::find(res.gammas.begin(), res.gammas.end(), 0.0);
    curve.offset_at_zero =
        zero == res.gammas.end() ? std::numeric_limits<double>::quiet_NaN()
                                 : curve.delta[static_cast<std::size_t>(zero - res.gammas.begin())];
  }
  return res;
}

std::optional<double> onset_time(const QlifSeries& series, double epsilon) {
  const auto& t = series.times;
  const auto& v = series.values;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double b = std::abs(v[k]);
    if (!(b > epsilon)) continue;
    if (k == 0) return t[0];
    const double a = std::abs(v[k - 1]);
    return t[k - 1] + (epsilon - a) / (b - a) * (t[k] - t[k - 1]);
  }
  return std::nullopt;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidParams("fit needs two or more points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidParams("fit abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

std::vector<OnsetCurve> run_lightcone(const ExperimentSetup& setup,
                                      const std::vector<double>& gammas,
                                      const std::vector<int>& distances) {
  std::vector<int> ds = distances;
  std::sort(ds.begin(), ds.end());
  for (int d : ds) {
    if (d <= 0 || setup.j0 + d >= setup.params.sites()) {
      throw InvalidParams("light-cone target j0 + " + std::to_string(d) + " outside the chain");
    }
  }
  std::vector<double> gs = gammas;
  std::sort(gs.begin(), gs.end());

  std::vector<OnsetCurve> out(gs.size());
  const auto grid = setup.grid();
  parallel_for(gs.size(), setup.jobs, [&](std::size_t i) {
    OnsetCurve& curve = out[i];
    curve.gamma = gs[i];
    curve.distances = ds;
    curve.epsilon = setup.epsilon;
    const QlifSolver solver(setup.params.with_gamma(gs[i]), grid);
    std::vector<double> fit_d;
    std::vector<double> fit_t;
    for (int d : ds) {
      const bool mixed = d % 2 != 0;
      const auto t_star =
          onset_time(solver.series(setup.j0, setup.j0, setup.j0 + d, mixed), setup.epsilon);
      curve.onset_times.push_back(t_star);
      if (d <= kFitMaxDistance && t_star) {
        fit_d.push_back(d);
        fit_t.push_back(*t_star);
      }
    }
    if (fit_d.size() < 2) {
      throw std::runtime_error("light-cone fit needs two onsets with d <= 10");
    }
    curve.fit = fit_line(fit_d, fit_t);
    curve.v_eff = 1.0 / curve.fit.slope;
    curve.v_eff_cells = curve.v_eff / 2.0;
    curve.max_biorth_residual = solver.max_biorth_residual();
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double predicted = curve.fit.intercept + curve.fit.slope * ds[k];
      const auto& t_star = curve.onset_times[k];
      const double excess = t_star ? (*t_star - predicted) / predicted
                                   : std::numeric_limits<double>::infinity();
      curve.excess.push_back(excess);
      if (ds[k] > kFitMaxDistance && excess > kBlockingExcess) curve.blocking = true;
    }
  });
  return out;
}

namespace {

struct Extremum {
  double time;
  double value;
};

// Local maxima of y with prominence above `threshold`, parabola-refined.
std::vector<Extremum> prominent_maxima(const std::vector<double>& t, const std::vector<double>& y,
                                       double threshold) {
  std::vector<Extremum> out;
  const std::size_t n = y.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    double left_min = y[i];
    for (std::size_t j = i; j-- > 0;) {
      if (y[j] > y[i]) break;
      left_min = std::min(left_min, y[j]);
    }
    double right_min = y[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (y[j] > y[i]) break;
      right_min = std::min(right_min, y[j]);
    }
    const double prominence = y[i] - std::max(left_min, right_min);
    if (!(prominence > threshold)) continue;

    const double ym = y[i - 1];
    const double y0 = y[i];
    const double yp = y[i + 1];
    const double h = 0.5 * (t[i + 1] - t[i - 1]);
    const double curvature = ym - 2.0 * y0 + yp;
    double shift = 0.0;
    if (curvature < 0.0) shift = 0.5 * (ym - yp) / curvature;
    out.push_back({t[i] + shift * h, y0 - 0.25 * (ym - yp) * shift});
  }
  return out;
}

}  // namespace

OscillationFit analyze_oscillation(const std::vector<double>& times,
                                   const std::vector<double>& values, double t_min,
                                   double prominence_fraction) {
  if (times.size() != values.size()) throw InvalidParams("times and values differ in length");
  std::vector<double> t;
  std::vector<double> y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] > t_min) {
      t.push_back(times[k]);
      y.push_back(values[k]);
    }
  }
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  const double threshold = prominence_fraction * scale;

  const auto peaks = prominent_maxima(t, y, threshold);
  std::vector<double> neg(y.size());
  std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return -v; });
  const auto troughs = prominent_maxima(t, neg, threshold);
  if (peaks.size() < 3 || troughs.empty()) {
    throw std::runtime_error("oscillation analysis found " + std::to_string(peaks.size()) +
                             " peaks; at least 3 are required");
  }

  OscillationFit fit;
  for (const auto& p : peaks) fit.peak_times.push_back(p.time);
  fit.period = (peaks.back().time - peaks.front().time) / static_cast<double>(peaks.size() - 1);
  double peak_mean = 0.0;
  for (const auto& p : peaks) peak_mean += p.value;
  peak_mean /= static_cast<double>(peaks.size());
  double trough_mean = 0.0;
  for (const auto& p : troughs) trough_mean -= p.value;
  trough_mean /= static_cast<double>(troughs.size());
  fit.amplitude = peak_mean - trough_mean;
  return fit;
}

std::vector<OscillationReport> run_oscillation(const ExperimentSetup& setup,
                                               const std::vector<double>& gammas,
                                               const std::vector<int>& sizes, double t_max) {
  for (int l : sizes) {
    if (l < 4 || l % 2 != 0) throw InvalidParams("chain sizes must be even and >= 4");
  }
  std::vector<int> ls = sizes;
  std::sort(ls.begin(), ls.end());
  std::vector<double> gs = gammas;
  std::sort(gs.begin(), gs.end());

  const auto grid = make_time_grid(setup.dt, t_max);
  std::vector<OscillationReport> out(ls.size() * gs.size());
  parallel_for(out.size(), setup.jobs, [&](std::size_t task) {
    const int l = ls[task / gs.size()];
    const double g = gs[task % gs.size()];
    const ModelParams params = setup.params.with_gamma(g).with_cells(l / 2);
    const int j0 = center_alpha_site(params.n_cells);
    const QlifSolver solver(params, grid);
    const QlifSeries rl = solver.series(j0, j0 + setup.d, j0 - setup.d);
    const OscillationFit fit = analyze_oscillation(rl.times, rl.values, kRegimeTwoEnd);
    OscillationReport& rep = out[task];
    rep.gamma = g;
    rep.n_sites = l;
    rep.period = fit.period;
    rep.delta_e_implied = 2.0 * std::numbers::pi / fit.period;
    rep.amplitude = fit.amplitude;
    rep.max_biorth_residual = rl.max_biorth_residual;
  });
  return out;
}

double amplitude_ratio(const std::vector<OscillationReport>& reports, double gamma, int small_l,
                       int large_l) {
  const OscillationReport* small = nullptr;
  const OscillationReport* large = nullptr;
  for (const auto& r : reports) {
    if (r.gamma != gamma) continue;
    if (r.n_sites == small_l) small = &r;
    if (r.n_sites == large_l) large = &r;
  }
  if (!small || !large) throw InvalidParams("requested sizes missing from the oscillation report");
  return small->amplitude / large->amplitude;
}

double mean_ipr_of(const ModelParams& params) {
  return mean_ipr(diagonalize_unchecked(build_hamiltonian(params)));
}

std::vector<Table1Row> build_table1(const ModelParams& base, const std::vector<double>& gammas) {
  std::vector<Table1Row> rows;
  for (double g : gammas) {
    const ModelParams p = base.with_gamma(g);
    rows.push_back({g, skin_profile(p), mean_ipr_of(p)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const Table1Row& a, const Table1Row& b) { return a.gamma < b.gamma; });
  return rows;
}

std::vector<Table2Row> build_table2(double t1, const std::vector<double>& t2_values) {
  std::vector<Table2Row> rows;
  for (double t2 : t2_values) {
    ModelParams p;
    p.t1 = t1;
    p.t2 = t2;
    rows.push_back({t2, classify_phase(p).phase, max_group_velocity_numeric(p),
                    max_group_velocity(p)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const Table2Row& a, const Table2Row& b) { return a.t2 < b.t2; });
  return rows;
}

}  // namespace nhqlif

#include "nhqlif/qlif.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nhqlif {

CMatrix freeze(const CMatrix& h, int site) {
  if (site < 0 || site >= h.rows()) {
    throw InvalidParams("frozen site " + std::to_string(site) + " outside the chain");
  }
  CMatrix out = h;
  out.row(site).setZero();
  out.col(site).setZero();
  return out;
}

double binary_entropy(double p) {
  p = std::clamp(p, 0.0, 1.0);
  double s = 0.0;
  if (p > 0.0) s -= p * std::log(p);
  if (p < 1.0) s -= (1.0 - p) * std::log1p(-p);
  return s;
}

double site_entropy(const WaveState& psi, int site) {
  if (site < 0 || site >= psi.amplitudes.size()) {
    throw InvalidParams("entropy site " + std::to_string(site) + " outside the chain");
  }
  return binary_entropy(std::norm(psi.amplitudes(site)));
}

std::vector<double> make_time_grid(double dt, double t_max) {
  if (!(dt > 0.0) || !(t_max >= 0.0)) throw InvalidParams("time grid needs dt > 0, t_max >= 0");
  const auto steps = static_cast<long>(std::floor(t_max / dt + 1e-9));
  std::vector<double> times(static_cast<std::size_t>(steps) + 1);
  for (long i = 0; i <= steps; ++i) times[static_cast<std::size_t>(i)] = static_cast<double>(i) * dt;
  return times;
}

namespace {

void check_grid(std::span<const double> times) {
  if (times.empty() || times.front() != 0.0) throw InvalidParams("time grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw InvalidParams("time grid must be strictly increasing");
  }
}

void check_geometry(int n_sites, int j0, int source, int target, bool allow_mixed) {
  for (int site : {j0, source, target}) {
    if (site < 0 || site >= n_sites) {
      throw InvalidParams("site " + std::to_string(site) + " outside [0, " +
                          std::to_string(n_sites) + ")");
    }
  }
  // source == j0 is the light-cone probe, which freezes the excitation site.
  if (source == target || j0 == target) {
    throw InvalidParams("target must differ from the source and from j0");
  }
  if (!allow_mixed &&
      (sublattice_of(j0, n_sites) != sublattice_of(source, n_sites) ||
       sublattice_of(j0, n_sites) != sublattice_of(target, n_sites))) {
    throw InvalidParams("j0, source and target must share a sublattice");
  }
}

}  // namespace

void QlifConfig::validate() const {
  params.validate();
  check_grid(times);
  check_geometry(params.sites(), j0, source, target, allow_mixed_sublattice);
}

QlifSolver::QlifSolver(ModelParams params, std::vector<double> times, Normalization normalization)
    : params_(params),
      hamiltonian_(build_hamiltonian(params)),
      times_(std::move(times)),
      normalization_(normalization) {
  check_grid(times_);
}

const Evolution& QlifSolver::evolution(int j0, std::optional<int> frozen) const {
  const std::pair<int, int> key{j0, frozen.value_or(-1)};
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
  }
  const WaveState psi0 = delta_state(params_.sites(), j0);
  auto ev = std::make_unique<Evolution>(
      frozen ? evolve_on_grid(freeze(hamiltonian_, *frozen), psi0, times_, normalization_)
             : evolve_on_grid(hamiltonian_, psi0, times_, normalization_));
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.try_emplace(key, std::move(ev));
  return *it->second;
}

QlifSeries QlifSolver::series(int j0, int source, int target, bool allow_mixed_sublattice) const {
  check_geometry(params_.sites(), j0, source, target, allow_mixed_sublattice);
  const Evolution& full = evolution(j0, std::nullopt);
  const Evolution& frozen = evolution(j0, source);

  QlifSeries out;
  out.times = times_;
  out.values.resize(times_.size());
  for (std::size_t k = 0; k < times_.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    out.values[k] = binary_entropy(std::norm(full.amplitudes(target, col))) -
                    binary_entropy(std::norm(frozen.amplitudes(target, col)));
  }
  out.config.params = params_;
  out.config.j0 = j0;
  out.config.source = source;
  out.config.target = target;
  out.config.times = times_;
  out.config.allow_mixed_sublattice = allow_mixed_sublattice;
  out.config.normalization = normalization_;
  out.max_biorth_residual = std::max(full.biorth_residual, frozen.biorth_residual);
  out.used_oracle = full.used_oracle || frozen.used_oracle;
  return out;
}

QlifSeries QlifSolver::delta(int j0, int d, bool allow_mixed_sublattice) const {
  if (d <= 0) throw InvalidParams("distance d must be positive");
  if (d % 2 != 0 && !allow_mixed_sublattice) {
    throw InvalidParams("distance d must be even to keep all sites on one sublattice");
  }
  const int left = j0 - d;
  const int right = j0 + d;
  if (left < 0 || right >= params_.sites()) {
    throw InvalidParams("observation sites j0 +/- d fall outside the chain");
  }
  const QlifSeries rl = series(j0, right, left, allow_mixed_sublattice);
  const QlifSeries lr = series(j0, left, right, allow_mixed_sublattice);
  QlifSeries out = rl;
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = rl.values[k] - lr.values[k];
  out.max_biorth_residual = std::max(rl.max_biorth_residual, lr.max_biorth_residual);
  out.used_oracle = rl.used_oracle || lr.used_oracle;
  return out;
}

double QlifSolver::max_biorth_residual() const {
  std::lock_guard lock(mutex_);
  double worst = 0.0;
  for (const auto& [key, ev] : cache_) worst = std::max(worst, ev->biorth_residual);
  return worst;
}

QlifSeries qlif_series(const QlifConfig& config) {
  config.validate();
  QlifSolver solver(config.params, config.times, config.normalization);
  return solver.series(config.j0, config.source, config.target, config.allow_mixed_sublattice);
}

QlifSeries delta_T(const ModelParams& params, int j0, int d, std::span<const double> times,
                   bool allow_mixed_sublattice, Normalization normalization) {
  QlifSolver solver(params, std::vector<double>(times.begin(), times.end()), normalization);
  return solver.delta(j0, d, allow_mixed_sublattice);
}

double integrated_qlif(const QlifSeries& series, double t_start, double t_end) {
  const auto& t = series.times;
  if (t.empty() || !(t_end > t_start)) throw InvalidParams("empty integration window");
  if (t_start < t.front() - 1e-12 || t_end > t.back() + 1e-12) {
    throw InvalidParams("integration window outside the time grid");
  }
  // Piecewise-linear interpolant integrated exactly over the clipped window.
  double total = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double a = std::max(t[k - 1], t_start);
    const double b = std::min(t[k], t_end);
    if (b <= a) continue;
    const double slope = (series.values[k] - series.values[k - 1]) / (t[k] - t[k - 1]);
    const double fa = series.values[k - 1] + slope * (a - t[k - 1]);
    const double fb = series.values[k - 1] + slope * (b - t[k - 1]);
    total += 0.5 * (fa + fb) * (b - a);
  }
  return total;
}

std::vector<double> qlif_rate(const QlifSeries& series) {
  const auto& t = series.times;
  const auto& v = series.values;
  const std::size_t n = t.size();
  std::vector<double> rate(n, 0.0);
  if (n < 2) return rate;
  rate.front() = (v[1] - v[0]) / (t[1] - t[0]);
  rate.back() = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t k = 1; k + 1 < n; ++k) rate[k] = (v[k + 1] - v[k - 1]) / (t[k + 1] - t[k - 1]);
  return rate;
}

double value_at(const QlifSeries& series, double t) {
  const auto& times = series.times;
  if (times.empty() || t < times.front() - 1e-12 || t > times.back() + 1e-12) {
    throw InvalidParams("time " + std::to_string(t) + " outside the series grid");
  }
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
  const auto k = static_cast<std::size_t>(it - times.begin());
  if (std::abs(times[k] - t) <= 1e-12 || k == 0) return series.values[k];
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - w) * series.values[k - 1] + w * series.values[k];
}

}  // namespace nhqlif

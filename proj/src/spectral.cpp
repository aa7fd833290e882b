#include "nhqlif/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace nhqlif {

namespace {

constexpr int kTaylorOrder = 12;
constexpr double kStepTruncationLimit = 1e-12;
constexpr double kDecayFloor = 1e-300;

bool lex_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

double one_norm(const CMatrix& h) {
  return h.cwiseAbs().colwise().sum().maxCoeff();
}

// Union-find grouping of eigenvalues closer than tol.
std::vector<std::vector<int>> degenerate_clusters(const CVector& e, double tol) {
  const int n = static_cast<int>(e.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (std::abs(e(a) - e(b)) <= tol) parent[find(a)] = find(b);
    }
  }
  std::vector<std::vector<int>> groups(n);
  for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

void renormalize(CVector& v) {
  const double nrm2 = v.squaredNorm();
  if (!(nrm2 >= kDecayFloor) || !std::isfinite(nrm2)) {
    throw DecayedState("state norm " + std::to_string(nrm2) + " cannot be renormalized");
  }
  v /= std::sqrt(nrm2);
}

CMatrix taylor_step_matrix(const CMatrix& h, double dt) {
  const int n = static_cast<int>(h.rows());
  const double estimate = std::pow(one_norm(h) * dt, kTaylorOrder + 1) /
                          std::tgamma(static_cast<double>(kTaylorOrder + 2));
  if (estimate > kStepTruncationLimit) {
    throw std::invalid_argument("Taylor step rejected: truncation estimate " +
                                std::to_string(estimate));
  }
  const CMatrix a = Complex(0.0, -dt) * h;
  CMatrix term = CMatrix::Identity(n, n);
  CMatrix sum = term;
  for (int k = 1; k <= kTaylorOrder; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// Step matrices for an oracle run, reused across equal grid spacings.
class StepCache {
 public:
  StepCache(const CMatrix& h, double dt_max) : h_(h), dt_max_(dt_max) {}

  void advance(CVector& v, double interval, Normalization mode) {
    if (interval <= 0.0) return;
    const auto steps = static_cast<long>(std::ceil(interval / dt_max_ * (1.0 - 1e-12)));
    const long n = std::max(1L, steps);
    const CMatrix& u = matrix_for(interval / static_cast<double>(n));
    for (long s = 0; s < n; ++s) {
      v = u * v;
      if (mode == Normalization::renormalize) {
        const double nrm2 = v.squaredNorm();
        if (nrm2 > 1e100 || nrm2 < 1e-100) renormalize(v);
      }
    }
  }

 private:
  const CMatrix& matrix_for(double dt) {
    for (const auto& [step, u] : cache_) {
      if (std::abs(step - dt) <= 1e-12 * dt) return u;
    }
    cache_.emplace_back(dt, taylor_step_matrix(h_, dt));
    return cache_.back().second;
  }

  const CMatrix& h_;
  double dt_max_;
  std::vector<std::pair<double, CMatrix>> cache_;
};

}  // namespace

DefectiveSpectrum::DefectiveSpectrum(double residual)
    : std::runtime_error("defective spectrum: biorthogonality residual " +
                         std::to_string(residual)),
      residual_(residual) {}

WaveState delta_state(int n_sites, int site) {
  if (site < 0 || site >= n_sites) {
    throw InvalidParams("initial site " + std::to_string(site) + " outside the chain");
  }
  WaveState s;
  s.amplitudes = CVector::Zero(n_sites);
  s.amplitudes(site) = 1.0;
  s.time = 0.0;
  s.normalized = true;
  return s;
}

Spectrum diagonalize_unchecked(const CMatrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("matrix must be square");
  if (!h.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  const int n = static_cast<int>(h.rows());

  Eigen::ComplexEigenSolver<CMatrix> right_solver(h);
  Eigen::ComplexEigenSolver<CMatrix> left_solver(h.adjoint());
  if (right_solver.info() != Eigen::Success || left_solver.info() != Eigen::Success) {
    throw DefectiveSpectrum(std::numeric_limits<double>::infinity());
  }
  const CVector& e = right_solver.eigenvalues();
  const CVector mu = left_solver.eigenvalues().conjugate();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return lex_less(e(a), e(b)); });

  const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
  const double tol = kPairingTolerance * scale;

  Spectrum s;
  s.eigenvalues.resize(n);
  s.right.resize(n, n);
  s.left.resize(n, n);

  bool paired = true;
  std::vector<char> used(n, 0);
  for (int col = 0; col < n; ++col) {
    const int i = order[col];
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int m = 0; m < n; ++m) {
      if (used[m]) continue;
      const double dist = std::abs(e(i) - mu(m));
      if (dist < best_dist || (dist == best_dist && best >= 0 && lex_less(mu(m), mu(best)))) {
        best = m;
        best_dist = dist;
      }
    }
    used[best] = 1;
    if (best_dist > tol) paired = false;

    s.eigenvalues(col) = e(i);
    CVector r = right_solver.eigenvectors().col(i);
    r.normalize();
    Eigen::Index argmax = 0;
    r.cwiseAbs().maxCoeff(&argmax);
    r *= std::conj(r(argmax)) / std::abs(r(argmax));
    r(argmax) = std::abs(r(argmax));
    s.right.col(col) = r;
    s.left.col(col) = left_solver.eigenvectors().col(best);
  }

  // Biorthogonalize inside each (near-)degenerate block; for a simple
  // eigenvalue this is the scalar normalization <<n|n>> = 1.
  for (const auto& cluster : degenerate_clusters(s.eigenvalues, tol)) {
    const auto k = static_cast<Eigen::Index>(cluster.size());
    CMatrix lc(n, k);
    CMatrix rc(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      lc.col(c) = s.left.col(cluster[c]);
      rc.col(c) = s.right.col(cluster[c]);
    }
    const CMatrix w = lc.adjoint() * rc;
    Eigen::FullPivLU<CMatrix> lu(w);
    if (!lu.isInvertible()) {
      paired = false;
      continue;
    }
    lc = lc * lu.inverse().adjoint();
    for (Eigen::Index c = 0; c < k; ++c) s.left.col(cluster[c]) = lc.col(c);
  }

  const CMatrix overlap = s.left.adjoint() * s.right;
  double residual = (overlap - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  // A (near-)defective matrix yields nearly parallel right eigenvectors whose
  // duals are huge; the overlap alone stays small after the block rescaling,
  // so fold in the eigenvector condition number ||l_n|| ||r_n|| times epsilon.
  const double kappa = s.left.colwise().norm().maxCoeff();
  residual = std::max(residual, kappa * std::numeric_limits<double>::epsilon());
  s.biorth_residual = paired && std::isfinite(residual)
                          ? residual
                          : std::numeric_limits<double>::infinity();
  return s;
}

Spectrum diagonalize(const CMatrix& h) {
  Spectrum s = diagonalize_unchecked(h);
  if (!(s.biorth_residual < kBiorthTolerance)) throw DefectiveSpectrum(s.biorth_residual);
  return s;
}

WaveState propagate(const Spectrum& spectrum, const WaveState& psi0, double t,
                    Normalization mode) {
  if (!(spectrum.biorth_residual < kBiorthTolerance)) {
    throw DefectiveSpectrum(spectrum.biorth_residual);
  }
  if (!psi0.normalized) throw std::invalid_argument("propagate expects a normalized state");
  if (psi0.amplitudes.size() != spectrum.size()) {
    throw std::invalid_argument("state and spectrum dimensions differ");
  }
  if (t == 0.0) return psi0;
  const CVector coeff = spectrum.left.adjoint() * psi0.amplitudes;
  const CVector phases =
      (Complex(0.0, -t) * spectrum.eigenvalues).array().exp().matrix();
  WaveState out;
  out.amplitudes = spectrum.right * phases.cwiseProduct(coeff);
  out.time = psi0.time + t;
  out.normalized = mode == Normalization::renormalize;
  if (out.normalized) renormalize(out.amplitudes);
  return out;
}

double oracle_max_step(const CMatrix& h) {
  const double nrm = one_norm(h);
  return nrm > 0.0 ? 0.01 / nrm : std::numeric_limits<double>::infinity();
}

WaveState taylor_expm_oracle(const CMatrix& h, const WaveState& psi0, double t, double dt_sub,
                             Normalization mode) {
  if (h.rows() != h.cols() || h.rows() != psi0.amplitudes.size()) {
    throw std::invalid_argument("oracle: dimension mismatch");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("oracle: time must be non-negative");
  if (!(dt_sub > 0.0) || dt_sub > oracle_max_step(h) * (1.0 + 1e-12)) {
    throw std::invalid_argument("oracle: dt_sub must lie in (0, 0.01/||H||]");
  }
  WaveState out = psi0;
  StepCache steps(h, dt_sub);
  steps.advance(out.amplitudes, t, mode);
  out.time = psi0.time + t;
  out.normalized = mode == Normalization::renormalize;
  if (out.normalized) renormalize(out.amplitudes);
  return out;
}

Evolution evolve_on_grid(const CMatrix& h, const WaveState& psi0, std::span<const double> times,
                         Normalization mode) {
  const auto n = h.rows();
  Evolution ev;
  ev.amplitudes.resize(n, static_cast<Eigen::Index>(times.size()));

  Spectrum spectrum = diagonalize_unchecked(h);
  ev.biorth_residual = spectrum.biorth_residual;
  if (spectrum.biorth_residual < kBiorthTolerance) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      ev.amplitudes.col(static_cast<Eigen::Index>(k)) =
          propagate(spectrum, psi0, times[k], mode).amplitudes;
    }
    return ev;
  }

  ev.used_oracle = true;
  StepCache steps(h, oracle_max_step(h));
  CVector v = psi0.amplitudes;
  double now = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] == 0.0) {
      ev.amplitudes.col(static_cast<Eigen::Index>(k)) = psi0.amplitudes;
      continue;
    }
    steps.advance(v, times[k] - now, mode);
    now = times[k];
    if (mode == Normalization::renormalize) renormalize(v);
    ev.amplitudes.col(static_cast<Eigen::Index>(k)) = v;
  }
  return ev;
}

double ipr_numeric(const CVector& psi) {
  const double p2 = psi.squaredNorm();
  if (!(p2 > 0.0)) throw std::invalid_argument("IPR of a zero vector");
  const double p4 = psi.cwiseAbs2().cwiseAbs2().sum();
  return p4 / (p2 * p2);
}

double ipr_theory(double r, int n_cells) {
  if (!(r > 0.0)) throw std::invalid_argument("skin parameter must be positive");
  if (n_cells < 1) throw std::invalid_argument("need at least one cell");
  if (r == 1.0) return 1.0 / n_cells;
  const double lr = std::abs(std::log(r));  // r > 1 decays from the other end
  const double one_minus_r2 = -std::expm1(-2.0 * lr);
  const double one_minus_r2n = -std::expm1(-2.0 * n_cells * lr);
  const double r2 = std::exp(-2.0 * lr);
  const double r2n = std::exp(-2.0 * n_cells * lr);
  return one_minus_r2 / (1.0 + r2) * (1.0 + r2n) / one_minus_r2n;
}

double mean_ipr(const Spectrum& spectrum) {
  double sum = 0.0;
  for (int c = 0; c < spectrum.size(); ++c) sum += ipr_numeric(spectrum.right.col(c));
  return sum / spectrum.size();
}

}  // namespace nhqlif

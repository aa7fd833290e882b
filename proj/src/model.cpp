#include "nhqlif/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nhqlif/spectral.hpp"

namespace nhqlif {

void ModelParams::validate() const {
  if (!(t1 > 0.0) || !std::isfinite(t1)) throw InvalidParams("t1 must be positive");
  if (!(t2 > 0.0) || !std::isfinite(t2)) throw InvalidParams("t2 must be positive");
  if (!std::isfinite(gamma) || std::abs(gamma) >= t1)
    throw InvalidParams("|gamma| must be strictly below t1");
  if (n_cells < 1) throw InvalidParams("n_cells must be positive");
}

std::string to_string(SkinDirection d) {
  switch (d) {
    case SkinDirection::left: return "left";
    case SkinDirection::right: return "right";
    case SkinDirection::none: return "none";
  }
  return "none";
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::topological: return "topological";
    case Phase::trivial: return "trivial";
    case Phase::critical: return "critical";
  }
  return "critical";
}

std::string to_string(Sublattice s) { return s == Sublattice::alpha ? "alpha" : "beta"; }

CMatrix build_hamiltonian(const ModelParams& params) {
  params.validate();
  if (params.n_cells < 2) throw InvalidParams("chain needs at least two unit cells");

  const int n = params.sites();
  CMatrix h = CMatrix::Zero(n, n);
  for (int j = 0; j < params.n_cells; ++j) {
    const int a = 2 * j;
    const int b = a + 1;
    h(a, b) = params.t1 + params.gamma;
    h(b, a) = params.t1 - params.gamma;
    if (j + 1 < params.n_cells) {
      h(a + 2, b) = params.t2;
      h(b, a + 2) = params.t2;
    }
  }
  return h;
}

double skin_parameter(double t1, double gamma) {
  return std::sqrt(std::abs((t1 - gamma) / (t1 + gamma)));
}

SkinProfile skin_profile(const ModelParams& params) {
  params.validate();
  SkinProfile s;
  s.r = skin_parameter(params.t1, params.gamma);
  if (params.gamma == 0.0) {
    s.r = 1.0;
    s.xi = std::numeric_limits<double>::infinity();
    s.direction = SkinDirection::none;
  } else {
    s.xi = 1.0 / std::abs(std::log(s.r));
    s.direction = params.gamma > 0.0 ? SkinDirection::left : SkinDirection::right;
  }
  s.ipr_th = ipr_theory(s.r, params.n_cells);
  return s;
}

double gamma_for_skin_length(double xi, SkinDirection branch, double t1) {
  if (!(xi > 0.0)) throw InvalidParams("skin length must be positive");
  if (branch == SkinDirection::none) {
    throw InvalidParams("skin length inversion needs a left or right branch");
  }
  if (std::isinf(xi)) return 0.0;
  const double r = std::exp(branch == SkinDirection::left ? -1.0 / xi : 1.0 / xi);
  const double r2 = r * r;
  return t1 * (1.0 - r2) / (1.0 + r2);
}

double dispersion_hermitian(double k, const ModelParams& params) {
  const double t1 = params.t1;
  const double t2 = params.t2;
  // Clamp: at the critical point the radicand can round to -1e-17.
  return std::sqrt(std::max(0.0, t1 * t1 + t2 * t2 + 2.0 * t1 * t2 * std::cos(k)));
}

std::pair<Complex, Complex> bloch_energies(double k, const ModelParams& params) {
  const Complex dx = params.t1 + params.t2 * std::cos(k);
  const Complex dy = Complex(params.t2 * std::sin(k), params.gamma);
  const Complex e = std::sqrt(dx * dx + dy * dy);
  return {e, -e};
}

double group_velocity(double k, const ModelParams& params) {
  const double e = dispersion_hermitian(k, params);
  const double num = -params.t1 * params.t2 * std::sin(k);
  // E vanishes only at the critical point, k = pi, where |v| -> t.
  if (e == 0.0) return -params.t1;
  return num / e;
}

double max_group_velocity(const ModelParams& params) { return std::min(params.t1, params.t2); }

double max_group_velocity_numeric(const ModelParams& params, int points) {
  if (points < 2) throw InvalidParams("momentum grid needs at least two points");
  double best = 0.0;
  const double step = 2.0 * std::numbers::pi / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double k = -std::numbers::pi + i * step;
    best = std::max(best, std::abs(group_velocity(k, params)));
  }
  return best;
}

double lieb_robinson_velocity(const ModelParams& params) {
  return 2.0 * std::max(params.t1, params.t2);
}

PhaseInfo classify_phase(const ModelParams& params) {
  PhaseInfo info;
  info.gap = 2.0 * std::abs(params.t1 - params.t2);
  if (params.t2 < params.t1) {
    info.phase = Phase::topological;
  } else if (params.t2 > params.t1) {
    info.phase = Phase::trivial;
  } else {
    info.phase = Phase::critical;
  }
  info.v_max = max_group_velocity(params);
  info.v_lr = lieb_robinson_velocity(params);
  return info;
}

Sublattice sublattice_of(int site, int n_sites) {
  if (site < 0 || site >= n_sites) {
    throw InvalidParams("site " + std::to_string(site) + " outside [0, " +
                        std::to_string(n_sites) + ")");
  }
  return site % 2 == 0 ? Sublattice::alpha : Sublattice::beta;
}

int center_alpha_site(int n_cells) { return 2 * (n_cells / 2); }

}  // namespace nhqlif

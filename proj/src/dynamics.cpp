#include "mz/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "mz/rng.hpp"

namespace mz {
namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// ODE kinds have dimension at most 3; the integrator hot path runs on stack
// arrays to keep per-substep cost allocation-free.
constexpr int kMaxOdeDim = 3;

void ode_rhs_into(const SystemSpec& spec, const double* s, double* d) {
  switch (spec.kind) {
    case SystemKind::ToyLogistic:
      d[0] = s[0] - s[0] * s[0];
      return;
    case SystemKind::VanDerPol:
      d[0] = s[1];
      d[1] = spec.mu * (1.0 - s[0] * s[0]) * s[1] - s[0];
      return;
    case SystemKind::Lorenz63:
      d[0] = spec.sigma * (s[1] - s[0]);
      d[1] = s[0] * (spec.rho - s[2]) - s[1];
      d[2] = s[0] * s[1] - spec.beta * s[2];
      return;
    case SystemKind::KuramotoSivashinsky:
      fail("ode_rhs: not an ODE kind");
  }
  fail("unreachable system kind");
}

void rk4_inplace(const SystemSpec& spec, double* s, int d, double dt) {
  double k1[kMaxOdeDim] = {}, k2[kMaxOdeDim] = {}, k3[kMaxOdeDim] = {},
         k4[kMaxOdeDim] = {}, tmp[kMaxOdeDim] = {};
  ode_rhs_into(spec, s, k1);
  for (int i = 0; i < d; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
  ode_rhs_into(spec, tmp, k2);
  for (int i = 0; i < d; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
  ode_rhs_into(spec, tmp, k3);
  for (int i = 0; i < d; ++i) tmp[i] = s[i] + dt * k3[i];
  ode_rhs_into(spec, tmp, k4);
  for (int i = 0; i < d; ++i) {
    s[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(s[i]) || std::abs(s[i]) > kBlowUpThreshold)
      fail("numerical blow-up");
  }
}

}  // namespace

SystemSpec SystemSpec::toy_logistic() {
  SystemSpec s;
  s.kind = SystemKind::ToyLogistic;
  return s;
}

SystemSpec SystemSpec::van_der_pol(double mu) {
  SystemSpec s;
  s.kind = SystemKind::VanDerPol;
  s.mu = mu;
  return s;
}

SystemSpec SystemSpec::lorenz63(double sigma, double rho, double beta) {
  SystemSpec s;
  s.kind = SystemKind::Lorenz63;
  s.sigma = sigma;
  s.rho = rho;
  s.beta = beta;
  return s;
}

SystemSpec SystemSpec::kuramoto_sivashinsky(double L, Index n_grid) {
  SystemSpec s;
  s.kind = SystemKind::KuramotoSivashinsky;
  s.L = L;
  s.n_grid = n_grid;
  return s;
}

Index SystemSpec::dim() const {
  switch (kind) {
    case SystemKind::ToyLogistic: return 1;
    case SystemKind::VanDerPol: return 2;
    case SystemKind::Lorenz63: return 3;
    case SystemKind::KuramotoSivashinsky: return n_grid;
  }
  fail("unreachable system kind");
}

void SystemSpec::validate() const {
  switch (kind) {
    case SystemKind::ToyLogistic:
      break;
    case SystemKind::VanDerPol:
      if (!(mu > 0)) fail("VanDerPol mu must be > 0");
      break;
    case SystemKind::Lorenz63:
      if (!(sigma > 0 && rho > 0 && beta > 0))
        fail("Lorenz63 parameters must be > 0");
      break;
    case SystemKind::KuramotoSivashinsky:
      if (!(L > 0)) fail("KS domain length must be > 0");
      if (n_grid < 16 || n_grid % 2 != 0)
        fail("KS n_grid must be even and >= 16");
      break;
  }
}

void TrajectoryConfig::validate() const {
  if (!(delta > 0)) fail("sample interval must be > 0");
  if (n_snapshots < 2) fail("need at least 2 snapshots");
  if (!(inner_dt > 0)) fail("inner_dt must be > 0");
  if (burn_in < 0) fail("burn_in must be >= 0");
  substeps();
}

Index TrajectoryConfig::substeps() const {
  const double ratio = delta / inner_dt;
  const double rounded = std::round(ratio);
  if (rounded < 1 || std::abs(ratio - rounded) > 1e-9 * rounded)
    fail("inner_dt must divide the sample interval exactly");
  return static_cast<Index>(rounded);
}

Vec ode_rhs(const SystemSpec& spec, const Vec& s) {
  if (!spec.is_ode()) fail("ode_rhs: not an ODE kind");
  Vec d(spec.dim());
  ode_rhs_into(spec, s.data(), d.data());
  return d;
}

Vec step_rk4(const SystemSpec& spec, const Vec& s, double dt) {
  if (!(dt > 0)) fail("dt must be > 0");
  if (!spec.is_ode()) fail("step_rk4: not an ODE kind");
  if (s.size() != spec.dim()) fail("state dimension mismatch");
  double buf[kMaxOdeDim] = {};
  for (Index i = 0; i < s.size(); ++i) buf[i] = s[i];
  rk4_inplace(spec, buf, int(s.size()), dt);
  Vec out(s.size());
  for (Index i = 0; i < s.size(); ++i) out[i] = buf[i];
  return out;
}

EtdrkCoefficients ks_precompute(double L, Index n_grid, double dt,
                                int contour_points, double contour_radius) {
  if (n_grid < 16 || n_grid % 2 != 0) fail("KS n_grid must be even and >= 16");
  if (!(dt > 0)) fail("dt must be > 0");
  if (contour_points < 1 || !(contour_radius > 0))
    fail("invalid contour parameters");

  EtdrkCoefficients c;
  c.L = L;
  c.n_grid = n_grid;
  c.dt = dt;
  c.contour_points = contour_points;
  c.contour_radius = contour_radius;

  const Index nh = n_grid / 2 + 1;
  c.k.resize(nh);
  for (Index j = 0; j < nh; ++j) c.k[j] = 2.0 * kPi * double(j) / L;
  c.lin = c.k.square() - c.k.square().square();
  c.E = (dt * c.lin).exp();
  c.E2 = (0.5 * dt * c.lin).exp();

  c.Q = Eigen::ArrayXd::Zero(nh);
  c.f1 = Eigen::ArrayXd::Zero(nh);
  c.f2 = Eigen::ArrayXd::Zero(nh);
  c.f3 = Eigen::ArrayXd::Zero(nh);
  using Cx = std::complex<double>;
  for (int m = 1; m <= contour_points; ++m) {
    const Cx r = contour_radius *
                 std::exp(Cx(0.0, 2.0 * kPi * (m - 0.5) / contour_points));
    for (Index j = 0; j < nh; ++j) {
      const Cx LR = dt * c.lin[j] + r;
      const Cx LR3 = LR * LR * LR;
      const Cx eLR = std::exp(LR);
      c.Q[j] += ((std::exp(0.5 * LR) - 1.0) / LR).real();
      c.f1[j] += ((-4.0 - LR + eLR * (4.0 - 3.0 * LR + LR * LR)) / LR3).real();
      c.f2[j] += ((2.0 + LR + eLR * (-2.0 + LR)) / LR3).real();
      c.f3[j] += ((-4.0 - 3.0 * LR - LR * LR + eLR * (4.0 - LR)) / LR3).real();
    }
  }
  const double scale = dt / contour_points;
  c.Q *= scale;
  c.f1 *= scale;
  c.f2 *= scale;
  c.f3 *= scale;

  c.mask = Eigen::ArrayXd::Zero(nh);
  for (Index j = 0; j < nh; ++j)
    if (j <= n_grid / 3) c.mask[j] = 1.0;

  if (!c.E.allFinite() || !c.Q.allFinite() || !c.f1.allFinite() ||
      !c.f2.allFinite() || !c.f3.allFinite())
    fail("non-finite exponential-integrator coefficients");
  return c;
}

KsSolver::KsSolver(EtdrkCoefficients coeffs) : c_(std::move(coeffs)) {
  fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  u_.resize(c_.n_grid);
  u2_.resize(c_.n_grid);
  w_.resize(c_.n_grid / 2 + 1);
}

KsSolver::KsSolver(double L, Index n_grid, double dt, int contour_points,
                   double contour_radius)
    : KsSolver(ks_precompute(L, n_grid, dt, contour_points, contour_radius)) {}

SpecVec KsSolver::to_spectral(const Vec& u) {
  if (u.size() != c_.n_grid) fail("KS field size mismatch");
  SpecVec v;
  fft_.fwd(v, u);
  return v;
}

Vec KsSolver::to_physical(const SpecVec& v) {
  if (v.size() != c_.n_grid / 2 + 1) fail("KS spectrum size mismatch");
  Vec u;
  fft_.inv(u, v, c_.n_grid);
  return u;
}

SpecVec KsSolver::dealias(SpecVec v) const {
  v.array() *= c_.mask;
  return v;
}

SpecVec KsSolver::nonlinear(const SpecVec& v) {
  fft_.inv(u_, v, c_.n_grid);
  u2_ = u_.array().square();
  fft_.fwd(w_, u2_);
  SpecVec out(w_.size());
  for (Index j = 0; j < w_.size(); ++j)
    out[j] = std::complex<double>(0.0, -0.5 * c_.k[j] * c_.mask[j]) * w_[j];
  return out;
}

SpecVec KsSolver::step(const SpecVec& v) {
  if (!v.allFinite()) fail("numerical blow-up");
  const SpecVec Nv = nonlinear(v);
  SpecVec a = (c_.E2 * v.array() + c_.Q * Nv.array()).matrix();
  const SpecVec Na = nonlinear(a);
  const SpecVec b = (c_.E2 * v.array() + c_.Q * Na.array()).matrix();
  const SpecVec Nb = nonlinear(b);
  const SpecVec cc =
      (c_.E2 * a.array() + c_.Q * (2.0 * Nb.array() - Nv.array())).matrix();
  const SpecVec Nc = nonlinear(cc);
  SpecVec out = (c_.E * v.array() + c_.f1 * Nv.array() +
                 2.0 * c_.f2 * (Na.array() + Nb.array()) + c_.f3 * Nc.array())
                    .matrix();
  if (!out.allFinite() || out.cwiseAbs().maxCoeff() >
                              kBlowUpThreshold * double(c_.n_grid))
    fail("numerical blow-up");
  return out;
}

SpecVec KsSolver::step_linear_only(const SpecVec& v) const {
  return (c_.E * v.array()).matrix();
}

SpecVec ks_step(const EtdrkCoefficients& coeffs, const SpecVec& u_hat) {
  KsSolver solver(coeffs);
  return solver.step(u_hat);
}

namespace {

std::vector<Vec> simulate_ode(const SystemSpec& spec,
                              const TrajectoryConfig& cfg, const Vec& x0) {
  const Index sub = cfg.substeps();
  const Index n_burn =
      static_cast<Index>(std::round(cfg.burn_in / cfg.inner_dt));
  const int d = int(spec.dim());
  double s[kMaxOdeDim] = {};
  for (int i = 0; i < d; ++i) s[i] = x0[i];
  double t = 0.0;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(cfg.n_snapshots));
  auto snapshot = [&] {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = s[i];
    out.push_back(std::move(v));
  };
  try {
    for (Index i = 0; i < n_burn; ++i) {
      rk4_inplace(spec, s, d, cfg.inner_dt);
      t += cfg.inner_dt;
    }
    snapshot();
    for (Index k = 1; k < cfg.n_snapshots; ++k) {
      for (Index i = 0; i < sub; ++i) {
        rk4_inplace(spec, s, d, cfg.inner_dt);
        t += cfg.inner_dt;
      }
      snapshot();
    }
  } catch (const std::runtime_error&) {
    fail("numerical blow-up at t=" + std::to_string(t + cfg.inner_dt));
  }
  return out;
}

std::vector<Vec> simulate_ks(const SystemSpec& spec,
                             const TrajectoryConfig& cfg, const Vec& x0) {
  const Index sub = cfg.substeps();
  const Index n_burn =
      static_cast<Index>(std::round(cfg.burn_in / cfg.inner_dt));
  KsSolver solver(spec.L, spec.n_grid, cfg.inner_dt);
  SpecVec v = solver.dealias(solver.to_spectral(x0));
  double t = 0.0;
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(cfg.n_snapshots));
  try {
    for (Index i = 0; i < n_burn; ++i) {
      v = solver.step(v);
      t += cfg.inner_dt;
    }
    out.push_back(solver.to_physical(v));
    for (Index k = 1; k < cfg.n_snapshots; ++k) {
      for (Index i = 0; i < sub; ++i) {
        v = solver.step(v);
        t += cfg.inner_dt;
      }
      out.push_back(solver.to_physical(v));
    }
  } catch (const std::runtime_error&) {
    fail("numerical blow-up at t=" + std::to_string(t + cfg.inner_dt));
  }
  return out;
}

}  // namespace

std::vector<Vec> simulate(const SystemSpec& spec, const TrajectoryConfig& cfg,
                          const Vec& x0) {
  spec.validate();
  cfg.validate();
  if (x0.size() != spec.dim()) fail("initial state dimension mismatch");
  if (!x0.allFinite()) fail("initial state not finite");
  return spec.is_ode() ? simulate_ode(spec, cfg, x0)
                       : simulate_ks(spec, cfg, x0);
}

LimitCycle compute_limit_cycle(const SystemSpec& spec, const Vec& x0,
                               double warm_time, double dt,
                               double max_period) {
  if (!spec.is_ode()) fail("limit cycle supported for ODE kinds only");
  if (!(dt > 0)) fail("dt must be > 0");
  Vec s = x0;
  const Index n_warm = static_cast<Index>(std::round(warm_time / dt));
  for (Index i = 0; i < n_warm; ++i) s = step_rk4(spec, s, dt);

  // Locate an upward zero crossing of component 0, refine by linear
  // interpolation, and restart from the interpolated crossing state so the
  // stored samples sit at exact multiples of dt past phase zero. Detection
  // arms only after a genuine negative excursion, so a start state sitting
  // at the crossing cannot re-trigger immediately.
  const Index max_steps = 3 * static_cast<Index>(std::round(max_period / dt));
  auto find_crossing = [&](Vec& state, std::vector<Vec>* record) -> double {
    Vec prev = state;
    bool armed = prev[0] < -1e-3;
    for (Index i = 0; i < max_steps; ++i) {
      Vec next = step_rk4(spec, prev, dt);
      if (armed && prev[0] < 0.0 && next[0] >= 0.0) {
        const double frac = -prev[0] / (next[0] - prev[0]);
        state = prev + frac * (next - prev);
        return (double(i) + frac) * dt;
      }
      if (next[0] < -1e-3) armed = true;
      if (record) record->push_back(next);
      prev = next;
    }
    fail("no zero crossing found; not a limit cycle?");
  };

  find_crossing(s, nullptr);
  LimitCycle cycle;
  cycle.dt = dt;
  cycle.states.push_back(s);
  Vec end = s;
  // The recorder stops before the post-crossing state, so samples sit at
  // t = 0, dt, ..., floor(period/dt)*dt, all within [0, period].
  cycle.period = find_crossing(end, &cycle.states);
  return cycle;
}

Vec cycle_at_phase(const LimitCycle& cycle, double phase) {
  if (cycle.states.empty()) fail("empty limit cycle");
  phase -= std::floor(phase);
  const double t = phase * cycle.period;
  const std::size_t n = cycle.states.size();
  std::size_t i0 = static_cast<std::size_t>(t / cycle.dt);
  if (i0 >= n) i0 = n - 1;
  const double t0 = double(i0) * cycle.dt;
  if (i0 + 1 < n) {
    const double f = (t - t0) / cycle.dt;
    return cycle.states[i0] + f * (cycle.states[i0 + 1] - cycle.states[i0]);
  }
  const double tail = cycle.period - t0;
  const double f = tail > 1e-300 ? (t - t0) / tail : 0.0;
  return cycle.states[i0] + f * (cycle.states[0] - cycle.states[i0]);
}

InitialDistribution InitialDistribution::shifted_beta(double shift) {
  InitialDistribution d;
  d.kind = Kind::ShiftedBeta;
  d.shift = shift;
  return d;
}

InitialDistribution InitialDistribution::limit_cycle(
    std::shared_ptr<const LimitCycle> c) {
  InitialDistribution d;
  d.kind = Kind::LimitCycle;
  d.cycle = std::move(c);
  return d;
}

InitialDistribution InitialDistribution::fixed_state(Vec x) {
  InitialDistribution d;
  d.kind = Kind::Fixed;
  d.fixed = std::move(x);
  return d;
}

std::vector<Vec> sample_initial(const InitialDistribution& dist, Index n,
                                std::uint64_t seed) {
  if (n < 1) fail("need n >= 1 initial states");
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n));
  switch (dist.kind) {
    case InitialDistribution::Kind::ShiftedBeta: {
      Rng rng(seed);
      for (Index i = 0; i < n; ++i) {
        Vec s(1);
        s[0] = dist.shift + rng.beta22();
        out.push_back(s);
      }
      break;
    }
    case InitialDistribution::Kind::LimitCycle: {
      if (!dist.cycle) fail("limit-cycle distribution without a cycle");
      for (Index i = 0; i < n; ++i)
        out.push_back(cycle_at_phase(*dist.cycle, double(i) / double(n)));
      break;
    }
    case InitialDistribution::Kind::Fixed: {
      if (dist.fixed.size() == 0) fail("fixed distribution without a state");
      for (Index i = 0; i < n; ++i) out.push_back(dist.fixed);
      break;
    }
  }
  return out;
}

}  // namespace mz

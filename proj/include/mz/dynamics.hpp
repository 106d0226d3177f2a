#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mz/types.hpp"

namespace mz {

enum class SystemKind { ToyLogistic, VanDerPol, Lorenz63, KuramotoSivashinsky };

// Definition of one dynamical system. ODE kinds carry their parameters; the
// spectral PDE kind carries domain length and grid size.
struct SystemSpec {
  SystemKind kind = SystemKind::ToyLogistic;
  double mu = 1.0;                          // VanDerPol
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;  // Lorenz63
  double L = 1.0;                           // KuramotoSivashinsky
  Index n_grid = 0;                         // KuramotoSivashinsky (even, >= 16)

  static SystemSpec toy_logistic();
  static SystemSpec van_der_pol(double mu);
  static SystemSpec lorenz63(double sigma = 10.0, double rho = 28.0,
                             double beta = 8.0 / 3.0);
  static SystemSpec kuramoto_sivashinsky(double L, Index n_grid);

  Index dim() const;
  bool is_ode() const { return kind != SystemKind::KuramotoSivashinsky; }
  void validate() const;  // throws on parameter-range violations
};

// Sampling parameters for one trajectory: snapshots every `delta` after a
// `burn_in` transient, integrated with fixed substeps of `inner_dt`.
struct TrajectoryConfig {
  double delta = 0.0;      // sample interval
  Index n_snapshots = 0;   // K >= 2
  double burn_in = 0.0;
  double inner_dt = 0.0;   // must divide delta into an integer substep count
  std::uint64_t seed = 0;

  void validate() const;
  Index substeps() const;  // delta / inner_dt, validated integral
};

// Time derivative of the ODE kinds.
Vec ode_rhs(const SystemSpec& spec, const Vec& s);

// One classical RK4 update. Throws "numerical blow-up" when the result is
// non-finite or exceeds the blow-up threshold 1e8.
Vec step_rk4(const SystemSpec& spec, const Vec& s, double dt);

inline constexpr double kBlowUpThreshold = 1e8;

// Precomputed exponential-integrator weights for the spectral PDE, one entry
// per nonnegative wavenumber (half spectrum, n_grid/2 + 1 modes). The phi
// function weights are evaluated by averaging over a complex contour around
// each linear eigenvalue, which is stable through the removable singularity
// at zero.
struct EtdrkCoefficients {
  double L = 0.0;
  Index n_grid = 0;
  double dt = 0.0;
  int contour_points = 32;
  double contour_radius = 1.0;
  Eigen::ArrayXd k;       // wavenumbers 2*pi*j/L, j = 0..n_grid/2
  Eigen::ArrayXd lin;     // linear symbol k^2 - k^4
  Eigen::ArrayXd E, E2;   // exp(dt*lin), exp(dt*lin/2)
  Eigen::ArrayXd Q, f1, f2, f3;
  Eigen::ArrayXd mask;    // 1 for kept modes (index <= n_grid/3), else 0
};

EtdrkCoefficients ks_precompute(double L, Index n_grid, double dt,
                                int contour_points = 32,
                                double contour_radius = 1.0);

using SpecVec = Eigen::VectorXcd;

// Pseudo-spectral stepper on the half spectrum. Real-valuedness of the
// physical field is structural (conjugate symmetry never has to be enforced).
class KsSolver {
 public:
  explicit KsSolver(EtdrkCoefficients coeffs);
  KsSolver(double L, Index n_grid, double dt, int contour_points = 32,
           double contour_radius = 1.0);

  const EtdrkCoefficients& coeffs() const { return c_; }

  SpecVec to_spectral(const Vec& u);   // forward real transform, unscaled
  Vec to_physical(const SpecVec& v);   // inverse transform with 1/n scaling
  SpecVec dealias(SpecVec v) const;

  // Nonlinear term -0.5*i*k*F[(F^-1 v)^2], dealiased.
  SpecVec nonlinear(const SpecVec& v);

  // One full step. Throws "numerical blow-up" on non-finite spectrum.
  SpecVec step(const SpecVec& v);

  // Linear part only: exp(dt*lin) * v. Exact for the linear subproblem.
  SpecVec step_linear_only(const SpecVec& v) const;

 private:
  EtdrkCoefficients c_;
  Eigen::FFT<double> fft_;
  Vec u_, u2_;       // physical scratch
  SpecVec w_;        // spectral scratch
};

// One stepper call without managing a solver; convenience for tests.
SpecVec ks_step(const EtdrkCoefficients& coeffs, const SpecVec& u_hat);

// K snapshots every delta after burn-in, deterministic in all inputs.
// Throws "numerical blow-up at t=..." when integration diverges.
std::vector<Vec> simulate(const SystemSpec& spec, const TrajectoryConfig& cfg,
                          const Vec& x0);

// A closed orbit sampled at uniform fine spacing dt, phase 0 at an upward
// zero crossing of component 0.
struct LimitCycle {
  std::vector<Vec> states;
  double period = 0.0;
  double dt = 0.0;
};

LimitCycle compute_limit_cycle(const SystemSpec& spec, const Vec& x0,
                               double warm_time, double dt,
                               double max_period = 100.0);

// State on the cycle at fractional phase in [0, 1), linear interpolation
// between fine samples.
Vec cycle_at_phase(const LimitCycle& cycle, double phase);

// How initial conditions are drawn for an ensemble of trajectories.
struct InitialDistribution {
  enum class Kind { ShiftedBeta, LimitCycle, Fixed } kind = Kind::Fixed;
  double shift = 0.5;            // ShiftedBeta: shift + Beta(2,2), dim 1
  std::shared_ptr<const LimitCycle> cycle;  // LimitCycle: even phases
  Vec fixed;                     // Fixed: n copies

  static InitialDistribution shifted_beta(double shift);
  static InitialDistribution limit_cycle(std::shared_ptr<const LimitCycle> c);
  static InitialDistribution fixed_state(Vec x);
};

std::vector<Vec> sample_initial(const InitialDistribution& dist, Index n,
                                std::uint64_t seed);

}  // namespace mz

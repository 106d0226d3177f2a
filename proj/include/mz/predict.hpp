#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mz/mzlearn.hpp"
#include "mz/types.hpp"

namespace mz {

// Time-ordered snapshot rows, newest last.
using History = Mat;

// Fitted orthogonal-dynamics noise: empirical mean and population
// covariance of residual samples.
struct GaussianNoise {
  Vec mean;
  Mat cov;
};

// Truncated-memory rollout settings. history_length is how many lags the sum
// uses (capped by the operators available); MarkovOnly ignores all but lag 0.
struct PredictionConfig {
  enum class Mode { LinearWithMemory, NonlinearWithMemory, MarkovOnly };
  enum class Noise { Zero, GaussianIID };

  Mode mode = Mode::NonlinearWithMemory;
  Index horizon = 1;
  Index history_length = 1;
  Noise noise = Noise::Zero;
  GaussianNoise gaussian;
  std::uint64_t seed = 0;

  void validate() const;
};

// One rollout: row s holds the imputed state for step s+1. A tripped blow-up
// guard (any |value| above the dynamics threshold) stops the rollout at
// diverged_at with later rows left zero.
struct PredictionResult {
  Mat values;
  Index diverged_at = -1;

  bool diverged() const { return diverged_at >= 0; }
};

// Memory rollout with square per-lag matrices: each step sums kappa_l times
// the state l lags back, feeding predictions back as imputed history. Affine
// in the history under zero noise.
PredictionResult rollout_linear(const std::vector<Mat>& kappas,
                                const History& history,
                                const PredictionConfig& cfg);

// Same recursion through a fitted model's per-lag operators. A model whose
// output is narrower than its input is treated as delay-embedded: the
// prediction forms the newest block and the remaining blocks shift down.
PredictionResult rollout_model(const MZModel& model, const History& history,
                               const PredictionConfig& cfg);

// Throwing wrappers: "prediction diverged" when the guard trips.
Mat predict_linear_memory(const std::vector<Mat>& kappas,
                          const History& history,
                          const PredictionConfig& cfg);
Mat predict_nonlinear_memory(const MZModel& model, const History& history,
                             const PredictionConfig& cfg);

// Empirical mean and population covariance pooled over the given residual
// arrays (at least two rows in total).
GaussianNoise fit_gaussian_noise(const std::vector<Mat>& residual_samples);

// One prediction file: header "time,<names...>", one row per step starting
// at t_last + delta.
void write_prediction_csv(const std::string& path, const Mat& values,
                          const std::vector<std::string>& names, double delta,
                          double t_last);

}  // namespace mz

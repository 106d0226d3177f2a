#pragma once

#include "mz/types.hpp"

#include <limits>
#include <string>
#include <vector>

namespace mz {

// Binned distribution estimate. mass sums to 1, density integrates to 1
// (density[i] = mass[i] / bin width). A degenerate sample range is widened
// to unit width so a constant input occupies exactly one bin.
struct Histogram {
  Vec edges;    // n_bins + 1 ascending edges
  Vec mass;     // per-bin probability mass
  Vec density;  // per-bin probability density

  Index bins() const { return mass.size(); }
};

// Mean squared prediction error per horizon step, averaged over rollouts
// and observables. Each batch entry is one rollout, horizon steps by rows.
Vec mse_vs_horizon(const std::vector<Mat>& pred_batches,
                   const std::vector<Mat>& truth_batches);

// Per-rollout squared error (mean over observables only), rollouts by rows
// and horizon steps by columns, so any aggregation can be applied later.
// mse_vs_horizon equals the column mean of this matrix.
Mat per_rollout_mse(const std::vector<Mat>& pred_batches,
                    const std::vector<Mat>& truth_batches);

// Histogram-based Kullback-Leibler divergence from the model samples to the
// true samples. Both sets are binned on their union range, `smoothing` is
// added to every bin mass, masses are renormalized, and the result is
// sum p_true log(p_true / p_model). Nonnegative for any smoothed input.
double kl_divergence(const Vec& samples_true, const Vec& samples_model,
                     Index n_bins = 100, double smoothing = 1e-9);

// kl_divergence applied per horizon step, pooling rollouts and observables
// at that step into the two sample sets.
Vec kl_vs_horizon(const std::vector<Mat>& pred_batches,
                  const std::vector<Mat>& truth_batches, Index n_bins = 100,
                  double smoothing = 1e-9);

// Mean one-sided power spectrum of spatial fields on a uniform periodic
// grid (one field per row). The transform is unnormalized, and interior
// bins carry the conjugate pair's power, so sum(power) / n equals the mean
// spatial sum of squares (Parseval).
Vec power_spectrum(const Mat& snapshots);

// Normalized histogram of a long rollout, pooling every observable into a
// single sample set. Requires at least n_bins rollout steps.
Histogram long_time_histogram(const Mat& rollout, Index n_bins);

// Bundle of evaluation outputs. Empty fields are skipped by the writer.
struct EvalReport {
  std::string config_echo;
  Vec mse;          // per horizon step
  Vec kl;           // per horizon step
  Mat rollout_mse;  // rollouts x horizon steps
  Vec spectrum;     // per nonnegative wavenumber
  Histogram hist_truth;
  Histogram hist_model;
  // Divergence of a single long rollout's marginal from the data marginal;
  // NaN when no long rollout was evaluated.
  double long_rollout_kl = std::numeric_limits<double>::quiet_NaN();
};

// Writes <tag>_mse.csv, <tag>_kl.csv, <tag>_rollout_mse.csv,
// <tag>_spectrum.csv, <tag>_hist_truth.csv, <tag>_hist_model.csv for the
// populated fields plus <tag>_summary.txt, under dir (created if missing).
void write_eval_report(const std::string& dir, const std::string& tag,
                       const EvalReport& report);

}  // namespace mz

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mz/datamat.hpp"
#include "mz/regress.hpp"
#include "mz/types.hpp"

namespace mz {

// How snapshot pairs enter the per-order regressions. InitialTime pairs each
// trajectory's first snapshot with its shifted targets only; StationaryPooled
// also pools every later time offset the data supports as an independent
// sample. Ensemble matrices default to InitialTime, ergodic ones to
// StationaryPooled.
enum class PairingMode { InitialTime, StationaryPooled };

PairingMode default_pairing(const DataMatrix& d);
std::string pairing_name(PairingMode mode);
PairingMode pairing_from_name(const std::string& name);

// Orders whose residual-sample arrays are kept inside the model; later
// orders stay recomputable from the data and the stored operators.
inline constexpr Index kStoredResidualOrders = 8;

// Discrete memory expansion of one-step evolution: operators[l] maps the
// observable vector at lag l to its contribution to the next snapshot, so
// g_{n+1} = sum_l operators[l](g_{n-l}) + noise. residual_samples[n] holds
// the order-(n+1) regression targets over the fit pairs (the order-n noise
// samples at shifted offsets), capped at kStoredResidualOrders arrays.
struct MZModel {
  RegressionFamily family;
  std::vector<FittedModel> operators;
  std::vector<Mat> residual_samples;
  PairingMode pairing = PairingMode::StationaryPooled;
  std::uint64_t base_seed = 0;
  Index input_dim = 0;
  Index output_dim = 0;
  double delta = 0.0;
  std::vector<std::string> observable_names;

  Index h() const { return Index(operators.size()); }
  std::vector<double> fit_mse() const;
};

// Empirical lag correlations c[k] = mean over pairs of x_{t+k} x_t^T,
// accumulated over exactly the pairs the regressions use.
struct CorrelationSet {
  std::vector<Mat> c;
  Index max_lag() const { return Index(c.size()) - 1; }
};

// Recursive per-order regression: order 0 fits next-snapshot targets, each
// later order fits what every lower order left unexplained on shifted
// snapshots. target_dim restricts targets to the leading block (the newest
// components under delay embedding); 0 keeps the full width.
MZModel extract_operators(const DataMatrix& d, const RegressionFamily& family,
                          Index h, PairingMode pairing, std::uint64_t seed,
                          Index target_dim = 0);
MZModel extract_operators(const DataMatrix& d, const RegressionFamily& family,
                          Index h, std::uint64_t seed);

CorrelationSet compute_correlations(const DataMatrix& d, Index max_lag,
                                    PairingMode pairing);

// Closed-form linear-family operators from lag correlations:
// omega_0 = c[1] c[0]^-1, then each next order subtracts all lower-order
// terms from the next lag before applying c[0]^-1. Equals extract_operators
// with the Linear family on the same data and pairing.
std::vector<Mat> mori_closed_form(const DataMatrix& d, Index h);
std::vector<Mat> mori_closed_form(const DataMatrix& d, Index h,
                                  PairingMode pairing);

// Exact residual targets of one order recomputed from the data and stored
// operators: order n gives the order-(n-1) noise samples at shifted offsets,
// bit-for-bit what extraction regressed at that order. Orders 1..h-1 cover
// the full fit range; order h (the final noise) loses the last offset.
Mat residual_targets(const MZModel& model, const DataMatrix& d, Index order);

// Fluctuation-dissipation diagnostics on the extraction data.
// projection_rms[n]: RMS prediction of the family refit to this order's own
// fit residuals, the operational size of the projected noise.
// replay_rms[n]: RMS deviation between operators[n] and a fresh regression
// of its targets, zero when the model came from this data.
struct GfdReport {
  Vec projection_rms;
  Vec replay_rms;
};

GfdReport gfd_check(const MZModel& model, const DataMatrix& d);

// Mean squared memory contribution per lag l = 1..h-1 over every snapshot in
// the test matrix. component picks one output coordinate, -1 the full
// vector norm.
Vec memory_norm_profile(const MZModel& model, const DataMatrix& d_test,
                        Index component = -1);

// Smallest memory length whose profile tail sits strictly below the
// threshold; profile.size() when the last value never drops below.
Index select_memory_length(const Vec& profile, double threshold = 1e-7);

// Directory layout: one manifest, one model file per order, one binary per
// stored residual array.
void save_mz_model(const MZModel& model, const std::string& dir);
MZModel load_mz_model(const std::string& dir);

}  // namespace mz

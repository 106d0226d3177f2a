#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mz/types.hpp"

namespace mz {

// How a family is optimized. Closed form solves the normal equations;
// gradient families run mini-batch Adam with early stopping on a held-out
// validation split.
struct TrainerConfig {
  enum class Optimizer { ClosedForm, Adam } optimizer = Optimizer::ClosedForm;
  double lr = 1e-3;
  int epochs = 500;
  Index batch_size = 256;
  int patience = 20;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// A parametric function family f(x; theta), the projection operator's
// hypothesis class.
struct RegressionFamily {
  enum class Kind { Linear, Polynomial, SplineRidge, Mlp, Conv1d } kind =
      Kind::Linear;

  int degree = 1;                 // Polynomial: powers 0..degree of a scalar
  int n_knots = 10;               // SplineRidge
  int spline_degree = 3;
  double lambda = 10.0;           // SplineRidge penalty (intercept exempt)
  double knot_range_factor = 1.5;
  std::vector<Index> layer_sizes;  // Mlp: full list, input..output
  int conv_layers = 2;            // Conv1d: stacked conv layers before head
  Index channels = 5;
  Index kernel_size = 11;
  bool circular = true;
  Index in_channels = 1;          // Conv1d: stacked-lag input channels

  static RegressionFamily linear();
  static RegressionFamily polynomial(int degree);
  static RegressionFamily spline_ridge(int n_knots = 10, int degree = 3,
                                       double lambda = 10.0,
                                       double knot_range_factor = 1.5);
  static RegressionFamily mlp(std::vector<Index> layer_sizes);
  static RegressionFamily conv1d(int n_layers = 2, Index channels = 5,
                                 Index kernel_size = 11, bool circular = true,
                                 Index in_channels = 1);

  TrainerConfig trainer;

  bool closed_form() const {
    return kind == Kind::Linear || kind == Kind::Polynomial ||
           kind == Kind::SplineRidge;
  }
  void validate() const;
  std::string kind_name() const;
};

// A trained instance of a family. Closed-form families store the coefficient
// matrix theta (d_out x n_features); gradient families store the flat
// parameter vector.
struct FittedModel {
  RegressionFamily family;
  Index input_dim = 0;
  Index output_dim = 0;
  double fit_mse = 0.0;   // mean over samples of summed squared output error
  double jitter = 0.0;    // ridge jitter applied to a rank-deficient solve
  int epochs_run = 0;     // gradient families
  Mat theta;
  Vec knots;              // SplineRidge interior knot sites
  Vec params;             // gradient families
};

// Minimize mean squared error of family predictions on (X, Y). The seed
// drives initialization and batch shuffling; warm_start (gradient families)
// replaces the random initialization.
FittedModel fit(const RegressionFamily& family, const Mat& X, const Mat& Y,
                std::uint64_t seed, const Vec* warm_start = nullptr);

Vec predict(const FittedModel& m, const Vec& x);
Mat predict_batch(const FittedModel& m, const Mat& X);

// Repeated least squares against one fixed input set. Features, knots, and
// the Gram factorization (with the same rank-deficiency jitter rule as fit)
// are built once; each solve only changes the right-hand side, so a solve
// here equals fit() on the same data.
class ClosedFormSolver {
 public:
  ClosedFormSolver(const RegressionFamily& family, const Mat& x_fit);

  FittedModel solve(const Mat& y) const;
  Mat features_of(const Mat& x) const;
  const Mat& fit_features() const { return phi_; }
  double jitter() const { return jitter_; }

 private:
  RegressionFamily family_;
  Index input_dim_ = 0;
  Vec knots_;
  Mat phi_;
  Eigen::LDLT<Mat> ldlt_;
  double jitter_ = 0.0;
};

// Clamped B-spline basis of the given degree on the knot sites: dimension
// n_knots + degree - 1, partition of unity on [knots.front(), knots.back()],
// constant continuation outside (inputs are clamped). The spline family
// prepends an unpenalized intercept on top of these.
Vec spline_features(double x, const Vec& knots, int degree);

// Max discrepancy between analytic parameter gradients of the MSE cost and
// central finite differences (step 1e-5): relative where the magnitude
// supports it, absolute near zero.
double gradient_check(const RegressionFamily& family, const Vec& params,
                      const Mat& X, const Mat& Y);

// Fan-in scaled random parameters for a gradient family; test utility and
// the initialization used by fit().
Vec random_params(const RegressionFamily& family, Index in_dim, Index out_dim,
                  std::uint64_t seed);

// Refit the family to its own predictions on X and measure the drift:
// coefficient-space max difference for closed-form families, prediction RMS
// for gradient families (warm started).
double idempotence_residual(const FittedModel& m, const Mat& X);

// Structured-text header plus f64 parameter blob, versioned.
void save_model(const FittedModel& m, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace mz

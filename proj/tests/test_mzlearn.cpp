#include "doctest.h"

#include "mz/mzlearn.hpp"
#include "mz/rng.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

using namespace mz;

namespace {

std::vector<std::string> default_names(Index m) {
  std::vector<std::string> names;
  for (Index j = 0; j < m; ++j) names.push_back("g" + std::to_string(j));
  return names;
}

DataMatrix random_ensemble(Index n, Index m, Index k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Mat> slices(std::size_t(k), Mat(n, m));
  for (auto& sl : slices)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) sl(i, j) = rng.normal();
  return DataMatrix::ensemble(std::move(slices), 0.1, default_names(m));
}

// Trajectories of the exact linear map x_{k+1} = A x_k.
DataMatrix linear_map_ensemble(const Mat& a, Index n, Index k,
                               std::uint64_t seed) {
  Rng rng(seed);
  const Index m = a.rows();
  std::vector<Mat> slices(std::size_t(k), Mat(n, m));
  for (Index i = 0; i < n; ++i) {
    Vec x(m);
    for (Index j = 0; j < m; ++j) x[j] = 2.0 * rng.u01() - 1.0;
    for (Index t = 0; t < k; ++t) {
      slices[std::size_t(t)].row(i) = x.transpose();
      x = a * x;
    }
  }
  return DataMatrix::ensemble(std::move(slices), 0.1, default_names(m));
}

Mat contraction3() {
  Mat a(3, 3);
  a << 0.9, 0.05, 0.0, -0.02, 0.8, 0.1, 0.0, 0.03, 0.7;
  return a;
}

// Least squares theta (d_out x d_in) for targets = theta * inputs, solved by
// QR on the raw data matrix: an algebra path independent of the library's
// normal equations.
Mat qr_lstsq(const Mat& x, const Mat& y) {
  return Mat(x.householderQr().solve(y)).transpose();
}

double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

std::string temp_dir(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("pairing defaults and names") {
  DataMatrix ens = random_ensemble(4, 2, 3, 1);
  CHECK(default_pairing(ens) == PairingMode::InitialTime);
  std::vector<Mat> series{Mat::Zero(12, 2)};
  series[0].setRandom();
  DataMatrix erg = DataMatrix::ergodic(std::move(series), 4, 0.1,
                                       default_names(2));
  CHECK(default_pairing(erg) == PairingMode::StationaryPooled);

  CHECK(pairing_name(PairingMode::InitialTime) == "initial_time");
  CHECK(pairing_name(PairingMode::StationaryPooled) == "stationary_pooled");
  CHECK(pairing_from_name("initial_time") == PairingMode::InitialTime);
  CHECK(pairing_from_name("stationary_pooled") ==
        PairingMode::StationaryPooled);
  CHECK_THROWS_AS(pairing_from_name("sideways"), std::invalid_argument);
}

TEST_CASE("fully resolved linear map has zero memory") {
  const Mat a = contraction3();
  DataMatrix d = linear_map_ensemble(a, 40, 8, 11);
  for (PairingMode mode :
       {PairingMode::InitialTime, PairingMode::StationaryPooled}) {
    MZModel model =
        extract_operators(d, RegressionFamily::linear(), 3, mode, 7);
    REQUIRE(model.h() == 3);
    CHECK(max_abs_diff(model.operators[0].theta, a) <= 1e-10);
    CHECK(model.operators[1].theta.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(model.operators[2].theta.cwiseAbs().maxCoeff() <= 1e-10);
    REQUIRE(model.residual_samples.size() == 2);
    for (const auto& w : model.residual_samples)
      CHECK(w.cwiseAbs().maxCoeff() <= 1e-11);
    for (double mse : model.fit_mse()) CHECK(mse <= 1e-22);

    GfdReport rep = gfd_check(model, d);
    for (Index n = 0; n < 3; ++n) {
      CHECK(rep.projection_rms[n] <= 1e-11);
      CHECK(rep.replay_rms[n] <= 1e-11);
    }

    Vec profile = memory_norm_profile(model, d);
    REQUIRE(profile.size() == 2);
    CHECK(profile.maxCoeff() <= 1e-20);
    CHECK(select_memory_length(profile) == 0);
  }
}

TEST_CASE("order-0 operator matches an independent QR least squares") {
  DataMatrix d = random_ensemble(60, 3, 5, 21);

  SUBCASE("initial-time pairing uses the first-snapshot pairs") {
    MZModel model = extract_operators(d, RegressionFamily::linear(), 2,
                                      PairingMode::InitialTime, 3);
    const Mat oracle = qr_lstsq(d.slice(0), d.slice(1));
    CHECK(max_abs_diff(model.operators[0].theta, oracle) <= 1e-9);
  }

  SUBCASE("pooled pairing stacks every offset the order range allows") {
    const Index h = 2, k = d.k(), n = d.n();
    MZModel model = extract_operators(d, RegressionFamily::linear(), h,
                                      PairingMode::StationaryPooled, 3);
    Mat x((k - h) * n, 3), y((k - h) * n, 3);
    for (Index t = 0; t < k - h; ++t) {
      x.middleRows(t * n, n) = d.slice(t);
      y.middleRows(t * n, n) = d.slice(t + 1);
    }
    CHECK(max_abs_diff(model.operators[0].theta, qr_lstsq(x, y)) <= 1e-9);
  }
}

TEST_CASE("linear extraction equals the correlation closed form") {
  SUBCASE("ensemble, both pairings") {
    DataMatrix d = random_ensemble(50, 3, 12, 31);
    for (PairingMode mode :
         {PairingMode::InitialTime, PairingMode::StationaryPooled}) {
      MZModel model =
          extract_operators(d, RegressionFamily::linear(), 6, mode, 5);
      std::vector<Mat> mori = mori_closed_form(d, 6, mode);
      REQUIRE(mori.size() == 6);
      for (Index n = 0; n < 6; ++n) {
        const double scale =
            std::max(1.0, mori[std::size_t(n)].cwiseAbs().maxCoeff());
        CHECK(max_abs_diff(model.operators[std::size_t(n)].theta,
                           mori[std::size_t(n)]) <= 1e-10 * scale);
      }
    }
  }

  SUBCASE("ergodic series, pooled default") {
    Rng rng(41);
    std::vector<Mat> series{Mat(80, 2)};
    for (Index t = 0; t < 80; ++t)
      for (Index j = 0; j < 2; ++j) series[0](t, j) = rng.normal();
    DataMatrix d =
        DataMatrix::ergodic(std::move(series), 8, 0.1, default_names(2));
    MZModel model = extract_operators(d, RegressionFamily::linear(), 5, 9);
    CHECK(model.pairing == PairingMode::StationaryPooled);
    std::vector<Mat> mori = mori_closed_form(d, 5);
    for (Index n = 0; n < 5; ++n)
      CHECK(max_abs_diff(model.operators[std::size_t(n)].theta,
                         mori[std::size_t(n)]) <= 1e-9);
  }
}

TEST_CASE("constant observable gives the identity Markov operator") {
  std::vector<Mat> slices(4, Mat::Ones(5, 1));
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.1, {"one"});

  std::vector<Mat> mori = mori_closed_form(d, 2);
  CHECK(std::abs(mori[0](0, 0) - 1.0) <= 1e-14);
  CHECK(std::abs(mori[1](0, 0)) <= 1e-14);

  MZModel model = extract_operators(d, RegressionFamily::linear(), 2, 1);
  CHECK(std::abs(model.operators[0].theta(0, 0) - 1.0) <= 1e-14);
  CHECK(std::abs(model.operators[1].theta(0, 0)) <= 1e-14);
  CHECK(model.operators[0].jitter == 0.0);
  CHECK(select_memory_length(memory_norm_profile(model, d)) == 0);
}

TEST_CASE("correlations match hand-accumulated outer products") {
  DataMatrix d = random_ensemble(7, 2, 4, 51);
  const Index n = d.n();

  SUBCASE("initial-time") {
    CorrelationSet cs = compute_correlations(d, 2, PairingMode::InitialTime);
    REQUIRE(cs.max_lag() == 2);
    for (Index k = 0; k <= 2; ++k) {
      Mat manual = Mat::Zero(2, 2);
      for (Index i = 0; i < n; ++i)
        manual += d.slice(k).row(i).transpose() * d.slice(0).row(i);
      manual /= double(n);
      CHECK(max_abs_diff(cs.c[std::size_t(k)], manual) <= 1e-14);
    }
  }

  SUBCASE("pooled shares one offset range across lags") {
    CorrelationSet cs =
        compute_correlations(d, 2, PairingMode::StationaryPooled);
    const Index t_max = d.k() - 1 - 2;
    for (Index k = 0; k <= 2; ++k) {
      Mat manual = Mat::Zero(2, 2);
      for (Index t = 0; t <= t_max; ++t)
        for (Index i = 0; i < n; ++i)
          manual += d.slice(t + k).row(i).transpose() * d.slice(t).row(i);
      manual /= double((t_max + 1) * n);
      CHECK(max_abs_diff(cs.c[std::size_t(k)], manual) <= 1e-14);
    }
  }

  SUBCASE("zero-lag correlation is symmetric positive semidefinite") {
    CorrelationSet cs =
        compute_correlations(d, 3, PairingMode::StationaryPooled);
    const Mat& c0 = cs.c[0];
    CHECK(max_abs_diff(c0, c0.transpose()) <= 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(c0);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("reconstruction identity holds at machine precision") {
  DataMatrix d = random_ensemble(12, 2, 9, 61);
  const Index h = 4, n_rows = d.n();
  MZModel model = extract_operators(d, RegressionFamily::linear(), h,
                                    PairingMode::StationaryPooled, 13);
  REQUIRE(model.residual_samples.size() == std::size_t(h - 1));

  // residual_samples[n] row t*N + i must equal the time-(t+n+2) snapshot of
  // trajectory i minus all lower-order reconstructions, by direct matvec.
  const Index t_max = d.k() - 1 - h;
  for (std::size_t n = 0; n < model.residual_samples.size(); ++n) {
    const Mat& w = model.residual_samples[n];
    REQUIRE(w.rows() == (t_max + 1) * n_rows);
    for (Index t = 0; t <= t_max; ++t)
      for (Index i = 0; i < n_rows; ++i) {
        Vec recon = Vec::Zero(2);
        for (std::size_t l = 0; l <= n; ++l) {
          Vec g(2);
          for (Index j = 0; j < 2; ++j)
            g[j] = d.value(i, j, t + Index(n) + 1 - Index(l));
          recon += model.operators[l].theta * g;
        }
        for (Index j = 0; j < 2; ++j) {
          const double target = d.value(i, j, t + Index(n) + 2);
          CHECK(std::abs(target - recon[j] - w(t * n_rows + i, j)) <= 1e-12);
        }
      }
  }

  for (std::size_t n = 0; n < model.residual_samples.size(); ++n) {
    const Mat replay = residual_targets(model, d, Index(n) + 1);
    CHECK(max_abs_diff(replay, model.residual_samples[n]) <= 1e-13);
  }
}

TEST_CASE("per-order fit MSE never exceeds its own target variance") {
  // A two-lag autoregression observed through the state alone carries real
  // memory, so successive targets shrink but stay nonzero.
  Rng rng(71);
  Mat series(400, 2);
  Vec x = Vec::Zero(2), xp = Vec::Zero(2);
  Mat a(2, 2), b(2, 2);
  a << 0.6, 0.2, -0.1, 0.5, b << 0.2, 0.0, 0.05, 0.15;
  for (Index t = 0; t < 400; ++t) {
    Vec nx = a * x + b * xp;
    for (Index j = 0; j < 2; ++j) nx[j] += 0.05 * rng.normal();
    xp = x;
    x = nx;
    series.row(t) = x.transpose();
  }
  std::vector<Mat> list{series};
  DataMatrix d = DataMatrix::ergodic(std::move(list), 7, 0.1,
                                     default_names(2));
  MZModel model = extract_operators(d, RegressionFamily::linear(), 6, 17);

  const auto mse = model.fit_mse();
  for (Index n = 1; n < 6; ++n) {
    const Mat y = residual_targets(model, d, n);
    const double target_var = y.squaredNorm() / double(y.rows());
    CHECK(mse[std::size_t(n)] <= target_var * (1.0 + 1e-12));
  }
  for (Index n = 1; n < 6; ++n)
    CHECK(mse[std::size_t(n)] <= mse[std::size_t(n) - 1] * (1.0 + 1e-12));
}

TEST_CASE("memory stays small when the Markov term is complete") {
  // An order-1 autoregression needs no memory: every higher operator is
  // sampling noise, far below the Markov operator.
  Rng rng(81);
  Mat series(2000, 1);
  double x = 0.0;
  for (Index t = 0; t < 2000; ++t) {
    x = 0.9 * x + 0.1 * rng.normal();
    series(t, 0) = x;
  }
  std::vector<Mat> list{series};
  DataMatrix d =
      DataMatrix::ergodic(std::move(list), 4, 0.1, {"x"});
  std::vector<Mat> mori = mori_closed_form(d, 3);
  const double markov = mori[0].cwiseAbs().maxCoeff();
  CHECK(markov >= 0.8);
  CHECK(mori[1].cwiseAbs().maxCoeff() <= 0.15 * markov);
  CHECK(mori[2].cwiseAbs().maxCoeff() <= 0.15 * markov);

  // Destroying the time order kills the Markov operator as well.
  Rng shuffler(82);
  Mat shuffled = series;
  const auto perm = shuffler.permutation(2000);
  for (Index t = 0; t < 2000; ++t)
    shuffled(t, 0) = series(Index(perm[std::size_t(t)]), 0);
  std::vector<Mat> slist{shuffled};
  DataMatrix ds =
      DataMatrix::ergodic(std::move(slist), 4, 0.1, {"x"});
  std::vector<Mat> mori_s = mori_closed_form(ds, 3);
  CHECK(mori_s[0].cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("dictionary Markov operator equals direct EDMD") {
  // Scalar quadratic map observed through the monomial dictionary
  // [1, x, x^2], with the dictionary matrices built by independent loops.
  Rng rng(91);
  const Index n = 30;
  Mat psi_x(n, 3), psi_y(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double x0 = rng.u01();
    const double x1 = 0.8 * x0 + 0.1 * x0 * x0;
    psi_x.row(i) << 1.0, x0, x0 * x0;
    psi_y.row(i) << 1.0, x1, x1 * x1;
  }
  std::vector<Mat> slices{psi_x, psi_y};
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.1,
                                      {"one", "x", "x^2"});
  MZModel model = extract_operators(d, RegressionFamily::linear(), 1,
                                    PairingMode::InitialTime, 23);
  const Mat koopman = qr_lstsq(psi_x, psi_y);
  CHECK(max_abs_diff(model.operators[0].theta, koopman) <= 1e-9);
}

TEST_CASE("profile selection thresholds strictly below") {
  Vec profile(4);
  profile << 1e-3, 1e-5, 1e-8, 1e-9;
  CHECK(select_memory_length(profile) == 2);
  CHECK(select_memory_length(Vec::Zero(5)) == 0);
  Vec never(3);
  never << 1e-3, 1e-4, 1e-5;
  CHECK(select_memory_length(never) == 3);
  Vec boundary(2);
  boundary << 1e-3, 1e-7;
  CHECK(select_memory_length(boundary) == 2);
  Vec below(2);
  below << 1e-3, 0.99e-7;
  CHECK(select_memory_length(below) == 1);
  CHECK_THROWS_AS(select_memory_length(Vec()), std::invalid_argument);
}

TEST_CASE("memory norm profile averages squared contributions") {
  DataMatrix d = random_ensemble(25, 2, 6, 101);
  MZModel model = extract_operators(d, RegressionFamily::linear(), 3,
                                    PairingMode::StationaryPooled, 3);

  // Manual average over every snapshot in the matrix, full norm and single
  // component.
  Mat all(d.n() * d.k(), 2);
  for (Index t = 0; t < d.k(); ++t)
    all.middleRows(t * d.n(), d.n()) = d.slice(t);
  Vec profile = memory_norm_profile(model, d);
  Vec phi_only = memory_norm_profile(model, d, 1);
  REQUIRE(profile.size() == 2);
  for (Index l = 1; l < 3; ++l) {
    const Mat p = (all * model.operators[std::size_t(l)].theta.transpose());
    CHECK(std::abs(profile[l - 1] -
                   p.rowwise().squaredNorm().mean()) <= 1e-14);
    CHECK(std::abs(phi_only[l - 1] -
                   p.col(1).squaredNorm() / double(p.rows())) <= 1e-14);
    CHECK(profile[l - 1] >= 0.0);
  }
  CHECK_THROWS_AS(memory_norm_profile(model, d, 5), std::invalid_argument);
}

TEST_CASE("gfd diagnostics for closed-form families") {
  // Scalar quadratic-map trajectories fit by a degree-2 polynomial.
  Rng rng(111);
  const Index n = 60, k = 6;
  std::vector<Mat> slices(std::size_t(k), Mat(n, 1));
  for (Index i = 0; i < n; ++i) {
    double x = 0.2 + 0.6 * rng.u01();
    for (Index t = 0; t < k; ++t) {
      slices[std::size_t(t)](i, 0) = x;
      x = x + 0.05 * (x - x * x);
    }
  }
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.05, {"phi"});

  for (PairingMode mode :
       {PairingMode::InitialTime, PairingMode::StationaryPooled}) {
    MZModel model =
        extract_operators(d, RegressionFamily::polynomial(2), 3, mode, 29);
    GfdReport rep = gfd_check(model, d);
    REQUIRE(rep.projection_rms.size() == 3);
    for (Index i = 0; i < 3; ++i) {
      CHECK(rep.projection_rms[i] <= 1e-9);
      CHECK(rep.replay_rms[i] <= 1e-9);
    }
  }
}

TEST_CASE("gfd diagnostics for a gradient family") {
  // A representable signal plus irreducible observation noise: with enough
  // samples the trained network's residual is almost pure noise, and the
  // refit can only recover the sliver of it the optimizer overfits.
  Rng rng(121);
  const Index n = 4000;
  std::vector<Mat> slices(2, Mat(n, 1));
  for (Index i = 0; i < n; ++i) {
    const double x = 2.0 * rng.u01() - 1.0;
    slices[0](i, 0) = x;
    slices[1](i, 0) = 0.5 * std::tanh(2.0 * x) + 0.1 * rng.normal();
  }
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.1, {"x"});

  RegressionFamily fam = RegressionFamily::mlp({1, 5, 1});
  MZModel model =
      extract_operators(d, fam, 1, PairingMode::InitialTime, 33);
  GfdReport rep = gfd_check(model, d);

  // Replay refits with the extraction seed, so deterministic training
  // reproduces the stored operator exactly.
  CHECK(rep.replay_rms[0] <= 1e-14);
  const Mat resid =
      d.slice(1) - predict_batch(model.operators[0], d.slice(0));
  const double w_rms = std::sqrt(resid.squaredNorm() / double(resid.size()));
  CHECK(rep.projection_rms[0] <= 0.10 * w_rms);
}

TEST_CASE("embedded targets restrict regression to the leading block") {
  DataMatrix d = random_ensemble(50, 4, 5, 131);
  MZModel model = extract_operators(d, RegressionFamily::linear(), 2,
                                    PairingMode::InitialTime, 7, 2);
  CHECK(model.input_dim == 4);
  CHECK(model.output_dim == 2);
  CHECK(model.operators[0].theta.rows() == 2);
  CHECK(model.operators[0].theta.cols() == 4);
  const Mat oracle = qr_lstsq(d.slice(0), Mat(d.slice(1).leftCols(2)));
  CHECK(max_abs_diff(model.operators[0].theta, oracle) <= 1e-9);
  REQUIRE(model.residual_samples.size() == 1);
  CHECK(model.residual_samples[0].cols() == 2);
}

TEST_CASE("model directory round trip") {
  Rng rng(141);
  const Index n = 40, k = 6;
  std::vector<Mat> slices(std::size_t(k), Mat(n, 1));
  for (Index i = 0; i < n; ++i) {
    double x = 0.1 + 0.8 * rng.u01();
    for (Index t = 0; t < k; ++t) {
      slices[std::size_t(t)](i, 0) = x;
      x = x + 0.05 * (x - x * x);
    }
  }
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.05, {"phi"});
  MZModel model = extract_operators(d, RegressionFamily::polynomial(2), 3,
                                    PairingMode::StationaryPooled, 43);

  const std::string dir = temp_dir("mz_model_rt");
  std::filesystem::remove_all(dir);
  save_mz_model(model, dir);
  MZModel back = load_mz_model(dir);

  CHECK(back.h() == model.h());
  CHECK(back.pairing == model.pairing);
  CHECK(back.base_seed == model.base_seed);
  CHECK(back.input_dim == model.input_dim);
  CHECK(back.output_dim == model.output_dim);
  CHECK(back.delta == model.delta);
  REQUIRE(back.observable_names == model.observable_names);
  for (Index i = 0; i < model.h(); ++i) {
    CHECK(back.operators[std::size_t(i)].theta ==
          model.operators[std::size_t(i)].theta);
    CHECK(back.operators[std::size_t(i)].fit_mse ==
          model.operators[std::size_t(i)].fit_mse);
  }
  REQUIRE(back.residual_samples.size() == model.residual_samples.size());
  for (std::size_t i = 0; i < back.residual_samples.size(); ++i)
    CHECK(back.residual_samples[i] == model.residual_samples[i]);

  // A reloaded model replays the extraction diagnostics unchanged.
  GfdReport rep = gfd_check(back, d);
  for (Index i = 0; i < back.h(); ++i) CHECK(rep.projection_rms[i] <= 1e-9);

  std::filesystem::remove(dir + "/op_0001.bin");
  CHECK_THROWS(load_mz_model(dir));
  CHECK_THROWS(load_mz_model(temp_dir("no_such_model_dir")));
}

TEST_CASE("gradient-family model directory round trip") {
  Rng rng(151);
  const Index n = 30;
  std::vector<Mat> slices(2, Mat(n, 1));
  for (Index i = 0; i < n; ++i) {
    const double x = 2.0 * rng.u01() - 1.0;
    slices[0](i, 0) = x;
    slices[1](i, 0) = 0.5 * x;
  }
  DataMatrix d = DataMatrix::ensemble(std::move(slices), 0.1, {"x"});
  RegressionFamily fam = RegressionFamily::mlp({1, 4, 1});
  fam.trainer.epochs = 50;
  MZModel model =
      extract_operators(d, fam, 1, PairingMode::InitialTime, 53);

  const std::string dir = temp_dir("mz_model_mlp_rt");
  std::filesystem::remove_all(dir);
  save_mz_model(model, dir);
  MZModel back = load_mz_model(dir);
  CHECK(back.operators[0].params == model.operators[0].params);
  CHECK(back.family.kind == RegressionFamily::Kind::Mlp);
  const Mat x = Mat::Random(5, 1);
  CHECK(max_abs_diff(predict_batch(back.operators[0], x),
                     predict_batch(model.operators[0], x)) == 0.0);
}

TEST_CASE("extraction rejects malformed requests") {
  DataMatrix d = random_ensemble(10, 2, 4, 161);
  const RegressionFamily lin = RegressionFamily::linear();
  CHECK_THROWS_AS(extract_operators(d, lin, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(extract_operators(d, lin, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(
      extract_operators(d, lin, 2, PairingMode::InitialTime, 1, 3),
      std::invalid_argument);
  CHECK_THROWS_AS(compute_correlations(d, 4, PairingMode::InitialTime),
                  std::invalid_argument);
  CHECK_THROWS_AS(mori_closed_form(d, 0), std::invalid_argument);

  MZModel model = extract_operators(d, lin, 2, 1);
  CHECK_THROWS_AS(residual_targets(model, d, 0), std::invalid_argument);
  CHECK_THROWS_AS(residual_targets(model, d, 3), std::invalid_argument);
  DataMatrix wide = random_ensemble(10, 3, 4, 162);
  CHECK_THROWS_AS(gfd_check(model, wide), std::invalid_argument);
  CHECK_THROWS_AS(memory_norm_profile(model, wide), std::invalid_argument);
}

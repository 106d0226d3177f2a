#include "mz/predict.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "mz/binio.hpp"
#include "mz/dynamics.hpp"
#include "mz/rng.hpp"

namespace mz {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) {
  throw std::invalid_argument(msg);
}

// Lower-triangular transform whose square reproduces the covariance, with an
// escalating trace-scaled jitter when the matrix is only semidefinite (an
// all-zero covariance yields an all-but-zero transform).
Mat noise_transform(const Mat& cov) {
  const Index m = cov.rows();
  Mat c = cov;
  double jitter = std::max(1e-10 * cov.trace() / double(m), 1e-30);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Mat> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    c = cov;
    c.diagonal().array() += jitter;
    jitter *= 100.0;
  }
  throw std::runtime_error("noise covariance is not positive semidefinite");
}

// One operator list abstracted over the two rollout flavors.
struct OpSet {
  const std::vector<Mat>* kappas = nullptr;
  const MZModel* model = nullptr;

  Index count() const {
    return kappas ? Index(kappas->size()) : model->h();
  }
  Index in_dim() const {
    return kappas ? (*kappas)[0].cols() : model->input_dim;
  }
  Index out_dim() const {
    return kappas ? (*kappas)[0].rows() : model->output_dim;
  }
  Vec apply(Index l, const Vec& g) const {
    if (kappas) return (*kappas)[std::size_t(l)] * g;
    return predict(model->operators[std::size_t(l)], g);
  }
};

PredictionResult run_rollout(const OpSet& ops, const History& history,
                             const PredictionConfig& cfg) {
  cfg.validate();
  const Index in = ops.in_dim();
  const Index out = ops.out_dim();
  if (history.rows() < 1) fail_arg("history is empty");
  if (history.cols() != in) fail_arg("history width mismatch");
  if (!history.allFinite()) fail_arg("non-finite history");
  const Index eff_h =
      cfg.mode == PredictionConfig::Mode::MarkovOnly ? 1 : cfg.history_length;
  if (eff_h > ops.count())
    fail_arg("history length exceeds available operators");
  const bool embedded = out < in;
  if (embedded && in % out != 0)
    fail_arg("input width is not a multiple of the output width");

  const bool gaussian = cfg.noise == PredictionConfig::Noise::GaussianIID;
  Mat transform;
  if (gaussian) {
    if (cfg.gaussian.mean.size() != out || cfg.gaussian.cov.rows() != out ||
        cfg.gaussian.cov.cols() != out)
      fail_arg("noise dimensions do not match the operator output");
    transform = noise_transform(cfg.gaussian.cov);
  }
  Rng rng(cfg.seed);

  // Only the last eff_h states can ever enter the sum; lags reaching past
  // the start of a short history are dropped.
  std::vector<Vec> states;
  states.reserve(std::size_t(std::min(eff_h, history.rows()) + cfg.horizon));
  for (Index i = std::max<Index>(history.rows() - eff_h, 0);
       i < history.rows(); ++i)
    states.push_back(history.row(i).transpose());

  PredictionResult res;
  res.values = Mat::Zero(cfg.horizon, in);
  Vec z(out);
  for (Index s = 0; s < cfg.horizon; ++s) {
    Vec acc = Vec::Zero(out);
    const Index lags = std::min<Index>(eff_h, Index(states.size()));
    for (Index l = 0; l < lags; ++l)
      acc += ops.apply(l, states[states.size() - 1 - std::size_t(l)]);
    if (gaussian) {
      for (Index j = 0; j < out; ++j) z[j] = rng.normal();
      acc += cfg.gaussian.mean + transform * z;
    }
    if (!acc.allFinite() || acc.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
      res.diverged_at = s;
      break;
    }
    Vec state(in);
    if (embedded) {
      state.head(out) = acc;
      state.tail(in - out) = states.back().head(in - out);
    } else {
      state = std::move(acc);
    }
    res.values.row(s) = state.transpose();
    states.push_back(std::move(state));
  }
  return res;
}

Mat values_or_throw(PredictionResult&& res) {
  if (res.diverged()) throw std::runtime_error("prediction diverged");
  return std::move(res.values);
}

}  // namespace

void PredictionConfig::validate() const {
  if (horizon < 1) fail_arg("prediction horizon must be at least 1");
  if (history_length < 1) fail_arg("history length must be at least 1");
}

PredictionResult rollout_linear(const std::vector<Mat>& kappas,
                                const History& history,
                                const PredictionConfig& cfg) {
  if (cfg.mode != PredictionConfig::Mode::LinearWithMemory)
    fail_arg("linear rollout requires the linear-with-memory mode");
  if (kappas.empty()) fail_arg("no operators given");
  for (const Mat& k : kappas) {
    if (k.rows() != kappas[0].rows() || k.cols() != k.rows())
      fail_arg("memory matrices must be square and uniform");
    if (!k.allFinite()) fail_arg("non-finite memory matrix");
  }
  OpSet ops;
  ops.kappas = &kappas;
  return run_rollout(ops, history, cfg);
}

PredictionResult rollout_model(const MZModel& model, const History& history,
                               const PredictionConfig& cfg) {
  if (cfg.mode == PredictionConfig::Mode::LinearWithMemory)
    fail_arg("model rollout handles nonlinear-with-memory or markov-only");
  if (model.h() < 1) fail_arg("model holds no operators");
  OpSet ops;
  ops.model = &model;
  return run_rollout(ops, history, cfg);
}

Mat predict_linear_memory(const std::vector<Mat>& kappas,
                          const History& history,
                          const PredictionConfig& cfg) {
  return values_or_throw(rollout_linear(kappas, history, cfg));
}

Mat predict_nonlinear_memory(const MZModel& model, const History& history,
                             const PredictionConfig& cfg) {
  return values_or_throw(rollout_model(model, history, cfg));
}

GaussianNoise fit_gaussian_noise(const std::vector<Mat>& residual_samples) {
  Index cols = -1;
  Index total = 0;
  for (const Mat& w : residual_samples) {
    if (w.rows() == 0) continue;
    if (cols < 0) cols = w.cols();
    if (w.cols() != cols) fail_arg("residual arrays have mixed widths");
    if (!w.allFinite()) fail_arg("non-finite residual sample");
    total += w.rows();
  }
  if (total < 2) fail_arg("need at least two residual samples");

  GaussianNoise out;
  out.mean = Vec::Zero(cols);
  for (const Mat& w : residual_samples)
    if (w.rows() > 0) out.mean += w.colwise().sum().transpose();
  out.mean /= double(total);

  out.cov = Mat::Zero(cols, cols);
  for (const Mat& w : residual_samples) {
    if (w.rows() == 0) continue;
    const Mat centered = w.rowwise() - out.mean.transpose();
    out.cov += centered.transpose() * centered;
  }
  out.cov /= double(total);
  return out;
}

void write_prediction_csv(const std::string& path, const Mat& values,
                          const std::vector<std::string>& names, double delta,
                          double t_last) {
  if (Index(names.size()) != values.cols())
    fail_arg("column name count mismatch");
  std::string text = "time";
  for (const auto& name : names) text += "," + name;
  text += "\n";
  for (Index s = 0; s < values.rows(); ++s) {
    text += binio::format_g17(t_last + double(s + 1) * delta);
    for (Index j = 0; j < values.cols(); ++j)
      text += "," + binio::format_g17(values(s, j));
    text += "\n";
  }
  binio::write_file(path, text);
}

}  // namespace mz

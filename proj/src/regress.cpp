#include "mz/regress.hpp"

#include "mz/binio.hpp"
#include "mz/config.hpp"
#include "mz/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mz {
namespace {

[[noreturn]] void fail_arg(const std::string& msg) {
  throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Closed-form feature maps.

Vec compute_spline_knots(const RegressionFamily& fam, const Mat& X) {
  const double lo = X.col(0).minCoeff();
  const double hi = X.col(0).maxCoeff();
  const double center = 0.5 * (lo + hi);
  double half = 0.5 * (hi - lo);
  // A degenerate (constant) input still needs a nonempty knot interval.
  if (half <= 0.0) half = std::max(1e-8, std::abs(center) * 1e-8);
  const double span = fam.knot_range_factor * half;
  Vec knots(fam.n_knots);
  for (int i = 0; i < fam.n_knots; ++i) {
    const double f = double(i) / double(fam.n_knots - 1);
    knots[i] = center - span + 2.0 * span * f;
  }
  return knots;
}

Mat closed_form_features(const RegressionFamily& fam, const Mat& X,
                         const Vec& knots) {
  const Index n = X.rows();
  switch (fam.kind) {
    case RegressionFamily::Kind::Linear:
      return X;
    case RegressionFamily::Kind::Polynomial: {
      Mat phi(n, fam.degree + 1);
      phi.col(0).setOnes();
      for (int j = 1; j <= fam.degree; ++j)
        phi.col(j) = phi.col(j - 1).cwiseProduct(X.col(0));
      return phi;
    }
    case RegressionFamily::Kind::SplineRidge: {
      const Index nb = knots.size() + fam.spline_degree - 1;
      Mat phi(n, nb + 1);
      phi.col(0).setOnes();
      for (Index i = 0; i < n; ++i)
        phi.row(i).tail(nb) =
            spline_features(X(i, 0), knots, fam.spline_degree).transpose();
      return phi;
    }
    default:
      fail_arg("closed-form features undefined for " + fam.kind_name());
  }
}


// ---------------------------------------------------------------------------
// Gradient families. A net exposes the flat parameter layout, batch forward,
// and the analytic gradient of the cost (mean over samples of the summed
// squared output error).

class GradientNet {
 public:
  virtual ~GradientNet() = default;
  virtual Index n_params() const = 0;
  virtual void init_params(Vec& p, Rng& rng) const = 0;
  virtual Mat forward(const Vec& p, const Mat& X) const = 0;
  virtual double cost_grad(const Vec& p, const Mat& X, const Mat& Y,
                           Vec& g) const = 0;
  double cost(const Vec& p, const Mat& X, const Mat& Y) const {
    return (forward(p, X) - Y).squaredNorm() / double(X.rows());
  }
};

class MlpNet final : public GradientNet {
 public:
  explicit MlpNet(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_off_.push_back(total_);
      total_ += sizes_[l + 1] * sizes_[l];
      b_off_.push_back(total_);
      total_ += sizes_[l + 1];
    }
  }

  Index n_params() const override { return total_; }

  void init_params(Vec& p, Rng& rng) const override {
    p.resize(total_);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double s = 1.0 / std::sqrt(double(sizes_[l]));
      const Index count = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
      for (Index i = 0; i < count; ++i)
        p[w_off_[l] + i] = rng.uniform(-s, s);
    }
  }

  Mat forward(const Vec& p, const Mat& X) const override {
    Mat a = X;
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      Mat z = a * weight(p, l).transpose();
      z.rowwise() += bias(p, l).transpose();
      if (l + 1 < layers)
        a = z.array().tanh().matrix();
      else
        a = std::move(z);
    }
    return a;
  }

  double cost_grad(const Vec& p, const Mat& X, const Mat& Y,
                   Vec& g) const override {
    const Index n = X.rows();
    const std::size_t layers = sizes_.size() - 1;
    std::vector<Mat> act(layers + 1);
    act[0] = X;
    for (std::size_t l = 0; l < layers; ++l) {
      Mat z = act[l] * weight(p, l).transpose();
      z.rowwise() += bias(p, l).transpose();
      act[l + 1] = (l + 1 < layers) ? z.array().tanh().matrix() : std::move(z);
    }
    const double cost = (act[layers] - Y).squaredNorm() / double(n);
    g.resize(total_);
    Mat delta = (2.0 / double(n)) * (act[layers] - Y);
    for (std::size_t l = layers; l-- > 0;) {
      Eigen::Map<Mat>(g.data() + w_off_[l], sizes_[l + 1], sizes_[l]) =
          delta.transpose() * act[l];
      Eigen::Map<Vec>(g.data() + b_off_[l], sizes_[l + 1]) =
          delta.colwise().sum().transpose();
      if (l > 0)
        delta = ((delta * weight(p, l)).array() *
                 (1.0 - act[l].array().square()))
                    .matrix();
    }
    return cost;
  }

 private:
  Eigen::Map<const Mat> weight(const Vec& p, std::size_t l) const {
    return Eigen::Map<const Mat>(p.data() + w_off_[l], sizes_[l + 1],
                                 sizes_[l]);
  }
  Eigen::Map<const Vec> bias(const Vec& p, std::size_t l) const {
    return Eigen::Map<const Vec>(p.data() + b_off_[l], sizes_[l + 1]);
  }

  std::vector<Index> sizes_;
  std::vector<Index> w_off_, b_off_;
  Index total_ = 0;
};

// Stacked 1-D convolutions over a periodic (or zero-padded) grid, tanh
// activations, and a final 1x1 channel-mixing head. Activations are stored
// sample-major as N x (channels*width) with contiguous channel blocks; the
// convolutions run as im2col + GEMM with an x-major flat index r = x*N + n
// so every copy is a contiguous column segment.
class ConvNet final : public GradientNet {
 public:
  ConvNet(int layers, Index channels, Index kernel, bool circular,
          Index in_channels, Index width)
      : layers_(layers),
        ch_(channels),
        k_(kernel),
        circular_(circular),
        in_ch_(in_channels),
        w_(width) {
    for (int l = 0; l < layers_; ++l) {
      const Index cin = (l == 0) ? in_ch_ : ch_;
      k_off_.push_back(total_);
      total_ += cin * k_ * ch_;
      b_off_.push_back(total_);
      total_ += ch_;
    }
    head_w_off_ = total_;
    total_ += ch_;
    head_b_off_ = total_;
    total_ += 1;
    const Index pad = (k_ - 1) / 2;
    idx_.resize(std::size_t(w_ * k_));
    for (Index x = 0; x < w_; ++x)
      for (Index t = 0; t < k_; ++t) {
        const Index raw = x + t - pad;
        idx_[std::size_t(x * k_ + t)] =
            circular_ ? ((raw % w_) + w_) % w_
                      : ((raw >= 0 && raw < w_) ? raw : Index(-1));
      }
  }

  Index n_params() const override { return total_; }

  void init_params(Vec& p, Rng& rng) const override {
    p.resize(total_);
    for (int l = 0; l < layers_; ++l) {
      const Index cin = (l == 0) ? in_ch_ : ch_;
      const double s = 1.0 / std::sqrt(double(cin * k_));
      const Index count = cin * k_ * ch_ + ch_;
      for (Index i = 0; i < count; ++i)
        p[k_off_[std::size_t(l)] + i] = rng.uniform(-s, s);
    }
    const double s = 1.0 / std::sqrt(double(ch_));
    for (Index i = 0; i < ch_ + 1; ++i)
      p[head_w_off_ + i] = rng.uniform(-s, s);
  }

  Mat forward(const Vec& p, const Mat& X) const override {
    const Index n = X.rows();
    // Chunked so the im2col buffer stays modest for large sample counts.
    const Index chunk = 2048;
    if (n > chunk) {
      Mat out(n, w_);
      for (Index start = 0; start < n; start += chunk) {
        const Index rows = std::min(chunk, n - start);
        out.middleRows(start, rows) = forward(p, X.middleRows(start, rows));
      }
      return out;
    }
    Mat a = X;
    for (int l = 0; l < layers_; ++l) {
      const Index cin = (l == 0) ? in_ch_ : ch_;
      const Mat cols = im2col(a, cin);
      Mat flat = cols * kernel(p, l);
      flat.rowwise() += bias(p, l).transpose();
      a = grid_from_flat(flat, n, true);
    }
    return head_out(p, a, n);
  }

  double cost_grad(const Vec& p, const Mat& X, const Mat& Y,
                   Vec& g) const override {
    const Index n = X.rows();
    std::vector<Mat> act(static_cast<std::size_t>(layers_) + 1);
    std::vector<Mat> cols(static_cast<std::size_t>(layers_));
    act[0] = X;
    for (int l = 0; l < layers_; ++l) {
      const Index cin = (l == 0) ? in_ch_ : ch_;
      cols[std::size_t(l)] = im2col(act[std::size_t(l)], cin);
      Mat flat = cols[std::size_t(l)] * kernel(p, l);
      flat.rowwise() += bias(p, l).transpose();
      act[std::size_t(l) + 1] = grid_from_flat(flat, n, true);
    }
    const Mat& top = act[std::size_t(layers_)];
    Mat out = head_out(p, top, n);
    const double cost = (out - Y).squaredNorm() / double(n);

    g.setZero(total_);
    Mat dout = (2.0 / double(n)) * (out - Y);
    for (Index c = 0; c < ch_; ++c)
      g[head_w_off_ + c] =
          dout.cwiseProduct(top.middleCols(c * w_, w_)).sum();
    g[head_b_off_] = dout.sum();
    Mat dact(n, ch_ * w_);
    for (Index c = 0; c < ch_; ++c)
      dact.middleCols(c * w_, w_) = p[head_w_off_ + c] * dout;

    for (int l = layers_; l-- > 0;) {
      const Index cin = (l == 0) ? in_ch_ : ch_;
      const Mat dpre =
          (dact.array() * (1.0 - act[std::size_t(l) + 1].array().square()))
              .matrix();
      const Mat dflat = flat_from_grid(dpre, n, ch_);
      Eigen::Map<Mat>(g.data() + k_off_[std::size_t(l)], cin * k_, ch_) =
          cols[std::size_t(l)].transpose() * dflat;
      Eigen::Map<Vec>(g.data() + b_off_[std::size_t(l)], ch_) =
          dflat.colwise().sum().transpose();
      if (l > 0) {
        const Mat dcols = dflat * kernel(p, l).transpose();
        dact = col2im(dcols, n, cin);
      }
    }
    return cost;
  }

 private:
  // Kernel of layer l as (cin*k) x channels; column o holds taps K[o][c][t]
  // with row index c*k + t, matching the flat storage order.
  Eigen::Map<const Mat> kernel(const Vec& p, int l) const {
    const Index cin = (l == 0) ? in_ch_ : ch_;
    return Eigen::Map<const Mat>(p.data() + k_off_[std::size_t(l)], cin * k_,
                                 ch_);
  }
  Eigen::Map<const Vec> bias(const Vec& p, int l) const {
    return Eigen::Map<const Vec>(p.data() + b_off_[std::size_t(l)], ch_);
  }

  Mat head_out(const Vec& p, const Mat& top, Index n) const {
    Mat out = Mat::Constant(n, w_, p[head_b_off_]);
    for (Index c = 0; c < ch_; ++c)
      out += p[head_w_off_ + c] * top.middleCols(c * w_, w_);
    return out;
  }

  Mat im2col(const Mat& a, Index cin) const {
    const Index n = a.rows();
    Mat cols = circular_ ? Mat(n * w_, cin * k_) : Mat::Zero(n * w_, cin * k_);
    for (Index c = 0; c < cin; ++c)
      for (Index t = 0; t < k_; ++t)
        for (Index x = 0; x < w_; ++x) {
          const Index src = idx_[std::size_t(x * k_ + t)];
          if (src < 0) continue;
          cols.col(c * k_ + t).segment(x * n, n) = a.col(c * w_ + src);
        }
    return cols;
  }

  Mat col2im(const Mat& dcols, Index n, Index cin) const {
    Mat da = Mat::Zero(n, cin * w_);
    for (Index c = 0; c < cin; ++c)
      for (Index t = 0; t < k_; ++t)
        for (Index x = 0; x < w_; ++x) {
          const Index src = idx_[std::size_t(x * k_ + t)];
          if (src < 0) continue;
          da.col(c * w_ + src) += dcols.col(c * k_ + t).segment(x * n, n);
        }
    return da;
  }

  Mat grid_from_flat(const Mat& flat, Index n, bool squash) const {
    Mat grid(n, ch_ * w_);
    for (Index o = 0; o < ch_; ++o)
      for (Index x = 0; x < w_; ++x)
        grid.col(o * w_ + x) = flat.col(o).segment(x * n, n);
    if (squash) grid = grid.array().tanh().matrix();
    return grid;
  }

  Mat flat_from_grid(const Mat& grid, Index n, Index c_out) const {
    Mat flat(n * w_, c_out);
    for (Index o = 0; o < c_out; ++o)
      for (Index x = 0; x < w_; ++x)
        flat.col(o).segment(x * n, n) = grid.col(o * w_ + x);
    return flat;
  }

  int layers_;
  Index ch_, k_;
  bool circular_;
  Index in_ch_, w_;
  std::vector<Index> k_off_, b_off_;
  Index head_w_off_ = 0, head_b_off_ = 0;
  Index total_ = 0;
  std::vector<Index> idx_;
};

std::unique_ptr<GradientNet> make_net(const RegressionFamily& fam,
                                      Index in_dim, Index out_dim) {
  if (fam.kind == RegressionFamily::Kind::Mlp) {
    if (in_dim != fam.layer_sizes.front())
      fail_arg("mlp input width mismatch");
    if (out_dim != fam.layer_sizes.back())
      fail_arg("mlp output width mismatch");
    return std::make_unique<MlpNet>(fam.layer_sizes);
  }
  if (fam.kind == RegressionFamily::Kind::Conv1d) {
    const Index width = out_dim;
    if (in_dim != fam.in_channels * width)
      fail_arg("conv1d input width must be in_channels times output width");
    return std::make_unique<ConvNet>(fam.conv_layers, fam.channels,
                                     fam.kernel_size, fam.circular,
                                     fam.in_channels, width);
  }
  fail_arg("no gradient net for " + fam.kind_name());
}

struct TrainOutcome {
  Vec params;
  double fit_mse = 0.0;
  int epochs_run = 0;
};

// Mini-batch Adam with a fixed validation split carved out before training,
// early stopping on the validation cost, and best-parameter restore.
TrainOutcome adam_train(const GradientNet& net, const TrainerConfig& tc,
                        const Mat& X, const Mat& Y, std::uint64_t seed,
                        const Vec* warm_start) {
  const Index n = X.rows();
  const Index n_params = net.n_params();
  Rng rng(seed);
  Vec p;
  if (warm_start) {
    if (warm_start->size() != n_params)
      fail_arg("warm start has wrong parameter count");
    p = *warm_start;
  } else {
    net.init_params(p, rng);
  }

  Index n_val = 0;
  if (tc.validation_fraction > 0.0 && n >= 5)
    n_val = std::clamp<Index>(
        Index(std::llround(tc.validation_fraction * double(n))), 1, n - 1);
  Mat x_tr, y_tr, x_val, y_val;
  if (n_val > 0) {
    const auto perm = rng.permutation(std::size_t(n));
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + n_val);
    std::vector<std::size_t> tr_idx(perm.begin() + n_val, perm.end());
    x_val = X(val_idx, Eigen::all);
    y_val = Y(val_idx, Eigen::all);
    x_tr = X(tr_idx, Eigen::all);
    y_tr = Y(tr_idx, Eigen::all);
  } else {
    x_tr = X;
    y_tr = Y;
  }
  const Index n_train = x_tr.rows();

  Vec m = Vec::Zero(n_params), v = Vec::Zero(n_params), g(n_params);
  double best = std::numeric_limits<double>::infinity();
  Vec best_p = p;
  int bad = 0, steps = 0;
  TrainOutcome out;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto order = rng.permutation(std::size_t(n_train));
    for (Index start = 0; start < n_train; start += tc.batch_size) {
      const Index bs = std::min<Index>(tc.batch_size, n_train - start);
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + start + bs);
      const Mat xb = x_tr(batch, Eigen::all);
      const Mat yb = y_tr(batch, Eigen::all);
      const double c = net.cost_grad(p, xb, yb, g);
      if (!std::isfinite(c)) throw std::runtime_error("training diverged");
      ++steps;
      m = tc.beta1 * m + (1.0 - tc.beta1) * g;
      v = tc.beta2 * v + (1.0 - tc.beta2) * g.cwiseProduct(g);
      const double a1 = 1.0 - std::pow(tc.beta1, steps);
      const double a2 = 1.0 - std::pow(tc.beta2, steps);
      p.array() -=
          tc.lr * (m.array() / a1) / ((v.array() / a2).sqrt() + tc.eps);
    }
    out.epochs_run = epoch;
    const double monitored = (n_val > 0) ? net.cost(p, x_val, y_val)
                                         : net.cost(p, x_tr, y_tr);
    if (!std::isfinite(monitored))
      throw std::runtime_error("training diverged");
    if (monitored < best) {
      best = monitored;
      best_p = p;
      bad = 0;
    } else if (++bad > tc.patience) {
      break;
    }
  }
  out.params = std::move(best_p);
  out.fit_mse = net.cost(out.params, X, Y);
  return out;
}

std::string join_sizes(const std::vector<Index>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::vector<Index> parse_sizes(const std::string& s) {
  std::vector<Index> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(Index(std::stoll(tok)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void TrainerConfig::validate() const {
  if (!(lr > 0.0)) fail_arg("learning rate must be positive");
  if (epochs < 1) fail_arg("epoch count must be at least 1");
  if (batch_size < 1) fail_arg("batch size must be at least 1");
  if (patience < 0) fail_arg("patience must be nonnegative");
  if (validation_fraction < 0.0 || validation_fraction > 0.5)
    fail_arg("validation fraction must lie in [0, 0.5]");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    fail_arg("adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) fail_arg("adam epsilon must be positive");
}

RegressionFamily RegressionFamily::linear() {
  RegressionFamily f;
  f.kind = Kind::Linear;
  return f;
}

RegressionFamily RegressionFamily::polynomial(int degree) {
  RegressionFamily f;
  f.kind = Kind::Polynomial;
  f.degree = degree;
  return f;
}

RegressionFamily RegressionFamily::spline_ridge(int n_knots, int degree,
                                                double lambda,
                                                double knot_range_factor) {
  RegressionFamily f;
  f.kind = Kind::SplineRidge;
  f.n_knots = n_knots;
  f.spline_degree = degree;
  f.lambda = lambda;
  f.knot_range_factor = knot_range_factor;
  return f;
}

RegressionFamily RegressionFamily::mlp(std::vector<Index> layer_sizes) {
  RegressionFamily f;
  f.kind = Kind::Mlp;
  f.layer_sizes = std::move(layer_sizes);
  f.trainer.optimizer = TrainerConfig::Optimizer::Adam;
  return f;
}

RegressionFamily RegressionFamily::conv1d(int n_layers, Index channels,
                                          Index kernel_size, bool circular,
                                          Index in_channels) {
  RegressionFamily f;
  f.kind = Kind::Conv1d;
  f.conv_layers = n_layers;
  f.channels = channels;
  f.kernel_size = kernel_size;
  f.circular = circular;
  f.in_channels = in_channels;
  f.trainer.optimizer = TrainerConfig::Optimizer::Adam;
  return f;
}

void RegressionFamily::validate() const {
  trainer.validate();
  switch (kind) {
    case Kind::Linear:
      break;
    case Kind::Polynomial:
      if (degree < 1) fail_arg("polynomial degree must be at least 1");
      break;
    case Kind::SplineRidge:
      if (n_knots < 2) fail_arg("spline needs at least 2 knots");
      if (spline_degree < 1) fail_arg("spline degree must be at least 1");
      if (lambda < 0.0) fail_arg("spline penalty must be nonnegative");
      if (knot_range_factor < 1.0)
        fail_arg("knot range factor must be at least 1 to cover the data");
      break;
    case Kind::Mlp:
      if (layer_sizes.size() < 2) fail_arg("mlp needs input and output sizes");
      for (Index s : layer_sizes)
        if (s < 1) fail_arg("mlp layer sizes must be positive");
      break;
    case Kind::Conv1d:
      if (conv_layers < 1) fail_arg("conv1d needs at least one layer");
      if (channels < 1) fail_arg("conv1d channel count must be positive");
      if (kernel_size < 1 || kernel_size % 2 == 0)
        fail_arg("conv1d kernel size must be odd");
      if (in_channels < 1) fail_arg("conv1d input channels must be positive");
      break;
  }
  const bool cf = closed_form();
  if (cf && trainer.optimizer != TrainerConfig::Optimizer::ClosedForm)
    fail_arg("gradient training is not supported for " + kind_name());
  if (!cf && trainer.optimizer != TrainerConfig::Optimizer::Adam)
    fail_arg("closed-form solve is unavailable for " + kind_name());
}

std::string RegressionFamily::kind_name() const {
  switch (kind) {
    case Kind::Linear: return "linear";
    case Kind::Polynomial: return "polynomial";
    case Kind::SplineRidge: return "spline_ridge";
    case Kind::Mlp: return "mlp";
    case Kind::Conv1d: return "conv1d";
  }
  return "unknown";
}

Vec spline_features(double x, const Vec& knots, int degree) {
  const Index m = knots.size();
  const int p = degree;
  const Index nb = m + p - 1;
  // Clamped knot vector: each boundary site repeated degree extra times.
  auto knot = [&](Index i) {
    return knots[std::clamp<Index>(i - p, 0, m - 1)];
  };
  const double xc = std::clamp(x, knots[0], knots[m - 1]);
  Index span = p;
  while (span < m + p - 2 && xc >= knot(span + 1)) ++span;

  // Cox-de Boor triangle over the p+1 bases supported on the span.
  std::vector<double> nvals(std::size_t(p) + 1), left(std::size_t(p) + 1),
      right(std::size_t(p) + 1);
  nvals[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[std::size_t(j)] = xc - knot(span + 1 - j);
    right[std::size_t(j)] = knot(span + j) - xc;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp =
          nvals[std::size_t(r)] /
          (right[std::size_t(r) + 1] + left[std::size_t(j - r)]);
      nvals[std::size_t(r)] = saved + right[std::size_t(r) + 1] * tmp;
      saved = left[std::size_t(j - r)] * tmp;
    }
    nvals[std::size_t(j)] = saved;
  }
  Vec out = Vec::Zero(nb);
  out.segment(span - p, p + 1) =
      Eigen::Map<const Vec>(nvals.data(), p + 1);
  return out;
}

ClosedFormSolver::ClosedFormSolver(const RegressionFamily& family,
                                   const Mat& x_fit)
    : family_(family), input_dim_(x_fit.cols()) {
  family_.validate();
  if (!family_.closed_form())
    fail_arg("closed-form solver needs a closed-form family");
  if (x_fit.rows() == 0) fail_arg("training data is empty");
  if (!x_fit.allFinite()) fail_arg("non-finite training data");
  if (family_.kind != RegressionFamily::Kind::Linear && x_fit.cols() != 1)
    fail_arg(family_.kind_name() + " requires scalar input");
  if (family_.kind == RegressionFamily::Kind::SplineRidge)
    knots_ = compute_spline_knots(family_, x_fit);
  phi_ = closed_form_features(family_, x_fit, knots_);

  const Index f = phi_.cols();
  Mat gram = phi_.transpose() * phi_;
  if (family_.kind == RegressionFamily::Kind::SplineRidge &&
      family_.lambda > 0.0)
    for (Index j = 1; j < f; ++j) gram(j, j) += family_.lambda;
  ldlt_.compute(gram);
  const Vec pivots = ldlt_.vectorD().cwiseAbs();
  // An exact linear dependence among features lands a pivot at roundoff
  // level; genuine ill-conditioning stays orders of magnitude above it.
  const double eps = std::numeric_limits<double>::epsilon();
  const bool deficient =
      ldlt_.info() != Eigen::Success ||
      pivots.minCoeff() <= pivots.maxCoeff() * double(f) * eps * 8.0;
  if (deficient) {
    jitter_ = std::max(1e-10 * gram.trace() / double(f), 1e-30);
    gram.diagonal().array() += jitter_;
    ldlt_.compute(gram);
    std::fprintf(stderr,
                 "fit: rank-deficient normal equations, ridge jitter %.3e "
                 "applied\n",
                 jitter_);
  }
}

FittedModel ClosedFormSolver::solve(const Mat& y) const {
  if (phi_.rows() != y.rows()) fail_arg("input and target row counts differ");
  if (!y.allFinite()) fail_arg("non-finite training data");
  const Mat sol = ldlt_.solve(phi_.transpose() * y);
  if (!sol.allFinite())
    throw std::runtime_error("normal equations remain singular");
  FittedModel model;
  model.family = family_;
  model.input_dim = input_dim_;
  model.output_dim = y.cols();
  model.knots = knots_;
  model.theta = sol.transpose();
  model.jitter = jitter_;
  model.fit_mse =
      (phi_ * model.theta.transpose() - y).squaredNorm() / double(y.rows());
  return model;
}

Mat ClosedFormSolver::features_of(const Mat& x) const {
  if (x.cols() != input_dim_) fail_arg("prediction input width mismatch");
  return closed_form_features(family_, x, knots_);
}

FittedModel fit(const RegressionFamily& family, const Mat& X, const Mat& Y,
                std::uint64_t seed, const Vec* warm_start) {
  family.validate();
  if (X.rows() == 0) fail_arg("training data is empty");
  if (X.rows() != Y.rows()) fail_arg("input and target row counts differ");
  if (!X.allFinite() || !Y.allFinite()) fail_arg("non-finite training data");

  if (family.closed_form()) return ClosedFormSolver(family, X).solve(Y);

  FittedModel model;
  model.family = family;
  model.input_dim = X.cols();
  model.output_dim = Y.cols();
  const auto net = make_net(family, X.cols(), Y.cols());
  TrainOutcome out = adam_train(*net, family.trainer, X, Y, seed, warm_start);
  model.params = std::move(out.params);
  model.fit_mse = out.fit_mse;
  model.epochs_run = out.epochs_run;
  return model;
}

Mat predict_batch(const FittedModel& m, const Mat& X) {
  if (X.cols() != m.input_dim) fail_arg("prediction input width mismatch");
  if (m.family.closed_form()) {
    const Mat phi = closed_form_features(m.family, X, m.knots);
    return phi * m.theta.transpose();
  }
  const auto net = make_net(m.family, m.input_dim, m.output_dim);
  return net->forward(m.params, X);
}

Vec predict(const FittedModel& m, const Vec& x) {
  Mat xr(1, x.size());
  xr.row(0) = x.transpose();
  return predict_batch(m, xr).row(0).transpose();
}

double gradient_check(const RegressionFamily& family, const Vec& params,
                      const Mat& X, const Mat& Y) {
  const auto net = make_net(family, X.cols(), Y.cols());
  if (params.size() != net->n_params())
    fail_arg("parameter count mismatch in gradient check");
  Vec analytic(net->n_params());
  net->cost_grad(params, X, Y, analytic);
  const double h = 1e-5;
  Vec probe = params;
  double worst = 0.0;
  for (Index j = 0; j < params.size(); ++j) {
    probe[j] = params[j] + h;
    const double cp = net->cost(probe, X, Y);
    probe[j] = params[j] - h;
    const double cm = net->cost(probe, X, Y);
    probe[j] = params[j];
    const double numeric = (cp - cm) / (2.0 * h);
    const double denom = std::max(std::abs(analytic[j]), std::abs(numeric));
    const double diff = std::abs(analytic[j] - numeric);
    worst = std::max(worst, denom < 1e-6 ? diff : diff / denom);
  }
  return worst;
}

Vec random_params(const RegressionFamily& family, Index in_dim, Index out_dim,
                  std::uint64_t seed) {
  const auto net = make_net(family, in_dim, out_dim);
  Rng rng(seed);
  Vec p;
  net->init_params(p, rng);
  return p;
}

double idempotence_residual(const FittedModel& m, const Mat& X) {
  const Mat yhat = predict_batch(m, X);
  if (m.family.closed_form()) {
    const FittedModel refit = fit(m.family, X, yhat, 0);
    return (m.theta - refit.theta).cwiseAbs().maxCoeff();
  }
  const FittedModel refit = fit(m.family, X, yhat, 0, &m.params);
  const Mat again = predict_batch(refit, X);
  return std::sqrt((again - yhat).squaredNorm() /
                   double(X.rows() * yhat.cols()));
}

void save_model(const FittedModel& m, const std::string& path) {
  Config h;
  h.set("family.kind", m.family.kind_name());
  switch (m.family.kind) {
    case RegressionFamily::Kind::Linear:
      break;
    case RegressionFamily::Kind::Polynomial:
      h.set("family.degree", std::to_string(m.family.degree));
      break;
    case RegressionFamily::Kind::SplineRidge:
      h.set("family.n_knots", std::to_string(m.family.n_knots));
      h.set("family.spline_degree", std::to_string(m.family.spline_degree));
      h.set("family.lambda", binio::format_g17(m.family.lambda));
      h.set("family.knot_range_factor",
            binio::format_g17(m.family.knot_range_factor));
      break;
    case RegressionFamily::Kind::Mlp:
      h.set("family.layer_sizes", join_sizes(m.family.layer_sizes));
      break;
    case RegressionFamily::Kind::Conv1d:
      h.set("family.conv_layers", std::to_string(m.family.conv_layers));
      h.set("family.channels", std::to_string(m.family.channels));
      h.set("family.kernel_size", std::to_string(m.family.kernel_size));
      h.set("family.circular", m.family.circular ? "true" : "false");
      h.set("family.in_channels", std::to_string(m.family.in_channels));
      break;
  }
  h.set("model.input_dim", std::to_string(m.input_dim));
  h.set("model.output_dim", std::to_string(m.output_dim));
  h.set("model.fit_mse", binio::format_g17(m.fit_mse));
  h.set("model.jitter", binio::format_g17(m.jitter));
  h.set("model.epochs_run", std::to_string(m.epochs_run));
  h.set("model.theta_rows", std::to_string(m.theta.rows()));
  h.set("model.theta_cols", std::to_string(m.theta.cols()));
  h.set("model.n_knot_values", std::to_string(m.knots.size()));
  h.set("model.n_param_values", std::to_string(m.params.size()));
  const std::string header = h.canonical();

  std::string blob = "MZFM";
  binio::put_u16(blob, 1);
  binio::put_u64(blob, header.size());
  blob += header;
  binio::put_u64(blob,
                 std::uint64_t(m.theta.size() + m.knots.size() +
                               m.params.size()));
  for (Index i = 0; i < m.theta.rows(); ++i)
    for (Index j = 0; j < m.theta.cols(); ++j)
      binio::put_f64(blob, m.theta(i, j));
  for (Index i = 0; i < m.knots.size(); ++i) binio::put_f64(blob, m.knots[i]);
  for (Index i = 0; i < m.params.size(); ++i)
    binio::put_f64(blob, m.params[i]);
  binio::write_file(path, blob);
}

FittedModel load_model(const std::string& path) {
  binio::ByteReader r(binio::read_file(path));
  if (r.bytes(4) != "MZFM") throw std::runtime_error("not a model file");
  if (r.u16() != 1) throw std::runtime_error("unsupported model version");
  const Config h = Config::parse(r.bytes(std::size_t(r.u64())));

  FittedModel m;
  const std::string kind = h.get_str("family.kind");
  if (kind == "linear") {
    m.family = RegressionFamily::linear();
  } else if (kind == "polynomial") {
    m.family = RegressionFamily::polynomial(int(h.get_int("family.degree")));
  } else if (kind == "spline_ridge") {
    m.family = RegressionFamily::spline_ridge(
        int(h.get_int("family.n_knots")),
        int(h.get_int("family.spline_degree")),
        h.get_double("family.lambda"),
        h.get_double("family.knot_range_factor"));
  } else if (kind == "mlp") {
    m.family = RegressionFamily::mlp(parse_sizes(h.get_str("family.layer_sizes")));
  } else if (kind == "conv1d") {
    m.family = RegressionFamily::conv1d(
        int(h.get_int("family.conv_layers")), h.get_int("family.channels"),
        h.get_int("family.kernel_size"), h.get_bool("family.circular"),
        h.get_int("family.in_channels"));
  } else {
    throw std::runtime_error("unknown model family '" + kind + "'");
  }
  m.input_dim = h.get_int("model.input_dim");
  m.output_dim = h.get_int("model.output_dim");
  m.fit_mse = h.get_double("model.fit_mse");
  m.jitter = h.get_double("model.jitter");
  m.epochs_run = int(h.get_int("model.epochs_run"));
  const Index tr = h.get_int("model.theta_rows");
  const Index tc = h.get_int("model.theta_cols");
  const Index nk = h.get_int("model.n_knot_values");
  const Index np = h.get_int("model.n_param_values");
  const std::uint64_t count = r.u64();
  if (count != std::uint64_t(tr * tc + nk + np))
    throw std::runtime_error("model value count mismatch");
  m.theta.resize(tr, tc);
  for (Index i = 0; i < tr; ++i)
    for (Index j = 0; j < tc; ++j) m.theta(i, j) = r.f64();
  m.knots.resize(nk);
  for (Index i = 0; i < nk; ++i) m.knots[i] = r.f64();
  m.params.resize(np);
  for (Index i = 0; i < np; ++i) m.params[i] = r.f64();
  if (!r.at_end()) throw std::runtime_error("trailing bytes in model file");
  m.family.validate();
  return m;
}

}  // namespace mz

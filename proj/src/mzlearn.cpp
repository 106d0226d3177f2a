#include "mz/mzlearn.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

#include "mz/binio.hpp"
#include "mz/config.hpp"

namespace mz {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) {
  throw std::invalid_argument(msg);
}

// Both provenances reduce to R parallel series of length B: an ensemble is N
// trajectories of K snapshots, an ergodic matrix is its base series. Time
// block t stacks every series' snapshot t as rows.
Index block_count(const DataMatrix& d) {
  return d.is_ergodic() ? d.series_len() : d.k();
}

Index block_rows(const DataMatrix& d) {
  return d.is_ergodic() ? d.n_series() : d.n();
}

// Rows for time blocks [first, first+count), block-major: row t*R + i is
// series i at time first+t.
Mat stack_blocks(const DataMatrix& d, Index first, Index count) {
  const Index m = d.m();
  if (!d.is_ergodic()) {
    const Index r = d.n();
    Mat out(count * r, m);
    for (Index t = 0; t < count; ++t)
      out.middleRows(t * r, r) = d.slice(first + t);
    return out;
  }
  const auto& series = d.series();
  const Index r = Index(series.size());
  if (r == 1) return series[0].middleRows(first, count);
  Mat out(count * r, m);
  for (Index i = 0; i < r; ++i)
    for (Index t = 0; t < count; ++t)
      out.row(t * r + i) = series[std::size_t(i)].row(first + t);
  return out;
}

Index fit_offsets(Index b, Index h, PairingMode pairing) {
  return pairing == PairingMode::StationaryPooled ? b - h : 1;
}

// The per-order target recurrence. y starts as the next-snapshot targets and
// each advance subtracts the newest operator's contribution at shifted
// offsets, shrinking the valid range by one block. The fit range (top p_fit
// rows) stays inside the valid range through order h-1.
struct Recurrence {
  Index b = 0;
  Index r = 0;
  Index p_fit = 0;
  Index order = 0;
  Mat x_all;  // blocks 0..b-2 stacked
  Mat y;      // current targets, valid blocks 0..b-2-order

  Eigen::Block<const Mat> x_fit() const { return x_all.topRows(p_fit); }
  Eigen::Block<const Mat> y_fit() const { return y.topRows(p_fit); }
  Index valid_rows() const { return (b - 1 - order) * r; }

  void advance_with(const Mat& preds) {
    const Index q = b - 2 - order;
    for (Index t = 0; t < q; ++t)
      y.middleRows(t * r, r) =
          y.middleRows((t + 1) * r, r) - preds.middleRows(t * r, r);
    ++order;
  }

  void advance(const FittedModel& op) {
    const Index q = b - 2 - order;
    if (q <= 0) {
      ++order;
      return;
    }
    advance_with(predict_batch(op, x_all.middleRows(r, q * r)));
  }
};

Recurrence start_recurrence(const DataMatrix& d, Index h, PairingMode pairing,
                            Index target_dim) {
  Recurrence rec;
  rec.b = block_count(d);
  rec.r = block_rows(d);
  rec.p_fit = fit_offsets(rec.b, h, pairing) * rec.r;
  rec.x_all = stack_blocks(d, 0, rec.b - 1);
  rec.y = stack_blocks(d, 1, rec.b - 1).leftCols(target_dim);
  return rec;
}

void check_extraction_shape(const DataMatrix& d, Index h) {
  if (h < 1) fail_arg("memory order must be at least 1");
  if (h > d.k() - 1) fail_arg("memory order exceeds snapshot count minus 1");
}

void check_model_data(const MZModel& model, const DataMatrix& d) {
  if (model.h() < 1) fail_arg("model holds no operators");
  check_extraction_shape(d, model.h());
  if (d.m() != model.input_dim)
    fail_arg("data width does not match model input dimension");
}

double rms_of(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return std::sqrt(a.squaredNorm() / double(a.size()));
}

std::string order_file(const std::string& dir, const char* stem, Index n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04lld.bin", stem, (long long)(n));
  return dir + "/" + buf;
}

}  // namespace

PairingMode default_pairing(const DataMatrix& d) {
  return d.is_ergodic() ? PairingMode::StationaryPooled
                        : PairingMode::InitialTime;
}

std::string pairing_name(PairingMode mode) {
  return mode == PairingMode::InitialTime ? "initial_time"
                                          : "stationary_pooled";
}

PairingMode pairing_from_name(const std::string& name) {
  if (name == "initial_time") return PairingMode::InitialTime;
  if (name == "stationary_pooled") return PairingMode::StationaryPooled;
  fail_arg("unknown pairing mode: " + name);
}

std::vector<double> MZModel::fit_mse() const {
  std::vector<double> out;
  out.reserve(operators.size());
  for (const auto& op : operators) out.push_back(op.fit_mse);
  return out;
}

MZModel extract_operators(const DataMatrix& d, const RegressionFamily& family,
                          Index h, PairingMode pairing, std::uint64_t seed,
                          Index target_dim) {
  family.validate();
  check_extraction_shape(d, h);
  const Index m = d.m();
  if (target_dim < 0 || target_dim > m)
    fail_arg("target dimension out of range");
  const Index mt = target_dim == 0 ? m : target_dim;

  Recurrence rec = start_recurrence(d, h, pairing, mt);
  MZModel model;
  model.family = family;
  model.pairing = pairing;
  model.base_seed = seed;
  model.input_dim = m;
  model.output_dim = mt;
  model.delta = d.delta();
  model.observable_names = d.observable_names();
  model.operators.reserve(std::size_t(h));

  const Mat x_fit = rec.x_fit();
  std::unique_ptr<ClosedFormSolver> solver;
  Mat phi_all;
  if (family.closed_form()) {
    solver = std::make_unique<ClosedFormSolver>(family, x_fit);
    phi_all = solver->features_of(rec.x_all);
  }

  for (Index n = 0; n < h; ++n) {
    FittedModel op =
        solver ? solver->solve(rec.y_fit())
               : fit(family, x_fit, rec.y_fit(), seed + std::uint64_t(n));
    if (n + 1 < h) {
      if (solver) {
        const Index q = rec.b - 2 - n;
        rec.advance_with(phi_all.middleRows(rec.r, q * rec.r) *
                         op.theta.transpose());
      } else {
        rec.advance(op);
      }
      if (n < kStoredResidualOrders)
        model.residual_samples.emplace_back(rec.y_fit());
    }
    model.operators.push_back(std::move(op));
  }
  return model;
}

MZModel extract_operators(const DataMatrix& d, const RegressionFamily& family,
                          Index h, std::uint64_t seed) {
  return extract_operators(d, family, h, default_pairing(d), seed);
}

CorrelationSet compute_correlations(const DataMatrix& d, Index max_lag,
                                    PairingMode pairing) {
  if (max_lag < 0) fail_arg("lag must be nonnegative");
  const Index b = block_count(d);
  if (max_lag > b - 1) fail_arg("lag exceeds available snapshots");
  const Index r = block_rows(d);
  const Index cnt = fit_offsets(b, max_lag, pairing) * r;
  const Mat x_full = stack_blocks(d, 0, b);
  const Mat base = x_full.topRows(cnt);
  CorrelationSet cs;
  cs.c.reserve(std::size_t(max_lag) + 1);
  for (Index k = 0; k <= max_lag; ++k)
    cs.c.push_back(x_full.middleRows(k * r, cnt).transpose() * base /
                   double(cnt));
  return cs;
}

std::vector<Mat> mori_closed_form(const DataMatrix& d, Index h,
                                  PairingMode pairing) {
  check_extraction_shape(d, h);
  const CorrelationSet cs = compute_correlations(d, h, pairing);
  const Index m = d.m();

  Mat c0 = cs.c[0];
  Eigen::LDLT<Mat> ldlt(c0);
  const Vec pivots = ldlt.vectorD().cwiseAbs();
  const double eps = std::numeric_limits<double>::epsilon();
  const bool deficient =
      ldlt.info() != Eigen::Success ||
      pivots.minCoeff() <= pivots.maxCoeff() * double(m) * eps * 8.0;
  if (deficient) {
    const double jitter = std::max(1e-10 * c0.trace() / double(m), 1e-30);
    c0.diagonal().array() += jitter;
    ldlt.compute(c0);
    std::fprintf(stderr,
                 "mori: rank-deficient zero-lag correlation, ridge jitter "
                 "%.3e applied\n",
                 jitter);
  }

  std::vector<Mat> ops;
  ops.reserve(std::size_t(h));
  for (Index n = 0; n < h; ++n) {
    Mat rhs = cs.c[std::size_t(n) + 1];
    for (Index l = 0; l < n; ++l)
      rhs -= ops[std::size_t(l)] * cs.c[std::size_t(n - l)];
    Mat sol = ldlt.solve(rhs.transpose()).transpose();
    if (!sol.allFinite())
      throw std::runtime_error("correlation equations remain singular");
    ops.push_back(std::move(sol));
  }
  return ops;
}

std::vector<Mat> mori_closed_form(const DataMatrix& d, Index h) {
  return mori_closed_form(d, h, default_pairing(d));
}

Mat residual_targets(const MZModel& model, const DataMatrix& d, Index order) {
  check_model_data(model, d);
  if (order < 1 || order > model.h())
    fail_arg("residual order out of range");
  Recurrence rec =
      start_recurrence(d, model.h(), model.pairing, model.output_dim);
  for (Index n = 0; n < order; ++n) rec.advance(model.operators[std::size_t(n)]);
  return rec.y.topRows(std::min(rec.p_fit, rec.valid_rows()));
}

GfdReport gfd_check(const MZModel& model, const DataMatrix& d) {
  check_model_data(model, d);
  const Index h = model.h();
  Recurrence rec =
      start_recurrence(d, h, model.pairing, model.output_dim);
  const Mat x_fit = rec.x_fit();

  std::unique_ptr<ClosedFormSolver> solver;
  if (model.family.closed_form())
    solver = std::make_unique<ClosedFormSolver>(model.family, x_fit);
  const auto refit = [&](const Mat& y, Index n) {
    return solver ? solver->solve(y)
                  : fit(model.family, x_fit, y,
                        model.base_seed + std::uint64_t(n));
  };

  GfdReport rep;
  rep.projection_rms.resize(h);
  rep.replay_rms.resize(h);
  for (Index n = 0; n < h; ++n) {
    const auto& op = model.operators[std::size_t(n)];
    const Mat y_fit = rec.y_fit();
    const Mat op_preds = predict_batch(op, x_fit);
    rep.replay_rms[n] = rms_of(predict_batch(refit(y_fit, n), x_fit) - op_preds);
    rep.projection_rms[n] =
        rms_of(predict_batch(refit(y_fit - op_preds, n), x_fit));
    if (n + 1 < h) rec.advance(op);
  }
  return rep;
}

Vec memory_norm_profile(const MZModel& model, const DataMatrix& d_test,
                        Index component) {
  if (model.h() < 1) fail_arg("model holds no operators");
  if (d_test.m() != model.input_dim)
    fail_arg("data width does not match model input dimension");
  if (component >= model.output_dim)
    fail_arg("component index out of range");
  const Index h = model.h();
  Vec profile = Vec::Zero(std::max<Index>(h - 1, 0));
  if (h <= 1) return profile;
  const Mat x = stack_blocks(d_test, 0, block_count(d_test));
  for (Index l = 1; l < h; ++l) {
    const Mat p = predict_batch(model.operators[std::size_t(l)], x);
    profile[l - 1] = component >= 0
                         ? p.col(component).squaredNorm() / double(p.rows())
                         : p.rowwise().squaredNorm().mean();
  }
  return profile;
}

Index select_memory_length(const Vec& profile, double threshold) {
  if (profile.size() == 0) fail_arg("profile is empty");
  Index h = profile.size();
  for (Index j = profile.size() - 1; j >= 0; --j) {
    if (profile[j] < threshold)
      h = j;
    else
      break;
  }
  return h;
}

void save_mz_model(const MZModel& model, const std::string& dir) {
  if (model.h() < 1) fail_arg("model holds no operators");
  std::filesystem::create_directories(dir);

  Config manifest;
  manifest.set("model.format", "mzmodel-v1");
  manifest.set("model.family", model.family.kind_name());
  manifest.set("model.h", std::to_string(model.h()));
  manifest.set("model.pairing", pairing_name(model.pairing));
  manifest.set("model.base_seed", std::to_string(model.base_seed));
  manifest.set("model.input_dim", std::to_string(model.input_dim));
  manifest.set("model.output_dim", std::to_string(model.output_dim));
  manifest.set("model.delta", binio::format_g17(model.delta));
  manifest.set("model.stored_residuals",
               std::to_string(model.residual_samples.size()));
  manifest.set("model.n_observables",
               std::to_string(model.observable_names.size()));
  for (std::size_t j = 0; j < model.observable_names.size(); ++j)
    manifest.set("model.observable_" + std::to_string(j),
                 model.observable_names[j]);
  const auto mse = model.fit_mse();
  for (std::size_t n = 0; n < mse.size(); ++n)
    manifest.set("model.fit_mse_" + std::to_string(n),
                 binio::format_g17(mse[n]));
  binio::write_file(dir + "/manifest.txt", manifest.canonical());

  for (Index n = 0; n < model.h(); ++n)
    save_model(model.operators[std::size_t(n)], order_file(dir, "op", n));

  for (std::size_t n = 0; n < model.residual_samples.size(); ++n) {
    const Mat& w = model.residual_samples[n];
    std::string blob = "MZRS";
    binio::put_u16(blob, 1);
    binio::put_u64(blob, std::uint64_t(w.rows()));
    binio::put_u64(blob, std::uint64_t(w.cols()));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) binio::put_f64(blob, w(i, j));
    binio::write_file(order_file(dir, "res", Index(n)), blob);
  }
}

MZModel load_mz_model(const std::string& dir) {
  const Config manifest = Config::load(dir + "/manifest.txt");
  if (manifest.get_str("model.format") != "mzmodel-v1")
    throw std::runtime_error("unrecognized model directory format");

  MZModel model;
  const Index h = Index(manifest.get_int("model.h"));
  if (h < 1) throw std::runtime_error("model directory holds no operators");
  model.pairing = pairing_from_name(manifest.get_str("model.pairing"));
  model.base_seed = std::uint64_t(manifest.get_int("model.base_seed"));
  model.input_dim = Index(manifest.get_int("model.input_dim"));
  model.output_dim = Index(manifest.get_int("model.output_dim"));
  model.delta = manifest.get_double("model.delta");
  const Index n_obs = Index(manifest.get_int("model.n_observables"));
  for (Index j = 0; j < n_obs; ++j)
    model.observable_names.push_back(
        manifest.get_str("model.observable_" + std::to_string(j)));

  model.operators.reserve(std::size_t(h));
  for (Index n = 0; n < h; ++n) {
    FittedModel op = load_model(order_file(dir, "op", n));
    if (op.input_dim != model.input_dim || op.output_dim != model.output_dim)
      throw std::runtime_error("operator dimensions disagree with manifest");
    model.operators.push_back(std::move(op));
  }
  model.family = model.operators[0].family;
  for (const auto& op : model.operators)
    if (op.family.kind != model.family.kind)
      throw std::runtime_error("operator families disagree");

  const Index n_res = Index(manifest.get_int("model.stored_residuals"));
  for (Index n = 0; n < n_res; ++n) {
    binio::ByteReader rd(binio::read_file(order_file(dir, "res", n)));
    if (rd.bytes(4) != "MZRS")
      throw std::runtime_error("bad residual file magic");
    if (rd.u16() != 1)
      throw std::runtime_error("unsupported residual file version");
    const Index rows = Index(rd.u64()), cols = Index(rd.u64());
    Mat w(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) w(i, j) = rd.f64();
    if (!rd.at_end())
      throw std::runtime_error("trailing bytes in residual file");
    model.residual_samples.push_back(std::move(w));
  }
  return model;
}

}  // namespace mz

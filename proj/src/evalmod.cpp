#include "mz/evalmod.hpp"

#include "mz/binio.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mz {

namespace {

void check_batches(const std::vector<Mat>& pred,
                   const std::vector<Mat>& truth) {
  if (pred.empty() || truth.empty())
    throw std::invalid_argument("eval: empty rollout batch");
  if (pred.size() != truth.size())
    throw std::invalid_argument("eval: rollout batch sizes differ");
  const Index steps = pred.front().rows();
  const Index m = pred.front().cols();
  if (steps < 1 || m < 1)
    throw std::invalid_argument("eval: empty rollout");
  for (std::size_t b = 0; b < pred.size(); ++b) {
    if (pred[b].rows() != steps || pred[b].cols() != m ||
        truth[b].rows() != steps || truth[b].cols() != m)
      throw std::invalid_argument("eval: rollout shape mismatch");
  }
}

// Bin index on [lo, hi) with the top edge clamped into the last bin.
Index bin_of(double x, double lo, double hi, Index n_bins) {
  const Index raw = Index(std::floor((x - lo) / (hi - lo) * double(n_bins)));
  return std::min(std::max(raw, Index(0)), n_bins - 1);
}

// Widens a degenerate range so every sample still lands in a valid bin.
void widen_if_degenerate(double& lo, double& hi) {
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
}

Vec bin_mass(const Vec& samples, double lo, double hi, Index n_bins) {
  Vec mass = Vec::Zero(n_bins);
  for (Index i = 0; i < samples.size(); ++i)
    mass[bin_of(samples[i], lo, hi, n_bins)] += 1.0;
  return mass / double(samples.size());
}

}  // namespace

Mat per_rollout_mse(const std::vector<Mat>& pred_batches,
                    const std::vector<Mat>& truth_batches) {
  check_batches(pred_batches, truth_batches);
  const Index steps = pred_batches.front().rows();
  const Index m = pred_batches.front().cols();
  Mat out(Index(pred_batches.size()), steps);
  for (std::size_t b = 0; b < pred_batches.size(); ++b)
    out.row(Index(b)) = (pred_batches[b] - truth_batches[b])
                            .rowwise()
                            .squaredNorm()
                            .transpose() /
                        double(m);
  return out;
}

Vec mse_vs_horizon(const std::vector<Mat>& pred_batches,
                   const std::vector<Mat>& truth_batches) {
  return per_rollout_mse(pred_batches, truth_batches)
      .colwise()
      .mean()
      .transpose();
}

double kl_divergence(const Vec& samples_true, const Vec& samples_model,
                     Index n_bins, double smoothing) {
  if (samples_true.size() == 0 || samples_model.size() == 0)
    throw std::invalid_argument("kl: empty sample set");
  if (n_bins < 1) throw std::invalid_argument("kl: need at least one bin");
  if (smoothing < 0.0)
    throw std::invalid_argument("kl: smoothing must be nonnegative");
  if (!samples_true.allFinite() || !samples_model.allFinite())
    throw std::invalid_argument("kl: samples must be finite");

  double lo = std::min(samples_true.minCoeff(), samples_model.minCoeff());
  double hi = std::max(samples_true.maxCoeff(), samples_model.maxCoeff());
  widen_if_degenerate(lo, hi);

  const double norm = 1.0 + double(n_bins) * smoothing;
  const Vec p = (bin_mass(samples_true, lo, hi, n_bins).array() + smoothing) /
                norm;
  const Vec q = (bin_mass(samples_model, lo, hi, n_bins).array() + smoothing) /
                norm;
  double kl = 0.0;
  for (Index k = 0; k < n_bins; ++k)
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / q[k]);
  return kl;
}

Vec kl_vs_horizon(const std::vector<Mat>& pred_batches,
                  const std::vector<Mat>& truth_batches, Index n_bins,
                  double smoothing) {
  check_batches(pred_batches, truth_batches);
  const Index steps = pred_batches.front().rows();
  const Index m = pred_batches.front().cols();
  const Index count = Index(pred_batches.size()) * m;
  Vec out(steps);
  Vec st(count), sm(count);
  for (Index s = 0; s < steps; ++s) {
    for (std::size_t b = 0; b < pred_batches.size(); ++b) {
      st.segment(Index(b) * m, m) = truth_batches[b].row(s).transpose();
      sm.segment(Index(b) * m, m) = pred_batches[b].row(s).transpose();
    }
    out[s] = kl_divergence(st, sm, n_bins, smoothing);
  }
  return out;
}

Vec power_spectrum(const Mat& snapshots) {
  if (snapshots.rows() < 1 || snapshots.cols() < 2)
    throw std::invalid_argument("spectrum: need fields of width at least 2");
  if (!snapshots.allFinite())
    throw std::invalid_argument("spectrum: fields must be finite");
  const Index n = snapshots.cols();
  const Index half = n / 2 + 1;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> field(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> coef;

  Vec power = Vec::Zero(half);
  for (Index b = 0; b < snapshots.rows(); ++b) {
    for (Index x = 0; x < n; ++x) field[std::size_t(x)] = snapshots(b, x);
    fft.fwd(coef, field);
    for (Index k = 0; k < half; ++k) {
      const double weight = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
      power[k] += weight * std::norm(coef[std::size_t(k)]);
    }
  }
  return power / double(snapshots.rows());
}

Histogram long_time_histogram(const Mat& rollout, Index n_bins) {
  if (n_bins < 1)
    throw std::invalid_argument("histogram: need at least one bin");
  if (rollout.rows() < n_bins || rollout.cols() < 1)
    throw std::invalid_argument(
        "histogram: rollout shorter than the bin count");
  if (!rollout.allFinite())
    throw std::invalid_argument("histogram: rollout must be finite");

  const Vec samples =
      Eigen::Map<const Vec>(rollout.data(), rollout.size());
  double lo = samples.minCoeff();
  double hi = samples.maxCoeff();
  widen_if_degenerate(lo, hi);

  Histogram h;
  h.edges = Vec::LinSpaced(n_bins + 1, lo, hi);
  h.mass = bin_mass(samples, lo, hi, n_bins);
  h.density = h.mass * double(n_bins) / (hi - lo);
  return h;
}

namespace {

void write_series_csv(const std::filesystem::path& path,
                      const std::string& header, const Vec& values,
                      Index first_index) {
  std::string text = header + "\n";
  for (Index i = 0; i < values.size(); ++i)
    text += std::to_string(static_cast<long long>(first_index + i)) + "," +
            binio::format_g17(values[i]) + "\n";
  binio::write_file(path.string(), text);
}

void write_hist_csv(const std::filesystem::path& path, const Histogram& h) {
  std::string text = "bin_center,mass,density\n";
  for (Index i = 0; i < h.bins(); ++i)
    text += binio::format_g17(0.5 * (h.edges[i] + h.edges[i + 1])) + "," +
            binio::format_g17(h.mass[i]) + "," +
            binio::format_g17(h.density[i]) + "\n";
  binio::write_file(path.string(), text);
}

}  // namespace

void write_eval_report(const std::string& dir, const std::string& tag,
                       const EvalReport& report) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  const auto file = [&](const char* suffix) {
    return base / (tag + suffix);
  };

  if (report.mse.size() > 0)
    write_series_csv(file("_mse.csv"), "step,mse", report.mse, 1);
  if (report.kl.size() > 0)
    write_series_csv(file("_kl.csv"), "step,kl", report.kl, 1);
  if (report.spectrum.size() > 0)
    write_series_csv(file("_spectrum.csv"), "wavenumber,power",
                     report.spectrum, 0);
  if (report.rollout_mse.size() > 0) {
    std::string text = "rollout,step,mse\n";
    for (Index b = 0; b < report.rollout_mse.rows(); ++b)
      for (Index s = 0; s < report.rollout_mse.cols(); ++s)
        text += std::to_string(static_cast<long long>(b)) + "," +
                std::to_string(static_cast<long long>(s + 1)) + "," +
                binio::format_g17(report.rollout_mse(b, s)) + "\n";
    binio::write_file(file("_rollout_mse.csv").string(), text);
  }
  if (report.hist_truth.bins() > 0)
    write_hist_csv(file("_hist_truth.csv"), report.hist_truth);
  if (report.hist_model.bins() > 0)
    write_hist_csv(file("_hist_model.csv"), report.hist_model);

  std::string summary = "tag: " + tag + "\n";
  if (!report.config_echo.empty())
    summary += "config:\n" + report.config_echo +
               (report.config_echo.back() == '\n' ? "" : "\n");
  if (report.mse.size() > 0)
    summary += "horizon_steps: " + std::to_string(report.mse.size()) +
               "\nfinal_mse: " + binio::format_g17(report.mse.tail(1)[0]) +
               "\n";
  if (report.kl.size() > 0)
    summary += "final_kl: " + binio::format_g17(report.kl.tail(1)[0]) + "\n";
  if (std::isfinite(report.long_rollout_kl))
    summary += "long_rollout_kl: " + binio::format_g17(report.long_rollout_kl) +
               "\n";
  if (report.spectrum.size() > 0)
    summary += "spectrum_bins: " + std::to_string(report.spectrum.size()) +
               "\n";
  if (report.hist_truth.bins() > 0)
    summary +=
        "hist_bins: " + std::to_string(report.hist_truth.bins()) + "\n";
  binio::write_file(file("_summary.txt").string(), summary);
}

}  // namespace mz

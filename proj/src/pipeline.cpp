#include "mz/pipeline.hpp"

#include "mz/binio.hpp"
#include "mz/dynamics.hpp"
#include "mz/presets.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace mz {

namespace {

std::string tag_key(const std::string& tag, const char* leaf) {
  return "model." + tag + "." + leaf;
}

void require_tag(const Config& cfg, const std::string& tag) {
  for (const std::string& t : config_tags(cfg))
    if (t == tag) return;
  throw std::invalid_argument("unknown model tag: " + tag);
}

SystemSpec system_of(const Config& cfg) {
  const std::string kind = cfg.get_str("system.kind");
  if (kind == "toy_logistic") return SystemSpec::toy_logistic();
  if (kind == "van_der_pol")
    return SystemSpec::van_der_pol(cfg.get_double("system.mu"));
  if (kind == "lorenz63")
    return SystemSpec::lorenz63(cfg.get_double("system.sigma"),
                                cfg.get_double("system.rho"),
                                cfg.get_double("system.beta"));
  if (kind == "ks")
    return SystemSpec::kuramoto_sivashinsky(cfg.get_double("system.length"),
                                            cfg.get_int("system.n_grid"));
  throw std::runtime_error("unknown system.kind: " + kind);
}

Vec parse_state(const std::string& text, Index dim) {
  std::istringstream in(text);
  std::vector<double> vals;
  double v = 0.0;
  while (in >> v) vals.push_back(v);
  if (Index(vals.size()) != dim)
    throw std::runtime_error("initial state needs " + std::to_string(dim) +
                             " components, got " +
                             std::to_string(vals.size()));
  return Eigen::Map<const Vec>(vals.data(), dim);
}

// Smooth single-mode starting fields for the spectral PDE.
Vec ks_profile(const SystemSpec& spec, bool sin_first) {
  Vec u(spec.n_grid);
  for (Index j = 0; j < spec.n_grid; ++j) {
    const double t = 2.0 * M_PI * double(j) / double(spec.n_grid);
    u[j] = sin_first ? std::sin(t) * (1.0 + std::cos(t))
                     : std::cos(t) * (1.0 + std::sin(t));
  }
  return u;
}

InitialDistribution init_of(const Config& cfg, const SystemSpec& spec,
                            bool test) {
  const std::string role = test ? "test" : "train";
  const std::string kind = cfg.get_str("generate.init_" + role);
  if (kind == "shifted_beta")
    return InitialDistribution::shifted_beta(
        cfg.get_double("generate.init_shift"));
  if (kind == "limit_cycle") {
    Vec x0(2);
    x0 << 2.0, 0.0;
    auto cycle = std::make_shared<const LimitCycle>(compute_limit_cycle(
        spec, x0, 100.0, cfg.get_double("generate.inner_dt")));
    return InitialDistribution::limit_cycle(cycle);
  }
  if (kind == "fixed")
    return InitialDistribution::fixed_state(parse_state(
        cfg.get_str("generate.init_" + role + "_state"), spec.dim()));
  if (kind == "ks_cos_sin")
    return InitialDistribution::fixed_state(ks_profile(spec, false));
  if (kind == "ks_sin_cos")
    return InitialDistribution::fixed_state(ks_profile(spec, true));
  throw std::runtime_error("unknown generate.init_" + role + ": " + kind);
}

ObservableDict base_dict(const SystemSpec& spec) {
  std::vector<Index> idx;
  if (spec.kind == SystemKind::KuramotoSivashinsky)
    for (Index j = 0; j < spec.n_grid; ++j) idx.push_back(j);
  else
    idx.push_back(0);
  return ObservableDict::raw_components(idx);
}

std::vector<Index> parse_index_list(const std::string& text) {
  std::string spaced = text;
  for (char& c : spaced)
    if (c == ',') c = ' ';
  std::istringstream in(spaced);
  std::vector<Index> out;
  long long v = 0;
  while (in >> v) out.push_back(Index(v));
  return out;
}

DataMatrix apply_dict(const DataMatrix& d, const ObservableDict& dict) {
  if (d.is_ergodic()) {
    if (d.n_series() != 1)
      throw std::runtime_error(
          "dictionary expansion expects a single base series");
    const Mat& s = d.series()[0];
    std::vector<Vec> snaps(std::size_t(s.rows()));
    for (Index r = 0; r < s.rows(); ++r)
      snaps[std::size_t(r)] = s.row(r).transpose();
    return build_data_matrix_ergodic(snaps, dict, d.delta(), d.k());
  }
  std::vector<std::vector<Vec>> trajs(std::size_t(d.n()));
  for (Index k = 0; k < d.k(); ++k) {
    const Mat slice = d.slice(k);
    for (Index i = 0; i < d.n(); ++i)
      trajs[std::size_t(i)].push_back(slice.row(i).transpose());
  }
  return build_data_matrix(trajs, dict, d.delta());
}

// Per-trajectory series of an ensemble matrix, one row per snapshot.
Mat ensemble_trajectory(const std::vector<Mat>& slices, Index i) {
  Mat t(Index(slices.size()), slices.front().cols());
  for (std::size_t k = 0; k < slices.size(); ++k)
    t.row(Index(k)) = slices[k].row(i);
  return t;
}

// Compared column block of rollout values and truth rows: a single column
// when compare_col is set, the model's predicted block otherwise.
void compare_block(const Config& cfg, const std::string& tag,
                   const MZModel& model, Index& col0, Index& n_cols) {
  const long long compare = cfg.get_int(tag_key(tag, "compare_col"));
  if (compare >= 0) {
    if (compare >= model.output_dim)
      throw std::runtime_error("compare_col exceeds model output width");
    col0 = Index(compare);
    n_cols = 1;
  } else {
    col0 = 0;
    n_cols = model.output_dim;
  }
}

Vec flatten(const Mat& m) {
  return Eigen::Map<const Vec>(m.data(), m.size());
}

std::string role_path(const std::string& dir, const char* role) {
  return (fs::path(dir) / (std::string(role) + ".dm")).string();
}

void write_series_table(const std::string& path, const std::string& header,
                        const Vec& values, Index first_index) {
  std::string text = header + "\n";
  for (Index i = 0; i < values.size(); ++i)
    text += std::to_string(static_cast<long long>(first_index + i)) + "," +
            binio::format_g17(values[i]) + "\n";
  binio::write_file(path, text);
}

}  // namespace

PredictionResult run_tag_rollout(const MZModel& model, const Mat& history,
                                 const PredictionConfig& pc) {
  if (pc.mode == PredictionConfig::Mode::LinearWithMemory) {
    std::vector<Mat> kappas;
    for (const FittedModel& op : model.operators) kappas.push_back(op.theta);
    return rollout_linear(kappas, history, pc);
  }
  return rollout_model(model, history, pc);
}

DataMatrix generate_role(const Config& cfg, bool test) {
  validate_experiment_config(cfg);
  const SystemSpec spec = system_of(cfg);
  spec.validate();
  const std::string role = test ? "test" : "train";

  TrajectoryConfig tc;
  tc.delta = cfg.get_double("generate.delta_time");
  tc.inner_dt = cfg.get_double("generate.inner_dt");
  tc.burn_in = cfg.get_double("generate.burn_in_time_" + role);
  tc.n_snapshots = cfg.get_int("generate.n_snapshots_" + role);
  tc.seed = std::uint64_t(cfg.get_int("experiment.seed")) + (test ? 1 : 0);
  tc.validate();

  const InitialDistribution dist = init_of(cfg, spec, test);
  const ObservableDict dict = base_dict(spec);
  const std::string prov = cfg.get_str("generate.provenance");
  if (prov == "ensemble") {
    const Index n = cfg.get_int("generate.n_trajectories_" + role);
    std::vector<Vec> ics = sample_initial(dist, n, tc.seed);
    std::vector<std::vector<Vec>> trajs;
    trajs.reserve(ics.size());
    for (const Vec& ic : ics) trajs.push_back(simulate(spec, tc, ic));
    return build_data_matrix(trajs, dict, tc.delta);
  }
  if (prov != "ergodic")
    throw std::runtime_error("unknown generate.provenance: " + prov);
  if (dist.kind != InitialDistribution::Kind::Fixed)
    throw std::runtime_error("ergodic generation needs a fixed initial state");
  std::vector<Vec> snaps = simulate(spec, tc, dist.fixed);
  return build_data_matrix_ergodic(snaps, dict, tc.delta,
                                   cfg.get_int("generate.window_len"));
}

DataMatrix tag_matrix(const Config& cfg, const DataMatrix& base,
                      const std::string& tag, bool augmented) {
  require_tag(cfg, tag);
  const std::string dict_kind = cfg.get_str(tag_key(tag, "dict"));
  DataMatrix d = base;
  if (dict_kind == "monomials") {
    d = apply_dict(
        d, ObservableDict::monomials(int(cfg.get_int(tag_key(tag, "degree")))));
  } else if (dict_kind != "raw") {
    throw std::runtime_error("unknown tag dict: " + dict_kind);
  }
  const Index factor = cfg.get_int(tag_key(tag, "coarse_factor"));
  if (factor > 1) d = coarsen_ks(d, factor, 0);
  if (augmented && cfg.get_bool(tag_key(tag, "augment_shift")))
    d = augment(d, AugmentationSpec{true, false});
  const Index embed = cfg.get_int(tag_key(tag, "delay_embed"));
  if (embed > 1) d = delay_embed(d, embed);
  return d;
}

RegressionFamily tag_family(const Config& cfg, const std::string& tag,
                            const DataMatrix& transformed) {
  require_tag(cfg, tag);
  const std::string name = cfg.get_str(tag_key(tag, "family"));
  const long long target = cfg.get_int(tag_key(tag, "target_dim"));
  const Index out = target > 0 ? Index(target) : transformed.m();

  RegressionFamily f;
  if (name == "linear") {
    f = RegressionFamily::linear();
  } else if (name == "polynomial") {
    f = RegressionFamily::polynomial(int(cfg.get_int(tag_key(tag, "degree"))));
  } else if (name == "spline") {
    f = RegressionFamily::spline_ridge();
  } else if (name == "mlp") {
    std::vector<Index> sizes{transformed.m()};
    for (Index h : parse_index_list(cfg.get_str(tag_key(tag, "layers"))))
      sizes.push_back(h);
    sizes.push_back(out);
    f = RegressionFamily::mlp(sizes);
  } else if (name == "conv1d") {
    f = RegressionFamily::conv1d(
        2, 5, 11, true, cfg.get_int(tag_key(tag, "delay_embed")));
  } else {
    throw std::runtime_error("unknown tag family: " + name);
  }
  f.trainer.epochs = int(cfg.get_int(tag_key(tag, "epochs")));
  f.validate();
  return f;
}

MZModel learn_tag(const Config& cfg, const DataMatrix& train_base,
                  const std::string& tag) {
  const DataMatrix td = tag_matrix(cfg, train_base, tag, true);
  const RegressionFamily family = tag_family(cfg, tag, td);
  const Index h = cfg.get_int(tag_key(tag, "h"));
  const Index target = cfg.get_int(tag_key(tag, "target_dim"));
  const std::uint64_t seed =
      std::uint64_t(cfg.get_int("experiment.seed")) + 1000;
  return extract_operators(td, family, h, default_pairing(td), seed, target);
}

PredictionConfig tag_prediction_config(const Config& cfg, const MZModel& model,
                                       bool markov_only, Index horizon) {
  const bool square_linear =
      model.family.kind == RegressionFamily::Kind::Linear &&
      model.output_dim == model.input_dim;
  PredictionConfig pc;
  pc.mode = markov_only ? PredictionConfig::Mode::MarkovOnly
            : square_linear ? PredictionConfig::Mode::LinearWithMemory
                            : PredictionConfig::Mode::NonlinearWithMemory;
  pc.horizon = horizon;
  pc.history_length = model.h();
  pc.seed = std::uint64_t(cfg.get_int("experiment.seed")) + 2000;
  return pc;
}

PredictionResult predict_tag(const Config& cfg, const MZModel& model,
                             const DataMatrix& test_base,
                             const std::string& tag, bool markov_only) {
  const DataMatrix td = tag_matrix(cfg, test_base, tag, false);
  const Index hist_rows = cfg.get_int("predict.history_rows");
  const Index start = cfg.get_int("predict.start_index");
  const Index horizon = cfg.get_int("predict.horizon");

  Mat series;
  if (td.is_ergodic()) {
    series = td.series()[0];
  } else {
    std::vector<Mat> slices;
    for (Index k = 0; k < td.k(); ++k) slices.push_back(td.slice(k));
    series = ensemble_trajectory(slices, 0);
  }
  if (start < 1 || start > series.rows())
    throw std::runtime_error("predict.start_index outside the test series");
  const Index take = std::min(hist_rows, start);
  const Mat history = series.middleRows(start - take, take);
  const PredictionConfig pc =
      tag_prediction_config(cfg, model, markov_only, horizon);
  return run_tag_rollout(model, history, pc);
}

EvalOutcome evaluate_tag(const Config& cfg, const MZModel& model,
                         const DataMatrix& test_base, const std::string& tag) {
  const DataMatrix td = tag_matrix(cfg, test_base, tag, false);
  const Index horizon = cfg.get_int("evaluate.horizon");
  const Index n_bins = cfg.get_int("evaluate.n_bins");
  const double smoothing = cfg.get_double("evaluate.smoothing");
  const Index hist_rows = cfg.get_int("predict.history_rows");
  Index col0 = 0, n_cols = 0;
  compare_block(cfg, tag, model, col0, n_cols);
  const PredictionConfig pc =
      tag_prediction_config(cfg, model, false, horizon);

  EvalOutcome out;
  std::vector<Mat> preds, truths;
  const auto add_rollout = [&](const Mat& series, Index start) {
    if (start + horizon > series.rows())
      throw std::runtime_error("evaluation window exceeds the test series");
    const Index take = std::min(hist_rows, start);
    const PredictionResult res =
        run_tag_rollout(model, series.middleRows(start - take, take), pc);
    if (res.diverged()) {
      ++out.diverged;
      return;
    }
    preds.push_back(res.values.middleCols(col0, n_cols));
    truths.push_back(
        series.middleRows(start, horizon).middleCols(col0, n_cols));
  };

  if (td.is_ergodic()) {
    const Mat& s = td.series()[0];
    const Index start0 = cfg.get_int("evaluate.start_index");
    const Index stride = cfg.get_int("evaluate.stride");
    const Index n_roll = cfg.get_int("evaluate.n_rollouts");
    for (Index r = 0; r < n_roll; ++r) add_rollout(s, start0 + r * stride);
  } else {
    std::vector<Mat> slices;
    for (Index k = 0; k < td.k(); ++k) slices.push_back(td.slice(k));
    const Index n_roll =
        std::min<Index>(cfg.get_int("evaluate.n_rollouts"), td.n());
    const Index start = cfg.get_int("predict.start_index");
    for (Index i = 0; i < n_roll; ++i)
      add_rollout(ensemble_trajectory(slices, i), start);
  }

  if (!preds.empty()) {
    out.report.mse = mse_vs_horizon(preds, truths);
    out.report.rollout_mse = per_rollout_mse(preds, truths);
    out.report.kl = kl_vs_horizon(preds, truths, n_bins, smoothing);
  }

  const Index long_steps = cfg.get_int_or("evaluate.long_rollout_steps", 0);
  if (long_steps > 0) {
    if (!td.is_ergodic())
      throw std::runtime_error("long rollouts need ergodic test data");
    const Mat& s = td.series()[0];
    const Index lstart = cfg.get_int("evaluate.long_start");
    if (lstart < 1 || lstart > s.rows())
      throw std::runtime_error("evaluate.long_start outside the test series");
    const Index take = std::min(hist_rows, lstart);
    PredictionConfig lpc = pc;
    lpc.horizon = long_steps;
    const PredictionResult res =
        run_tag_rollout(model, s.middleRows(lstart - take, take), lpc);
    if (res.diverged()) {
      ++out.diverged;
    } else {
      const Mat roll = res.values.middleCols(col0, n_cols);
      const Mat truth_all = s.middleCols(col0, n_cols);
      out.report.hist_model = long_time_histogram(roll, n_bins);
      out.report.hist_truth = long_time_histogram(truth_all, n_bins);
      out.report.long_rollout_kl =
          kl_divergence(flatten(truth_all), flatten(roll), n_bins, smoothing);
      if (cfg.get_bool("evaluate.spectrum")) {
        out.report.spectrum = power_spectrum(roll);
        out.truth_spectrum = power_spectrum(truth_all);
      }
    }
  }

  out.report.config_echo = "preset = " + cfg.get_str("experiment.preset") +
                           "\nscale = " + cfg.get_str("experiment.scale") +
                           "\nseed = " +
                           std::to_string(cfg.get_int("experiment.seed")) +
                           "\ntag = " + tag + "\n";
  return out;
}

int cmd_generate(const Config& cfg, const std::string& out_dir) {
  validate_experiment_config(cfg);
  fs::create_directories(out_dir);
  binio::write_file((fs::path(out_dir) / "config.txt").string(),
                    cfg.canonical());
  const std::string hash = cfg.hash();
  for (const bool test : {false, true}) {
    const DataMatrix d = generate_role(cfg, test);
    Config meta;
    meta.set("provenance.config_hash", hash);
    meta.set("provenance.preset", cfg.get_str("experiment.preset"));
    meta.set("provenance.scale", cfg.get_str("experiment.scale"));
    meta.set("provenance.role", test ? "test" : "train");
    d.save(role_path(out_dir, test ? "test" : "train"), meta);
  }
  return 0;
}

int cmd_learn(const std::string& data_dir, const std::string& tag,
              const std::string& out_dir, long long h_override) {
  Config cfg = Config::load((fs::path(data_dir) / "config.txt").string());
  validate_experiment_config(cfg);
  require_tag(cfg, tag);
  const std::string data_hash = cfg.hash();
  if (h_override > 0)
    cfg.set(tag_key(tag, "h"), std::to_string(h_override));
  const DataMatrix train = DataMatrix::load(role_path(data_dir, "train"));

  const MZModel model = learn_tag(cfg, train, tag);
  fs::create_directories(out_dir);
  save_mz_model(model, (fs::path(out_dir) / "model").string());

  Config prov;
  prov.set("provenance.config_hash", data_hash);
  prov.set("provenance.preset", cfg.get_str("experiment.preset"));
  prov.set("provenance.scale", cfg.get_str("experiment.scale"));
  prov.set("provenance.tag", tag);
  if (h_override > 0)
    prov.set("provenance.h_override", std::to_string(h_override));
  binio::write_file((fs::path(out_dir) / "provenance.txt").string(),
                    prov.canonical());

  const DataMatrix td = tag_matrix(cfg, train, tag, true);
  std::string diag = "tag = " + tag + "\nfamily = " +
                     model.family.kind_name() + "\nh = " +
                     std::to_string(model.h()) + "\n";
  const std::vector<double> mses = model.fit_mse();
  for (std::size_t n = 0; n < mses.size(); ++n)
    diag += "fit_mse_" + std::to_string(n) + " = " +
            binio::format_g17(mses[n]) + "\n";
  if (cfg.get_bool(tag_key(tag, "gfd"))) {
    const GfdReport g = gfd_check(model, td);
    for (Index n = 0; n < g.projection_rms.size(); ++n)
      diag += "gfd_projection_rms_" + std::to_string(n) + " = " +
              binio::format_g17(g.projection_rms[n]) + "\n";
    for (Index n = 0; n < g.replay_rms.size(); ++n)
      diag += "gfd_replay_rms_" + std::to_string(n) + " = " +
              binio::format_g17(g.replay_rms[n]) + "\n";
  }
  const Vec profile = memory_norm_profile(
      model, td, cfg.get_int(tag_key(tag, "profile_component")));
  for (Index l = 0; l < profile.size(); ++l)
    diag += "memory_profile_lag_" + std::to_string(l + 1) + " = " +
            binio::format_g17(profile[l]) + "\n";
  if (profile.size() > 0)
    diag += "selected_h = " +
            std::to_string(select_memory_length(profile, 1e-7)) + "\n";
  binio::write_file((fs::path(out_dir) / "diagnostics.txt").string(), diag);
  return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& data_dir,
                const std::string& out_dir, bool markov_only) {
  const Config cfg =
      Config::load((fs::path(data_dir) / "config.txt").string());
  validate_experiment_config(cfg);
  const MZModel model =
      load_mz_model((fs::path(model_dir) / "model").string());
  const Config prov =
      Config::load((fs::path(model_dir) / "provenance.txt").string());
  const std::string tag = prov.get_str("provenance.tag");
  const DataMatrix test = DataMatrix::load(role_path(data_dir, "test"));

  const PredictionResult res =
      predict_tag(cfg, model, test, tag, markov_only);
  fs::create_directories(out_dir);

  const DataMatrix td = tag_matrix(cfg, test, tag, false);
  const double delta = td.delta();
  const double t_last =
      cfg.get_double("generate.burn_in_time_test") +
      delta * double(cfg.get_int("predict.start_index") - 1);
  const Index rows = res.diverged() ? res.diverged_at : res.values.rows();
  write_prediction_csv((fs::path(out_dir) / "prediction.csv").string(),
                       res.values.topRows(rows), td.observable_names(), delta,
                       t_last);
  std::string summary = "tag = " + tag + "\nconfig_hash = " +
                        prov.get_str("provenance.config_hash") +
                        "\nmarkov_only = " +
                        (markov_only ? std::string("true") : "false") +
                        "\nsteps_written = " + std::to_string(rows) + "\n";
  if (res.diverged())
    summary += "diverged_at = " + std::to_string(res.diverged_at) + "\n";
  binio::write_file((fs::path(out_dir) / "summary.txt").string(), summary);
  return res.diverged() ? 1 : 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& data_dir,
                 const std::string& out_dir, bool force) {
  const Config cfg =
      Config::load((fs::path(data_dir) / "config.txt").string());
  validate_experiment_config(cfg);
  const MZModel model =
      load_mz_model((fs::path(model_dir) / "model").string());
  const Config prov =
      Config::load((fs::path(model_dir) / "provenance.txt").string());
  const std::string tag = prov.get_str("provenance.tag");

  Config dmeta;
  const DataMatrix test = DataMatrix::load(role_path(data_dir, "test"), &dmeta);
  const std::string model_hash = prov.get_str("provenance.config_hash");
  const std::string data_hash = dmeta.get_str("provenance.config_hash");
  if (model_hash != data_hash && !force)
    throw std::runtime_error("config hash mismatch: model " + model_hash +
                             " vs data " + data_hash +
                             " (pass --force to evaluate anyway)");

  EvalOutcome out = evaluate_tag(cfg, model, test, tag);
  out.report.config_echo += "config_hash = " + model_hash + "\n";
  if (out.diverged > 0)
    out.report.config_echo +=
        "diverged_rollouts = " + std::to_string(out.diverged) + "\n";
  write_eval_report(out_dir, tag, out.report);
  if (out.truth_spectrum.size() > 0)
    write_series_table(
        (fs::path(out_dir) / (tag + "_spectrum_truth.csv")).string(),
        "wavenumber,power", out.truth_spectrum, 0);
  return out.diverged > 0 ? 1 : 0;
}

int cmd_reproduce(const std::string& preset, const std::string& scale,
                  std::uint64_t seed, const std::string& out_dir) {
  const Config cfg = preset_config(preset, scale, seed);
  const fs::path base(out_dir);
  const std::string data_dir = (base / "data").string();
  int status = cmd_generate(cfg, data_dir);
  for (const std::string& tag : config_tags(cfg)) {
    const std::string model_dir = (base / "models" / tag).string();
    status |= cmd_learn(data_dir, tag, model_dir);
    status |= cmd_predict(model_dir, data_dir,
                          (base / "pred" / tag).string(), false);
    status |= cmd_evaluate(model_dir, data_dir,
                           (base / "eval" / tag).string(), false);
  }
  return status;
}

}  // namespace mz

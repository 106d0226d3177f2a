#include "mz/presets.hpp"

#include "mz/binio.hpp"

#include <cmath>
#include <stdexcept>

namespace mz {

namespace {

void set_int(Config& c, const std::string& key, long long v) {
  c.set(key, std::to_string(v));
}

void set_num(Config& c, const std::string& key, double v) {
  c.set(key, binio::format_g17(v));
}

void common_tag_defaults(Config& c, const std::string& tag) {
  const std::string p = "model." + tag + ".";
  if (!c.has(p + "coarse_factor")) set_int(c, p + "coarse_factor", 1);
  if (!c.has(p + "delay_embed")) set_int(c, p + "delay_embed", 1);
  if (!c.has(p + "augment_shift")) c.set(p + "augment_shift", "false");
  if (!c.has(p + "target_dim")) set_int(c, p + "target_dim", 0);
  if (!c.has(p + "compare_col")) set_int(c, p + "compare_col", -1);
  if (!c.has(p + "profile_component")) set_int(c, p + "profile_component", -1);
  if (!c.has(p + "degree")) set_int(c, p + "degree", 1);
  if (!c.has(p + "epochs")) set_int(c, p + "epochs", 500);
}

void toy_config(Config& c, bool desk) {
  c.set("system.kind", "toy_logistic");
  set_num(c, "generate.delta_time", 0.05);
  set_num(c, "generate.inner_dt", 0.0005);
  c.set("generate.provenance", "ensemble");
  set_num(c, "generate.burn_in_time_train", 0.0);
  set_num(c, "generate.burn_in_time_test", 0.0);
  set_int(c, "generate.n_trajectories_train", desk ? 10000 : 100000);
  set_int(c, "generate.n_trajectories_test", desk ? 200 : 1000);
  set_int(c, "generate.n_snapshots_train", 61);
  set_int(c, "generate.n_snapshots_test", 61);
  c.set("generate.init_train", "shifted_beta");
  c.set("generate.init_test", "shifted_beta");
  set_num(c, "generate.init_shift", 0.5);

  c.set("model.tags", "mori2,poly2");
  c.set("model.mori2.family", "linear");
  c.set("model.mori2.dict", "monomials");
  set_int(c, "model.mori2.degree", 2);
  set_int(c, "model.mori2.h", 2);
  set_int(c, "model.mori2.compare_col", 1);
  set_int(c, "model.mori2.profile_component", 1);
  c.set("model.mori2.gfd", "true");
  c.set("model.poly2.family", "polynomial");
  c.set("model.poly2.dict", "raw");
  set_int(c, "model.poly2.degree", 2);
  set_int(c, "model.poly2.h", 1);
  set_int(c, "model.poly2.compare_col", 0);
  c.set("model.poly2.gfd", "true");

  set_int(c, "predict.history_rows", 1);
  set_int(c, "predict.start_index", 1);
  set_int(c, "predict.horizon", 60);
  set_int(c, "evaluate.horizon", 60);
  set_int(c, "evaluate.n_rollouts", desk ? 200 : 1000);
  set_int(c, "evaluate.long_rollout_steps", 0);
}

void vdp_config(Config& c, bool) {
  c.set("system.kind", "van_der_pol");
  set_num(c, "system.mu", 1.0);
  set_num(c, "generate.delta_time", 0.5);
  set_num(c, "generate.inner_dt", 0.005);
  c.set("generate.provenance", "ensemble");
  set_num(c, "generate.burn_in_time_train", 0.0);
  set_num(c, "generate.burn_in_time_test", 100.0);
  set_int(c, "generate.n_trajectories_train", 50);
  set_int(c, "generate.n_trajectories_test", 1);
  set_int(c, "generate.n_snapshots_train", 41);
  set_int(c, "generate.n_snapshots_test", 321);
  c.set("generate.init_train", "limit_cycle");
  c.set("generate.init_test", "fixed");
  c.set("generate.init_test_state", "1 0");

  c.set("model.tags", "mori1,mori5,poly5");
  for (const char* t : {"mori1", "mori5"}) {
    const std::string p = std::string("model.") + t + ".";
    c.set(p + "family", "linear");
    c.set(p + "dict", "monomials");
    set_int(c, p + "degree", t[4] - '0');
    set_int(c, p + "h", 10);
    set_int(c, p + "compare_col", 1);
    set_int(c, p + "profile_component", 1);
    c.set(p + "gfd", "true");
  }
  c.set("model.poly5.family", "polynomial");
  c.set("model.poly5.dict", "raw");
  set_int(c, "model.poly5.degree", 5);
  set_int(c, "model.poly5.h", 10);
  set_int(c, "model.poly5.compare_col", 0);
  c.set("model.poly5.gfd", "true");

  set_int(c, "predict.history_rows", 41);
  set_int(c, "predict.start_index", 41);
  set_int(c, "predict.horizon", 280);
  set_int(c, "evaluate.horizon", 280);
  set_int(c, "evaluate.n_rollouts", 1);
  set_int(c, "evaluate.long_rollout_steps", 0);
}

void lorenz_config(Config& c, bool desk) {
  c.set("system.kind", "lorenz63");
  set_num(c, "system.sigma", 10.0);
  set_num(c, "system.rho", 28.0);
  set_num(c, "system.beta", 8.0 / 3.0);
  set_num(c, "generate.delta_time", 0.01);
  set_num(c, "generate.inner_dt", 0.0001);
  c.set("generate.provenance", "ergodic");
  set_num(c, "generate.burn_in_time_train", 1000.0);
  set_num(c, "generate.burn_in_time_test", 100.0);
  set_int(c, "generate.n_snapshots_train", desk ? 100000 : 1000000);
  set_int(c, "generate.n_snapshots_test", 30000);
  set_int(c, "generate.window_len", 601);
  c.set("generate.init_train", "fixed");
  c.set("generate.init_train_state", "0.01 1 10");
  c.set("generate.init_test", "fixed");
  c.set("generate.init_test_state", "0 1 2");

  const long long h_lin = desk ? 600 : 650;
  c.set("model.tags", "mori1,mori5,poly5,spline,mlp");
  for (const char* t : {"mori1", "mori5"}) {
    const std::string p = std::string("model.") + t + ".";
    c.set(p + "family", "linear");
    c.set(p + "dict", "monomials");
    set_int(c, p + "degree", t[4] - '0');
    set_int(c, p + "h", h_lin);
    set_int(c, p + "compare_col", 1);
    set_int(c, p + "profile_component", 1);
    c.set(p + "gfd", "true");
  }
  c.set("model.poly5.family", "polynomial");
  c.set("model.poly5.dict", "raw");
  set_int(c, "model.poly5.degree", 5);
  set_int(c, "model.poly5.h", h_lin);
  set_int(c, "model.poly5.compare_col", 0);
  c.set("model.poly5.gfd", "true");
  c.set("model.spline.family", "spline");
  c.set("model.spline.dict", "raw");
  set_int(c, "model.spline.h", h_lin);
  set_int(c, "model.spline.compare_col", 0);
  c.set("model.spline.gfd", "true");
  c.set("model.mlp.family", "mlp");
  c.set("model.mlp.dict", "raw");
  c.set("model.mlp.layers", "5,5");
  set_int(c, "model.mlp.h", 24);
  set_int(c, "model.mlp.compare_col", 0);
  c.set("model.mlp.gfd", "false");

  set_int(c, "predict.history_rows", h_lin);
  set_int(c, "predict.start_index", 1000);
  set_int(c, "predict.horizon", 600);
  set_int(c, "evaluate.horizon", 600);
  set_int(c, "evaluate.n_rollouts", 30);
  set_int(c, "evaluate.start_index", 1000);
  set_int(c, "evaluate.stride", 900);
  set_int(c, "evaluate.long_rollout_steps", 150000);
  set_int(c, "evaluate.long_start", 2000);
}

void ks_config(Config& c, bool desk) {
  c.set("system.kind", "ks");
  set_num(c, "system.length", 16.0 * M_PI);
  set_int(c, "system.n_grid", 128);
  set_num(c, "generate.delta_time", 1.0);
  set_num(c, "generate.inner_dt", 0.001);
  c.set("generate.provenance", "ergodic");
  set_num(c, "generate.burn_in_time_train", 500.0);
  set_num(c, "generate.burn_in_time_test", 500.0);
  set_int(c, "generate.n_snapshots_train", desk ? 10000 : 100000);
  set_int(c, "generate.n_snapshots_test", desk ? 500 : 2000);
  set_int(c, "generate.window_len", 21);
  c.set("generate.init_train", "ks_cos_sin");
  c.set("generate.init_test", "ks_sin_cos");

  const long long h = desk ? 4 : 10;
  const long long net_epochs = desk ? 150 : 500;
  c.set("model.tags", "mori_dem,fcnn,cnn,cnn_dem");
  c.set("model.mori_dem.family", "linear");
  c.set("model.mori_dem.dict", "raw");
  set_int(c, "model.mori_dem.coarse_factor", 4);
  set_int(c, "model.mori_dem.delay_embed", 10);
  set_int(c, "model.mori_dem.target_dim", 32);
  set_int(c, "model.mori_dem.h", h);
  c.set("model.mori_dem.gfd", "true");
  c.set("model.fcnn.family", "mlp");
  c.set("model.fcnn.dict", "raw");
  set_int(c, "model.fcnn.coarse_factor", 4);
  c.set("model.fcnn.layers", "32");
  set_int(c, "model.fcnn.h", h);
  set_int(c, "model.fcnn.epochs", net_epochs);
  c.set("model.fcnn.gfd", "false");
  c.set("model.cnn.family", "conv1d");
  c.set("model.cnn.dict", "raw");
  set_int(c, "model.cnn.coarse_factor", 4);
  c.set("model.cnn.augment_shift", "true");
  set_int(c, "model.cnn.h", h);
  set_int(c, "model.cnn.epochs", net_epochs);
  c.set("model.cnn.gfd", "false");
  c.set("model.cnn_dem.family", "conv1d");
  c.set("model.cnn_dem.dict", "raw");
  set_int(c, "model.cnn_dem.coarse_factor", 4);
  set_int(c, "model.cnn_dem.delay_embed", 4);
  set_int(c, "model.cnn_dem.target_dim", 32);
  c.set("model.cnn_dem.augment_shift", "true");
  set_int(c, "model.cnn_dem.h", h);
  set_int(c, "model.cnn_dem.epochs", net_epochs);
  c.set("model.cnn_dem.gfd", "false");

  set_int(c, "predict.history_rows", 20);
  set_int(c, "predict.start_index", 30);
  set_int(c, "predict.horizon", 100);
  set_int(c, "evaluate.horizon", 100);
  set_int(c, "evaluate.n_rollouts", 20);
  set_int(c, "evaluate.start_index", 30);
  set_int(c, "evaluate.stride", 18);
  set_int(c, "evaluate.long_rollout_steps", desk ? 3000 : 15000);
  set_int(c, "evaluate.long_start", 30);
  c.set("evaluate.spectrum", "true");
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"toy", "vdp", "lorenz63", "ks"};
}

Config preset_config(const std::string& preset, const std::string& scale,
                     std::uint64_t seed) {
  if (scale != "desk" && scale != "paper")
    throw std::invalid_argument("unknown scale: " + scale);
  const bool desk = scale == "desk";

  Config c;
  c.set("experiment.preset", preset);
  c.set("experiment.scale", scale);
  set_int(c, "experiment.seed", static_cast<long long>(seed));

  if (preset == "toy")
    toy_config(c, desk);
  else if (preset == "vdp")
    vdp_config(c, desk);
  else if (preset == "lorenz63")
    lorenz_config(c, desk);
  else if (preset == "ks")
    ks_config(c, desk);
  else
    throw std::invalid_argument("unknown preset: " + preset);

  if (!c.has("evaluate.n_bins")) set_int(c, "evaluate.n_bins", 100);
  if (!c.has("evaluate.smoothing")) set_num(c, "evaluate.smoothing", 1e-9);
  if (!c.has("evaluate.spectrum")) c.set("evaluate.spectrum", "false");
  for (const std::string& tag : config_tags(c)) common_tag_defaults(c, tag);
  validate_experiment_config(c);
  return c;
}

std::vector<std::string> config_tags(const Config& cfg) {
  const std::string list = cfg.get_str("model.tags");
  std::vector<std::string> tags;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t next = list.find(',', pos);
    const std::string tag = list.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    if (tag.empty()) throw std::runtime_error("model.tags has an empty entry");
    tags.push_back(tag);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (tags.empty()) throw std::runtime_error("model.tags is empty");
  return tags;
}

void validate_experiment_config(const Config& cfg) {
  std::vector<std::string> allowed = {
      "experiment.preset",
      "experiment.scale",
      "experiment.seed",
      "system.kind",
      "system.mu",
      "system.sigma",
      "system.rho",
      "system.beta",
      "system.length",
      "system.n_grid",
      "generate.delta_time",
      "generate.inner_dt",
      "generate.provenance",
      "generate.burn_in_time_train",
      "generate.burn_in_time_test",
      "generate.n_trajectories_train",
      "generate.n_trajectories_test",
      "generate.n_snapshots_train",
      "generate.n_snapshots_test",
      "generate.window_len",
      "generate.init_train",
      "generate.init_test",
      "generate.init_train_state",
      "generate.init_test_state",
      "generate.init_shift",
      "model.tags",
      "predict.history_rows",
      "predict.start_index",
      "predict.horizon",
      "evaluate.horizon",
      "evaluate.n_rollouts",
      "evaluate.start_index",
      "evaluate.stride",
      "evaluate.n_bins",
      "evaluate.smoothing",
      "evaluate.long_rollout_steps",
      "evaluate.long_start",
      "evaluate.spectrum",
  };
  std::vector<std::string> prefixes;
  for (const std::string& tag : config_tags(cfg))
    prefixes.push_back("model." + tag);
  cfg.validate_keys(allowed, prefixes);

  // Per-tag keys are open-ended only under listed tags; catch typos inside.
  const std::vector<std::string> tag_keys = {
      "family",       "dict",          "degree",
      "h",            "coarse_factor", "delay_embed",
      "augment_shift", "target_dim",    "compare_col",
      "profile_component", "gfd",       "layers",
      "epochs",
  };
  for (const std::string& tag : config_tags(cfg)) {
    const std::string prefix = "model." + tag;
    for (const std::string& key : cfg.keys_under(prefix)) {
      const std::string leaf = key.substr(prefix.size() + 1);
      bool ok = false;
      for (const std::string& k : tag_keys) ok = ok || k == leaf;
      if (!ok) throw std::runtime_error("unknown config key: " + key);
    }
  }
}

}  // namespace mz

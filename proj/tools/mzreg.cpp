// Command-line driver for the regression-projection memory-operator toolkit:
// dataset generation, operator learning, rollout prediction, and evaluation,
// wired together by named experiment presets.
#include "CLI11.hpp"

#include "mz/config.hpp"
#include "mz/pipeline.hpp"
#include "mz/presets.hpp"

#include <Eigen/Core>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

namespace {

void apply_thread_cap() {
  const char* env = std::getenv("MZ_THREADS");
  if (env == nullptr) return;
  const int n = std::atoi(env);
  if (n > 0) Eigen::setNbThreads(n);
}

mz::Config resolve_config(const std::string& config_path,
                          const std::string& preset, const std::string& scale,
                          long long seed) {
  if (!config_path.empty() && !preset.empty())
    throw std::invalid_argument("pass either --config or --preset, not both");
  if (!config_path.empty()) {
    mz::Config cfg = mz::Config::load(config_path);
    if (seed >= 0) cfg.set("experiment.seed", std::to_string(seed));
    mz::validate_experiment_config(cfg);
    return cfg;
  }
  if (preset.empty())
    throw std::invalid_argument("generate needs --config or --preset");
  return mz::preset_config(preset, scale,
                           std::uint64_t(seed >= 0 ? seed : 0));
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();

  CLI::App app{
      "Learns Markov and memory operators from snapshot data by regression "
      "projection, then predicts and evaluates multi-step rollouts."};
  app.require_subcommand(1);

  std::string config_path, preset, scale = "desk";
  std::string out_dir, data_dir, model_dir, tag;
  long long seed = -1;
  long long h_override = 0;
  bool markov_only = false, force = false;

  CLI::App* gen = app.add_subcommand("generate",
                                     "Simulate and write train/test data");
  gen->add_option("--config", config_path, "Config file path");
  gen->add_option("--preset", preset, "Preset name (toy, vdp, lorenz63, ks)");
  gen->add_option("--scale", scale, "Preset scale (desk or paper)");
  gen->add_option("--seed", seed, "Experiment seed");
  gen->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* lrn = app.add_subcommand("learn",
                                     "Extract operators for one model tag");
  lrn->add_option("--data", data_dir, "Generated data directory")->required();
  lrn->add_option("--tag", tag, "Model tag from the config")->required();
  lrn->add_option("--memory", h_override, "Override the tag's memory length");
  lrn->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* prd = app.add_subcommand("predict",
                                     "Roll out a learned model on test data");
  prd->add_option("--model", model_dir, "Learned model directory")->required();
  prd->add_option("--data", data_dir, "Generated data directory")->required();
  prd->add_option("--out", out_dir, "Output directory")->required();
  prd->add_flag("--markov-only", markov_only, "Ignore memory operators");

  CLI::App* evl = app.add_subcommand("evaluate",
                                     "Score rollouts against test data");
  evl->add_option("--model", model_dir, "Learned model directory")->required();
  evl->add_option("--data", data_dir, "Generated data directory")->required();
  evl->add_option("--out", out_dir, "Output directory")->required();
  evl->add_flag("--force", force, "Evaluate despite a config hash mismatch");

  CLI::App* rep = app.add_subcommand(
      "reproduce", "Run generate, learn, predict, evaluate for a preset");
  rep->add_option("preset", preset, "Preset name (toy, vdp, lorenz63, ks)")
      ->required();
  rep->add_option("--scale", scale, "Preset scale (desk or paper)");
  rep->add_option("--seed", seed, "Experiment seed");
  rep->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed())
      return mz::cmd_generate(resolve_config(config_path, preset, scale, seed),
                              out_dir);
    if (lrn->parsed()) return mz::cmd_learn(data_dir, tag, out_dir, h_override);
    if (prd->parsed())
      return mz::cmd_predict(model_dir, data_dir, out_dir, markov_only);
    if (evl->parsed())
      return mz::cmd_evaluate(model_dir, data_dir, out_dir, force);
    return mz::cmd_reproduce(preset, scale,
                             std::uint64_t(seed >= 0 ? seed : 0), out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

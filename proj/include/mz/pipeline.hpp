#pragma once

#include "mz/config.hpp"
#include "mz/datamat.hpp"
#include "mz/evalmod.hpp"
#include "mz/mzlearn.hpp"
#include "mz/predict.hpp"
#include "mz/regress.hpp"

#include <cstdint>
#include <string>

namespace mz {

// In-memory experiment steps. The cmd_* wrappers below add the file layout,
// provenance sidecars, and exit-code conventions for the command driver.

// Train or test matrix for the configured experiment, holding the base
// observable representation; model tags derive their own views from it.
DataMatrix generate_role(const Config& cfg, bool test);

// Tag-specific view of a base matrix: dictionary expansion, coarse-graining,
// sub-grid shift augmentation (training only), delay embedding.
DataMatrix tag_matrix(const Config& cfg, const DataMatrix& base,
                      const std::string& tag, bool augmented);

// Regression family configured for the tag, sized against the tag's matrix.
RegressionFamily tag_family(const Config& cfg, const std::string& tag,
                            const DataMatrix& transformed);

// Full extraction for one tag from the base training matrix.
MZModel learn_tag(const Config& cfg, const DataMatrix& train_base,
                  const std::string& tag);

// Rollout configuration for the tag's model: linear propagation for square
// linear-family operators, recursive composition otherwise.
PredictionConfig tag_prediction_config(const Config& cfg, const MZModel& model,
                                       bool markov_only, Index horizon);

// Dispatches to the matrix rollout for square linear-family models and the
// fitted-model rollout otherwise.
PredictionResult run_tag_rollout(const MZModel& model, const Mat& history,
                                 const PredictionConfig& pc);

// One prediction rollout from the configured test location.
PredictionResult predict_tag(const Config& cfg, const MZModel& model,
                             const DataMatrix& test_base,
                             const std::string& tag, bool markov_only);

struct EvalOutcome {
  EvalReport report;
  Index diverged = 0;  // rollouts cut short by the blow-up guard
  Vec truth_spectrum;  // populated when evaluate.spectrum is set
};

// Batched rollouts along the test data plus long-rollout statistics.
EvalOutcome evaluate_tag(const Config& cfg, const MZModel& model,
                         const DataMatrix& test_base, const std::string& tag);

// File-level commands; return 0 on success, 1 when a rollout diverged
// (partial results are still written). Configuration errors throw.
int cmd_generate(const Config& cfg, const std::string& out_dir);
// h_override > 0 replaces the tag's configured memory length; the recorded
// config hash still names the generating config so evaluation stays paired.
int cmd_learn(const std::string& data_dir, const std::string& tag,
              const std::string& out_dir, long long h_override = 0);
int cmd_predict(const std::string& model_dir, const std::string& data_dir,
                const std::string& out_dir, bool markov_only);
int cmd_evaluate(const std::string& model_dir, const std::string& data_dir,
                 const std::string& out_dir, bool force);
int cmd_reproduce(const std::string& preset, const std::string& scale,
                  std::uint64_t seed, const std::string& out_dir);

}  // namespace mz

#ifndef FSP_EVAL_HPP
#define FSP_EVAL_HPP

#include <string>
#include <vector>

#include "fsp/common.hpp"
#include "fsp/decoder.hpp"
#include "fsp/features.hpp"
#include "fsp/interaction.hpp"
#include "fsp/mixing.hpp"
#include "fsp/scod.hpp"
#include "fsp/serialize.hpp"

namespace fsp {

struct AlignmentCounts {
  int ref_words = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;

  double accuracy() const {
    return 100.0 * static_cast<double>(ref_words - substitutions - deletions - insertions) /
           static_cast<double>(ref_words);
  }
};

// Unit-cost Levenshtein alignment of the hypothesis against the reference.
AlignmentCounts align_words(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp);

// (N - S - D - I) / N * 100; errors on an empty reference. Insertion-heavy
// hypotheses can push this below zero; no clamping.
double word_accuracy(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

struct ExperimentConfig {
  SyntheticVocabulary vocab = SyntheticVocabulary::default_vocab(4);
  int num_utterances = 100;       // split train/test by seeded shuffle
  double train_fraction = 0.8;
  int min_words = 2;
  int max_words = 5;
  int tokens_per_word = 12;       // isolated tokens for word-model training

  FeatureConfig features = FeatureConfig::mfcc0d26();
  int states_per_word = 4;
  int components_per_state = 2;

  std::vector<double> train_snrs = {10.0, 5.0, 0.0};
  std::vector<double> test_snrs = {20.0, 10.0, 0.0};
  std::vector<ScodMethod> methods = {ScodMethod::WSS};

  // "single" | "multi" (BIC-selected up to max_noise_states) | "fixed:<k>"
  std::string noise_mode = "multi";
  int max_noise_states = 4;
  int noise_components = 1;  // Gaussian noise states, as VTS linearization assumes

  WssBuildConfig wss;
  size_t max_wss_samples = 60000;  // seeded subsample cap for the stereo pool
  int dpmc_samples = 300;
  int idpmc_components = 3;
  int pmc_em_iters = 15;
  PhaseFactorMode phase;

  uint64_t seed = 0;
  std::string output_dir;  // empty = no files written

  void validate() const;
};

// JSON mirror of ExperimentConfig (the CLI config-file schema). Unknown keys
// are rejected; absent keys keep their defaults.
std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);

struct ResultRow {
  std::string noise_id;
  double snr_db = 0.0;
  std::string method;
  int noise_states = 0;
  double accuracy = 0.0;
  int utterances = 0;
  double mean_log_likelihood = 0.0;
  double mean_op_count = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  // Column order is fixed:
  // noise_id,snr_db,method,noise_states,accuracy,utterances,mean_log_likelihood,mean_op_count
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text);

  // Mean accuracy over the rows matching (method, noise_states) whose SNR
  // falls inside [lo, hi].
  double mean_accuracy(const std::string& method, int noise_states, double lo, double hi) const;
};

// ---- pipeline stages (the CLI drives these one at a time; run_experiment
// chains them) -------------------------------------------------------------

struct SourceModels {
  std::vector<std::pair<std::string, Hmm>> word_models;
  Hmm silence;
};

// Word models from isolated synthesized tokens plus a silence model.
SourceModels train_source_models(const ExperimentConfig& cfg);

// Noise chain per cfg.noise_mode from a noise feature matrix.
Hmm train_noise_model(const Mat& noise_features, const ExperimentConfig& cfg, uint64_t seed);

// Observation grid for one method, packed with the source models into a
// bundle. WSS uses the supplied stereo pool, or synthesizes one from cfg
// when pool is null.
ModelBundle build_bundle(const ExperimentConfig& cfg, const SourceModels& src, const Hmm& noise,
                         ScodMethod method, uint64_t seed,
                         const std::vector<StereoSample>* pool = nullptr);

struct ExperimentRun {
  ResultTable table;
  int noise_states = 0;
  // one trained bundle per method, in cfg.methods order
  std::vector<ModelBundle> bundles;
};

// Full pipeline: synthesize corpus, train source and noise models, build one
// observation grid per method, decode the held-out utterances across the test
// SNRs, and score. Deterministic under cfg.seed. When cfg.output_dir is set,
// writes results.csv and a run.json manifest recording every parameter and
// derived seed.
ExperimentRun run_experiment(const ExperimentConfig& cfg);

// One accuracy-vs-SNR CSV series per (method, noise_states) plus an
// absolute-improvement series (multi minus single noise states) per method
// where both configurations exist, and a best-effort SVG chart. Returns the
// list of files written; missing single/multi pairs produce a line in
// plot_warnings.txt instead of an improvement series.
std::vector<std::string> emit_plots(const ResultTable& table, const std::string& out_dir);

}  // namespace fsp

#endif

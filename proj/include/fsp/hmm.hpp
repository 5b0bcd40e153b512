#ifndef FSP_HMM_HPP
#define FSP_HMM_HPP

#include <vector>

#include "fsp/common.hpp"
#include "fsp/gmm.hpp"

namespace fsp {

enum class Topology : uint32_t { LeftToRight = 0, Ergodic = 1 };

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

struct Hmm {
  Vec priors;                  // P(s_1)
  Mat transitions;             // row-stochastic
  std::vector<Gmm> emissions;  // one mixture per state
  Topology topology = Topology::LeftToRight;
  // Per-state probability of leaving the model, used by grammar composition.
  // Normally zero except the last state of a left-to-right word model; the
  // in-model transition rows stay stochastic and composition reallocates
  // (1 - exit) of the row mass.
  Vec exit_probs;

  int num_states() const { return static_cast<int>(priors.size()); }
  void validate() const;
  void refresh();
  // Emission log-likelihood table [T x S] for an observation matrix [T x dim].
  Mat emission_log_likelihoods(const Mat& obs) const;
  Vec stationary_distribution(int iters = 10000, double tol = 1e-14) const;
};

struct ViterbiResult {
  std::vector<int> path;
  double log_likelihood = 0.0;
};

// Elementwise log of a transition matrix with kLogZero for zero entries.
Mat transitions_log(const Mat& transitions);

// Single-chain Viterbi; ties broken toward the lowest state index.
// force_final pins the path to end in the last state (left-to-right models).
ViterbiResult viterbi_decode(const Hmm& hmm, const Mat& obs, bool force_final = false);

struct HmmTrainConfig {
  int num_states = 6;
  int num_components = 2;
  int viterbi_iters = 4;
  int baum_welch_iters = 6;
  int em_iters_per_mixup = 8;
  uint64_t seed = 0;
};

// Left-to-right training: uniform segmentation, Viterbi refinement,
// mixture growth by mean splitting, then Baum-Welch.
Hmm hmm_train(const std::vector<Mat>& sequences, Topology topology, const HmmTrainConfig& cfg);

// One Baum-Welch sweep over all sequences; returns the total data
// log-likelihood under the input model.
double baum_welch_step(Hmm& hmm, const std::vector<Mat>& sequences, const Vec& cov_floor);

// Greedy BIC-guided state splitting for ergodic noise models with one
// diagonal Gaussian per state.
// force_max keeps splitting to exactly max_states regardless of BIC.
Hmm bic_select_noise_states(const Mat& features, int max_states, int components_per_state = 1,
                            uint64_t seed = 0, bool force_max = false);

}  // namespace fsp

#endif

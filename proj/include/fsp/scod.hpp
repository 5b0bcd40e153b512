#ifndef FSP_SCOD_HPP
#define FSP_SCOD_HPP

#include <vector>

#include "fsp/common.hpp"
#include "fsp/features.hpp"
#include "fsp/gmm.hpp"
#include "fsp/hmm.hpp"
#include "fsp/interaction.hpp"
#include "fsp/mixing.hpp"

namespace fsp {

enum class ScodMethod : uint32_t { VTS = 0, DPMC = 1, IDPMC = 2, WSS = 3 };

std::string scod_method_name(ScodMethod m);
ScodMethod scod_method_from_name(const std::string& name);

struct ScodCell {
  Gmm gmm;
  bool supported = false;
  double total_weight = 0.0;  // effective weight behind the fit
  int iterations = 0;
  int reseeds = 0;
};

struct ScodGrid {
  int speech_states = 0;
  int noise_states = 0;
  std::vector<ScodCell> cells;  // row-major, index i * noise_states + j
  FeatureSpace observation_space = FeatureSpace::Mfcc0d26;
  ScodMethod method = ScodMethod::WSS;
  double unsupported_floor = -1e6;  // log-likelihood served for unsupported cells

  ScodCell& cell(int i, int j) { return cells[static_cast<size_t>(i * noise_states + j)]; }
  const ScodCell& cell(int i, int j) const {
    return cells[static_cast<size_t>(i * noise_states + j)];
  }
  double log_likelihood(int i, int j, const Vec& y) const;
  void refresh();
};

// One corrupted frame plus its per-state source likelihood vectors; the
// source features themselves are discarded after evaluation.
struct StereoSample {
  Vec y;
  Vec speech_loglik;  // log p(x_l | i) over speech states
  Vec noise_loglik;   // log p(n_l | j) over noise states
};

// VTS grid: one compensated Gaussian per source component pair, statics
// propagated through the linearized mismatch and deltas through the same
// Jacobians.
ScodGrid build_vts(const Hmm& speech, const Hmm& noise, const DctMatrix& dct,
                   const PhaseFactorMode& phase);

// DPMC (K = 1) / IDPMC (K > 1): forward-sample source pairs per cell, map the
// statics through the mismatch function (deltas through the local Jacobians),
// and fit a Gaussian or GMM to the images.
ScodGrid build_dpmc(const Hmm& speech, const Hmm& noise, const DctMatrix& dct,
                    const PhaseFactorMode& phase, int samples_per_cell, int K,
                    CovKind cov_kind, int em_iters, uint64_t seed);

std::vector<StereoSample> make_stereo_samples(const std::vector<StereoUtterance>& corpus,
                                              const Hmm& speech, const Hmm& noise);

struct WssWeights {
  Vec speech;  // w_{l|i}
  Vec noise;   // w_{l|j}
  double joint(int i, int j) const { return speech[i] * noise[j]; }
};

// Importance weights of Eqs.: w_{l|i} = p(x_l|i) / sum_i p(x_l|i) p(i),
// computed in log space.
WssWeights wss_weights(const StereoSample& sample, const Vec& speech_prior,
                       const Vec& noise_prior);

struct WssBuildConfig {
  int components = 1;
  CovKind cov_kind = CovKind::Full;
  int em_iters = 20;
  uint64_t seed = 0;
  double support_weight_per_dim = 10.0;  // cell weight < this * dim => unsupported
  double prune_rel = 1e-10;              // drop samples below this fraction of the max weight
};

ScodGrid build_wss(const std::vector<StereoSample>& samples, const Vec& speech_prior,
                   const Vec& noise_prior, const WssBuildConfig& cfg,
                   FeatureSpace observation_space);

double scod_log_likelihood(const ScodGrid& grid, int i, int j, const Vec& y);

}  // namespace fsp

#endif

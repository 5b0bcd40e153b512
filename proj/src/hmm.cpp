#include "fsp/hmm.hpp"

#include <numeric>
#include <random>

namespace fsp {

std::string topology_name(Topology t) {
  return t == Topology::LeftToRight ? "left-to-right" : "ergodic";
}

Topology topology_from_name(const std::string& name) {
  if (name == "left-to-right") return Topology::LeftToRight;
  if (name == "ergodic") return Topology::Ergodic;
  throw DataError("unknown topology: " + name);
}

void Hmm::validate() const {
  const int S = num_states();
  require(S >= 1, "HMM needs at least one state");
  require(transitions.rows() == S && transitions.cols() == S, "transition shape mismatch");
  require(static_cast<int>(emissions.size()) == S, "one emission mixture per state required");
  require(std::abs(priors.sum() - 1.0) < 1e-10, "priors must sum to 1");
  for (int i = 0; i < S; ++i)
    require(std::abs(transitions.row(i).sum() - 1.0) < 1e-10,
            "transition row " + std::to_string(i) + " must sum to 1");
}

void Hmm::refresh() {
  for (auto& g : emissions) g.refresh();
}

Mat Hmm::emission_log_likelihoods(const Mat& obs) const {
  const int S = num_states();
  Mat em(obs.rows(), S);
  for (Eigen::Index t = 0; t < obs.rows(); ++t) {
    const Vec y = obs.row(t).transpose();
    for (int s = 0; s < S; ++s) em(t, s) = emissions[static_cast<size_t>(s)].log_likelihood(y);
  }
  return em;
}

Vec Hmm::stationary_distribution(int iters, double tol) const {
  Vec pi = Vec::Constant(num_states(), 1.0 / num_states());
  for (int it = 0; it < iters; ++it) {
    Vec next = transitions.transpose() * pi;
    next /= next.sum();
    if ((next - pi).cwiseAbs().maxCoeff() < tol) return next;
    pi = next;
  }
  return pi;
}

ViterbiResult viterbi_decode(const Hmm& hmm, const Mat& obs, bool force_final) {
  hmm.validate();
  const int S = hmm.num_states();
  const auto T = static_cast<int>(obs.rows());
  require(T >= 1, "empty observation sequence");

  const Mat em = hmm.emission_log_likelihoods(obs);
  const Mat logA = transitions_log(hmm.transitions);

  Mat delta(T, S);
  Eigen::MatrixXi psi(T, S);
  for (int s = 0; s < S; ++s)
    delta(0, s) = (hmm.priors[s] > 0.0 ? std::log(hmm.priors[s]) : kLogZero) + em(0, s);
  psi.row(0).setConstant(-1);

  for (int t = 1; t < T; ++t) {
    for (int j = 0; j < S; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int i = 0; i < S; ++i) {
        const double score = delta(t - 1, i) + logA(i, j);
        if (score > best) {
          best = score;
          arg = i;
        }
      }
      delta(t, j) = best + em(t, j);
      psi(t, j) = arg;
    }
  }

  int last = 0;
  if (force_final) {
    last = S - 1;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < S; ++s)
      if (delta(T - 1, s) > best) {
        best = delta(T - 1, s);
        last = s;
      }
  }
  if (delta(T - 1, last) <= kLogZero) throw NumericalError("no reachable decoding path");

  ViterbiResult res;
  res.log_likelihood = delta(T - 1, last);
  res.path.resize(static_cast<size_t>(T));
  res.path[static_cast<size_t>(T - 1)] = last;
  for (int t = T - 1; t > 0; --t)
    res.path[static_cast<size_t>(t - 1)] = psi(t, res.path[static_cast<size_t>(t)]);
  return res;
}

Mat transitions_log(const Mat& transitions) {
  Mat logA(transitions.rows(), transitions.cols());
  for (Eigen::Index i = 0; i < transitions.rows(); ++i)
    for (Eigen::Index j = 0; j < transitions.cols(); ++j)
      logA(i, j) = transitions(i, j) > 0.0 ? std::log(transitions(i, j)) : kLogZero;
  return logA;
}

namespace {

Gmm single_gaussian_gmm(const Mat& frames, const Vec& floor) {
  WeightedSampleSet ws{frames, Vec::Ones(frames.rows())};
  Gmm g;
  g.cov_kind = CovKind::Diagonal;
  g.components.push_back(weighted_gaussian_fit(ws, CovKind::Diagonal, floor));
  return g;
}

// Split the heaviest component along its per-dimension standard deviation.
Gmm split_heaviest(const Gmm& gmm) {
  Gmm out = gmm;
  int heavy = 0;
  for (int k = 1; k < gmm.num_components(); ++k)
    if (gmm.components[static_cast<size_t>(k)].log_weight >
        gmm.components[static_cast<size_t>(heavy)].log_weight)
      heavy = k;
  GaussianComponent a = gmm.components[static_cast<size_t>(heavy)];
  GaussianComponent b = a;
  const Vec sd = a.cov.diagonal().cwiseSqrt();
  a.mean += 0.2 * sd;
  b.mean -= 0.2 * sd;
  a.log_weight -= std::log(2.0);
  b.log_weight -= std::log(2.0);
  a.refresh();
  b.refresh();
  out.components[static_cast<size_t>(heavy)] = a;
  out.components.push_back(b);
  return out;
}

Mat gather_rows(const std::vector<Mat>& sequences, const std::vector<std::vector<int>>& paths,
                int state) {
  int count = 0;
  for (size_t u = 0; u < sequences.size(); ++u)
    for (int s : paths[u])
      if (s == state) ++count;
  Mat frames(count, sequences[0].cols());
  int r = 0;
  for (size_t u = 0; u < sequences.size(); ++u)
    for (size_t t = 0; t < paths[u].size(); ++t)
      if (paths[u][t] == state) frames.row(r++) = sequences[u].row(static_cast<Eigen::Index>(t));
  return frames;
}

}  // namespace

double baum_welch_step(Hmm& hmm, const std::vector<Mat>& sequences, const Vec& cov_floor) {
  hmm.validate();
  const int S = hmm.num_states();
  const Mat logA = transitions_log(hmm.transitions);

  Mat trans_acc = Mat::Zero(S, S);
  Vec prior_acc = Vec::Zero(S);
  double total_ll = 0.0;

  // per-state occupancy-weighted frame sets for the emission update
  std::vector<std::vector<double>> occ(static_cast<size_t>(S));
  std::vector<std::vector<Eigen::Index>> occ_rows(static_cast<size_t>(S));
  std::vector<const Mat*> occ_seq(sequences.size());
  Eigen::Index total_frames = 0;
  for (const auto& m : sequences) total_frames += m.rows();
  Mat all_frames(total_frames, sequences[0].cols());
  Mat all_gamma(total_frames, S);

  Eigen::Index row0 = 0;
  for (const Mat& obs : sequences) {
    const auto T = static_cast<int>(obs.rows());
    const Mat em = hmm.emission_log_likelihoods(obs);

    Mat alpha(T, S), beta(T, S);
    for (int s = 0; s < S; ++s)
      alpha(0, s) = (hmm.priors[s] > 0.0 ? std::log(hmm.priors[s]) : kLogZero) + em(0, s);
    for (int t = 1; t < T; ++t)
      for (int j = 0; j < S; ++j) {
        double acc = kLogZero;
        for (int i = 0; i < S; ++i) acc = log_add(acc, alpha(t - 1, i) + logA(i, j));
        alpha(t, j) = acc + em(t, j);
      }
    beta.row(T - 1).setZero();
    for (int t = T - 2; t >= 0; --t)
      for (int i = 0; i < S; ++i) {
        double acc = kLogZero;
        for (int j = 0; j < S; ++j) acc = log_add(acc, logA(i, j) + em(t + 1, j) + beta(t + 1, j));
        beta(t, i) = acc;
      }

    double ll = kLogZero;
    for (int s = 0; s < S; ++s) ll = log_add(ll, alpha(T - 1, s));
    total_ll += ll;

    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < S; ++s)
        all_gamma(row0 + t, s) = std::exp(alpha(t, s) + beta(t, s) - ll);
      all_frames.row(row0 + t) = obs.row(t);
    }
    for (int s = 0; s < S; ++s) prior_acc[s] += all_gamma(row0, s);

    for (int t = 0; t < T - 1; ++t)
      for (int i = 0; i < S; ++i) {
        if (alpha(t, i) <= kLogZero) continue;
        for (int j = 0; j < S; ++j) {
          if (hmm.transitions(i, j) == 0.0) continue;  // structural zero
          trans_acc(i, j) += std::exp(alpha(t, i) + logA(i, j) + em(t + 1, j) + beta(t + 1, j) - ll);
        }
      }
    row0 += T;
  }

  // M-step: transitions and priors
  for (int i = 0; i < S; ++i) {
    const double rowsum = trans_acc.row(i).sum();
    if (rowsum > 0.0) hmm.transitions.row(i) = trans_acc.row(i) / rowsum;
  }
  prior_acc /= prior_acc.sum();
  hmm.priors = prior_acc;

  // M-step: emissions via the weighted-sample update with occupancy weights
  for (int s = 0; s < S; ++s) {
    WeightedSampleSet ws{all_frames, all_gamma.col(s)};
    if (ws.total_weight() <= 1e-8) continue;  // starved state: keep old emission
    hmm.emissions[static_cast<size_t>(s)] =
        weighted_em_step(hmm.emissions[static_cast<size_t>(s)], ws, cov_floor);
  }
  return total_ll;
}

Hmm hmm_train(const std::vector<Mat>& sequences, Topology topology, const HmmTrainConfig& cfg) {
  require(!sequences.empty(), "need at least one training sequence");
  const int S = cfg.num_states;
  require(S >= 1 && cfg.num_components >= 1, "states/components must be >= 1");
  for (const auto& m : sequences)
    if (static_cast<int>(m.rows()) < S)
      throw DataError("training sequence has fewer frames than states");

  Eigen::Index total_frames = 0;
  for (const auto& m : sequences) total_frames += m.rows();
  Mat pooled(total_frames, sequences[0].cols());
  Eigen::Index r = 0;
  for (const auto& m : sequences) {
    pooled.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  const Vec floor = default_cov_floor(WeightedSampleSet{pooled, Vec::Ones(pooled.rows())});

  Hmm hmm;
  hmm.topology = topology;
  hmm.priors = Vec::Zero(S);
  hmm.transitions = Mat::Zero(S, S);
  hmm.emissions.resize(static_cast<size_t>(S));
  hmm.exit_probs = Vec::Zero(S);

  // uniform-segmentation initialization
  std::vector<std::vector<int>> paths(sequences.size());
  for (size_t u = 0; u < sequences.size(); ++u) {
    const auto T = static_cast<int>(sequences[u].rows());
    paths[u].resize(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
      paths[u][static_cast<size_t>(t)] = std::min(S - 1, t * S / T);
  }

  const double avg_dwell =
      static_cast<double>(total_frames) / (static_cast<double>(sequences.size()) * S);
  const double advance = 1.0 / std::max(1.5, avg_dwell);
  if (topology == Topology::LeftToRight) {
    hmm.priors[0] = 1.0;
    for (int s = 0; s < S - 1; ++s) {
      hmm.transitions(s, s) = 1.0 - advance;
      hmm.transitions(s, s + 1) = advance;
    }
    hmm.transitions(S - 1, S - 1) = 1.0;
  } else {
    hmm.priors.setConstant(1.0 / S);
    hmm.transitions.setConstant(advance / std::max(1, S - 1));
    hmm.transitions.diagonal().setConstant(1.0 - advance);
  }

  auto refit_from_paths = [&]() {
    for (int s = 0; s < S; ++s) {
      const Mat frames = gather_rows(sequences, paths, s);
      if (frames.rows() >= 1)
        hmm.emissions[static_cast<size_t>(s)] = single_gaussian_gmm(frames, floor);
    }
  };
  refit_from_paths();

  auto update_transitions_from_paths = [&]() {
    Mat counts = Mat::Zero(S, S);
    for (const auto& p : paths)
      for (size_t t = 0; t + 1 < p.size(); ++t)
        counts(p[t], p[t + 1]) += 1.0;
    for (int i = 0; i < S; ++i) {
      const double rowsum = counts.row(i).sum();
      if (rowsum > 0.0) {
        for (int j = 0; j < S; ++j) {
          if (hmm.transitions(i, j) == 0.0) continue;  // keep topology zeros
          hmm.transitions(i, j) = counts(i, j) / rowsum;
        }
        const double s2 = hmm.transitions.row(i).sum();
        if (s2 > 0.0)
          hmm.transitions.row(i) /= s2;
        else
          hmm.transitions(i, i) = 1.0;
      }
    }
    // keep every allowed transition reachable
    for (int i = 0; i < S; ++i) {
      bool adjusted = false;
      for (int j = 0; j < S; ++j) {
        const bool allowed = topology == Topology::Ergodic ||
                             (j == i || j == i + 1 || (i == S - 1 && j == S - 1));
        if (allowed && hmm.transitions(i, j) < 1e-4) {
          hmm.transitions(i, j) = 1e-4;
          adjusted = true;
        }
      }
      if (adjusted) hmm.transitions.row(i) /= hmm.transitions.row(i).sum();
    }
  };
  update_transitions_from_paths();

  auto realign = [&]() {
    for (size_t u = 0; u < sequences.size(); ++u)
      paths[u] = viterbi_decode(hmm, sequences[u], topology == Topology::LeftToRight).path;
  };

  for (int it = 0; it < cfg.viterbi_iters; ++it) {
    realign();
    refit_from_paths();
    update_transitions_from_paths();
  }

  // mixture growth by splitting, refined with per-state EM on aligned frames
  int K = 1;
  while (K < cfg.num_components) {
    realign();
    for (int s = 0; s < S; ++s) {
      const Mat frames = gather_rows(sequences, paths, s);
      if (frames.rows() < 2 * (K + 1)) continue;  // not enough data to split
      Gmm init = split_heaviest(hmm.emissions[static_cast<size_t>(s)]);
      WeightedSampleSet ws{frames, Vec::Ones(frames.rows())};
      hmm.emissions[static_cast<size_t>(s)] =
          weighted_em_fit(ws, init.num_components(), CovKind::Diagonal, init,
                          cfg.em_iters_per_mixup, 1e-6, cfg.seed);
    }
    ++K;
  }

  for (int it = 0; it < cfg.baum_welch_iters; ++it) baum_welch_step(hmm, sequences, floor);

  // exit probability of the final state from expected dwell
  if (topology == Topology::LeftToRight) {
    realign();
    double occ_last = 0.0;
    for (const auto& p : paths)
      for (int s : p)
        if (s == S - 1) occ_last += 1.0;
    const double ep = static_cast<double>(sequences.size()) / std::max(1.0, occ_last);
    hmm.exit_probs[S - 1] = std::clamp(ep, 0.01, 0.9);
  }
  hmm.validate();
  return hmm;
}

Hmm bic_select_noise_states(const Mat& features, int max_states, int components_per_state,
                            uint64_t seed, bool force_max) {
  require(features.rows() >= 2, "need at least two noise frames");
  require(max_states >= 1, "max_states must be >= 1");
  const auto N = static_cast<double>(features.rows());
  const Eigen::Index d = features.cols();
  const Vec floor = default_cov_floor(WeightedSampleSet{features, Vec::Ones(features.rows())});
  std::vector<Mat> seqs{features};

  auto free_params = [&](int S) {
    return static_cast<double>(S) * 2.0 * static_cast<double>(d) * components_per_state +
           static_cast<double>(S) * (S - 1) + (S - 1);
  };
  auto data_ll = [&](Hmm& h) {
    // one extra E pass to score without changing parameters
    Hmm probe = h;
    return baum_welch_step(probe, seqs, floor);
  };

  Hmm current;
  current.topology = Topology::Ergodic;
  current.priors = Vec::Ones(1);
  current.transitions = Mat::Ones(1, 1);
  current.exit_probs = Vec::Zero(1);
  current.emissions.push_back(single_gaussian_gmm(features, floor));
  if (components_per_state > 1) {
    WeightedSampleSet ws{features, Vec::Ones(features.rows())};
    current.emissions[0] = weighted_em_fit(ws, components_per_state, CovKind::Diagonal,
                                           std::nullopt, 20, 1e-6, seed);
  }
  double best_bic = data_ll(current) - free_params(1) / 2.0 * std::log(N);

  std::mt19937_64 split_rng(seed ^ 0x9e3779b97f4a7c15ull);
  while (current.num_states() < max_states) {
    const int S = current.num_states();
    // worst state: lowest average frame log-likelihood along the alignment
    const auto align = viterbi_decode(current, features).path;
    Vec sum_ll = Vec::Zero(S), count = Vec::Zero(S);
    for (size_t t = 0; t < align.size(); ++t) {
      const int s = align[t];
      sum_ll[s] += current.emissions[static_cast<size_t>(s)].log_likelihood(
          features.row(static_cast<Eigen::Index>(t)).transpose());
      count[s] += 1.0;
    }
    int worst = 0;
    double worst_avg = std::numeric_limits<double>::infinity();
    for (int s = 0; s < S; ++s) {
      const double avg = count[s] > 0.0 ? sum_ll[s] / count[s] : 0.0;
      if (count[s] > 0.0 && avg < worst_avg) {
        worst_avg = avg;
        worst = s;
      }
    }

    // candidate: split the worst state with perturbed means
    Hmm cand;
    cand.topology = Topology::Ergodic;
    const int S2 = S + 1;
    cand.priors = Vec::Zero(S2);
    cand.transitions = Mat::Zero(S2, S2);
    cand.exit_probs = Vec::Zero(S2);
    auto map_idx = [&](int s) { return s; };  // split clone appended at index S
    for (int s = 0; s < S; ++s) cand.priors[map_idx(s)] = current.priors[s];
    cand.priors[worst] /= 2.0;
    cand.priors[S] = cand.priors[worst];
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) cand.transitions(i, j) = current.transitions(i, j);
    for (int i = 0; i < S; ++i) {
      cand.transitions(i, S) = cand.transitions(i, worst) / 2.0;
      cand.transitions(i, worst) /= 2.0;
    }
    cand.transitions.row(S) = cand.transitions.row(worst);
    for (int i = 0; i < S2; ++i) cand.transitions.row(i) /= cand.transitions.row(i).sum();

    cand.emissions = current.emissions;
    Gmm a = current.emissions[static_cast<size_t>(worst)];
    Gmm b = a;
    // random perturbation direction: a fixed axis-aligned offset leaves EM on
    // a symmetric saddle when the true clusters separate along another axis
    Vec dir(d);
    std::normal_distribution<double> unit;
    for (Eigen::Index i = 0; i < d; ++i) dir[i] = unit(split_rng);
    for (auto& c : a.components) c.mean += 0.2 * dir.cwiseProduct(c.cov.diagonal().cwiseSqrt());
    for (auto& c : b.components) c.mean -= 0.2 * dir.cwiseProduct(c.cov.diagonal().cwiseSqrt());
    a.refresh();
    b.refresh();
    cand.emissions[static_cast<size_t>(worst)] = a;
    cand.emissions.push_back(b);

    double ll = 0.0;
    for (int it = 0; it < 10; ++it) ll = baum_welch_step(cand, seqs, floor);
    ll = data_ll(cand);
    const double bic = ll - free_params(S2) / 2.0 * std::log(N);
    if (bic > best_bic || force_max) {
      best_bic = std::max(best_bic, bic);
      current = cand;
    } else {
      break;
    }
  }
  current.validate();
  return current;
}

}  // namespace fsp

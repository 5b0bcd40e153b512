#ifndef FSP_TESTS_HELPERS_HPP
#define FSP_TESTS_HELPERS_HPP

#include <random>
#include <vector>

#include "fsp/decoder.hpp"
#include "fsp/gmm.hpp"
#include "fsp/hmm.hpp"
#include "fsp/scod.hpp"

namespace fsp::testing {

inline Vec random_vec(std::mt19937_64& rng, int d, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline Vec random_simplex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v / v.sum();
}

inline Mat random_stochastic(std::mt19937_64& rng, int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.row(i) = random_simplex(rng, n).transpose();
  return m;
}

inline Gmm random_gmm(std::mt19937_64& rng, int K, int d, CovKind kind = CovKind::Diagonal) {
  Gmm gmm;
  gmm.cov_kind = kind;
  const Vec w = random_simplex(rng, K);
  for (int k = 0; k < K; ++k) {
    GaussianComponent c;
    c.mean = random_vec(rng, d, -2.0, 2.0);
    if (kind == CovKind::Full) {
      const Mat a = random_mat(rng, d, d, -0.5, 0.5);
      c.cov = a * a.transpose() + 0.3 * Mat::Identity(d, d);
    } else {
      c.cov = Mat::Zero(d, d);
      c.cov.diagonal() = random_vec(rng, d, 0.2, 1.5);
    }
    c.log_weight = std::log(w[k]);
    c.refresh();
    gmm.components.push_back(std::move(c));
  }
  return gmm;
}

inline Hmm random_hmm(std::mt19937_64& rng, int S, int K, int d) {
  Hmm hmm;
  hmm.topology = Topology::Ergodic;
  hmm.priors = random_simplex(rng, S);
  hmm.transitions = random_stochastic(rng, S);
  hmm.exit_probs = Vec::Zero(S);
  for (int s = 0; s < S; ++s) hmm.emissions.push_back(random_gmm(rng, K, d));
  hmm.refresh();
  return hmm;
}

// A random factorial model with single-Gaussian grid cells.
inline FactorialModel random_factorial(std::mt19937_64& rng, int Sx, int Sn, int d) {
  FactorialModel model;
  model.speech_chain = random_hmm(rng, Sx, 1, d);
  model.noise_chain = random_hmm(rng, Sn, 1, d);
  model.scod.speech_states = Sx;
  model.scod.noise_states = Sn;
  model.scod.method = ScodMethod::VTS;
  for (int i = 0; i < Sx; ++i)
    for (int j = 0; j < Sn; ++j) {
      ScodCell cell;
      cell.gmm = random_gmm(rng, 1, d);
      cell.supported = true;
      cell.total_weight = 1.0;
      model.scod.cells.push_back(std::move(cell));
    }
  return model;
}

// Brute-force joint decode: enumerate every (speech, noise) path, score it,
// and keep the best; ties resolved toward the lexicographically smallest
// time-major sequence of (i, j) pairs.
struct EnumResult {
  std::vector<int> speech, noise;
  double score = -std::numeric_limits<double>::infinity();
};

inline EnumResult enumerate_decode(const FactorialModel& model, const Mat& obs) {
  const int T = static_cast<int>(obs.rows());
  const int Sx = model.speech_chain.num_states();
  const int Sn = model.noise_chain.num_states();
  const int S = Sx * Sn;
  EnumResult best;
  std::vector<int> m(static_cast<size_t>(T), 0);
  const Mat lax = transitions_log(model.speech_chain.transitions);
  const Mat lan = transitions_log(model.noise_chain.transitions);
  while (true) {
    double score = 0.0;
    for (int t = 0; t < T; ++t) {
      const int i = m[static_cast<size_t>(t)] / Sn, j = m[static_cast<size_t>(t)] % Sn;
      if (t == 0) {
        score += std::log(model.speech_chain.priors[i]) + std::log(model.noise_chain.priors[j]);
      } else {
        const int ip = m[static_cast<size_t>(t - 1)] / Sn, jp = m[static_cast<size_t>(t - 1)] % Sn;
        score += lax(ip, i) + lan(jp, j);
      }
      score += model.scod.log_likelihood(i, j, obs.row(t).transpose());
    }
    // strict > keeps the first (lexicographically smallest) maximizer
    if (score > best.score) {
      best.score = score;
      best.speech.resize(static_cast<size_t>(T));
      best.noise.resize(static_cast<size_t>(T));
      for (int t = 0; t < T; ++t) {
        best.speech[static_cast<size_t>(t)] = m[static_cast<size_t>(t)] / Sn;
        best.noise[static_cast<size_t>(t)] = m[static_cast<size_t>(t)] % Sn;
      }
    }
    int t = T - 1;
    while (t >= 0 && m[static_cast<size_t>(t)] == S - 1) m[static_cast<size_t>(t--)] = 0;
    if (t < 0) break;
    ++m[static_cast<size_t>(t)];
  }
  return best;
}

// One standard (unweighted) EM sweep, written from the update equations;
// mirrors the library's accumulation order so equal-weight comparisons can be
// exact.
inline Gmm reference_em_step(const Gmm& current, const Mat& samples, const Vec& cov_floor) {
  const int K = current.num_components();
  const Eigen::Index L = samples.rows();
  const Eigen::Index d = samples.cols();
  Mat gamma(L, K);
  for (Eigen::Index l = 0; l < L; ++l)
    gamma.row(l) = current.responsibilities(samples.row(l).transpose()).transpose();
  Gmm next;
  next.cov_kind = current.cov_kind;
  next.components.resize(static_cast<size_t>(K));
  const Vec ones = Vec::Ones(L);
  for (int k = 0; k < K; ++k) {
    const Vec wk_l = ones.cwiseProduct(gamma.col(k));
    const double Wk = wk_l.sum();
    auto& comp = next.components[static_cast<size_t>(k)];
    comp.mean = (wk_l.transpose() * samples).transpose() / Wk;
    comp.cov = Mat::Zero(d, d);
    for (Eigen::Index l = 0; l < L; ++l) {
      if (wk_l[l] == 0.0) continue;
      const Vec diff = samples.row(l).transpose() - comp.mean;
      comp.cov += wk_l[l] * (diff * diff.transpose());
    }
    comp.cov /= Wk;
    apply_cov_pattern(comp.cov, next.cov_kind);
    for (Eigen::Index i = 0; i < d; ++i) comp.cov(i, i) = std::max(comp.cov(i, i), cov_floor[i]);
    comp.log_weight = std::log(Wk / static_cast<double>(L));
    comp.refresh();
  }
  return next;
}

// Minimal-edit-distance oracle by full recursion (exponential; tiny cases).
inline int edit_distance_oracle(const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp, size_t i, size_t j) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  int best = edit_distance_oracle(ref, hyp, i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
  best = std::min(best, edit_distance_oracle(ref, hyp, i + 1, j) + 1);
  best = std::min(best, edit_distance_oracle(ref, hyp, i, j + 1) + 1);
  return best;
}

}  // namespace fsp::testing

#endif

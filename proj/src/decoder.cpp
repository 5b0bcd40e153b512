#include "fsp/decoder.hpp"

namespace fsp {

void FactorialModel::validate() const {
  speech_chain.validate();
  noise_chain.validate();
  require(scod.speech_states == speech_chain.num_states() &&
              scod.noise_states == noise_chain.num_states(),
          "SCOD grid dimensions do not match the source chains");
  if (!state_words.empty())
    require(static_cast<int>(state_words.size()) == speech_chain.num_states(),
            "state labeling does not match the speech chain");
  if (!word_end_states.empty())
    require(word_end_states.size() == state_words.size(),
            "word-end flags do not match the state labeling");
}

namespace {

Vec log_priors(const Vec& p) {
  Vec lp(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) lp[i] = p[i] > 0.0 ? std::log(p[i]) : kLogZero;
  return lp;
}

// emission table for one frame: em(i, j) = log p(y_t | i, j)
Mat emission_slab(const ScodGrid& scod, const Vec& y) {
  Mat em(scod.speech_states, scod.noise_states);
  for (int i = 0; i < scod.speech_states; ++i)
    for (int j = 0; j < scod.noise_states; ++j) em(i, j) = scod.log_likelihood(i, j, y);
  return em;
}

}  // namespace

DecodeResult factorial_viterbi(const FactorialModel& model, const Mat& observations, double beam) {
  model.validate();
  const auto T = static_cast<int>(observations.rows());
  require(T >= 1, "empty observation sequence");
  const int Sx = model.speech_chain.num_states();
  const int Sn = model.noise_chain.num_states();

  const Mat logAx = transitions_log(model.speech_chain.transitions);
  const Mat logAn = transitions_log(model.noise_chain.transitions);
  const Vec lpx = log_priors(model.speech_chain.priors);
  const Vec lpn = log_priors(model.noise_chain.priors);

  DecodeResult res;
  Mat delta(Sx, Sn);
  // back-pointers: psi_n[t](i, j') chosen noise predecessor given speech
  // predecessor i; psi_x[t](i', j') chosen speech predecessor
  std::vector<Eigen::MatrixXi> psi_n(static_cast<size_t>(T), Eigen::MatrixXi(Sx, Sn));
  std::vector<Eigen::MatrixXi> psi_x(static_cast<size_t>(T), Eigen::MatrixXi(Sx, Sn));

  {
    const Mat em = emission_slab(model.scod, observations.row(0).transpose());
    for (int i = 0; i < Sx; ++i)
      for (int j = 0; j < Sn; ++j) delta(i, j) = lpx[i] + lpn[j] + em(i, j);
  }

  Mat inner(Sx, Sn);
  Eigen::MatrixXi inner_arg(Sx, Sn);
  for (int t = 1; t < T; ++t) {
    const Mat em = emission_slab(model.scod, observations.row(t).transpose());
    if (std::isfinite(beam)) {
      const double best = delta.maxCoeff();
      for (int i = 0; i < Sx; ++i)
        for (int j = 0; j < Sn; ++j)
          if (delta(i, j) < best - beam) delta(i, j) = kLogZero;
    }
    // within-slice stage: maximize over the previous noise state
    for (int i = 0; i < Sx; ++i) {
      for (int j2 = 0; j2 < Sn; ++j2) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int j = 0; j < Sn; ++j) {
          const double score = delta(i, j) + logAn(j, j2);
          ++res.within_slice_ops;
          if (score > best) {
            best = score;
            arg = j;
          }
        }
        inner(i, j2) = best;
        inner_arg(i, j2) = arg;
      }
    }
    // between-slice stage: maximize over the previous speech state
    Mat next(Sx, Sn);
    for (int i2 = 0; i2 < Sx; ++i2) {
      for (int j2 = 0; j2 < Sn; ++j2) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int i = 0; i < Sx; ++i) {
          const double score = inner(i, j2) + logAx(i, i2);
          ++res.op_count;
          if (score > best) {
            best = score;
            arg = i;
          }
        }
        next(i2, j2) = best + em(i2, j2);
        psi_x[static_cast<size_t>(t)](i2, j2) = arg;
        psi_n[static_cast<size_t>(t)](i2, j2) = inner_arg(arg, j2);
      }
    }
    delta = next;
  }

  int bi = 0, bj = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < Sx; ++i)
    for (int j = 0; j < Sn; ++j)
      if (delta(i, j) > best) {
        best = delta(i, j);
        bi = i;
        bj = j;
      }
  if (best <= kLogZero) throw NumericalError("no reachable factorial decoding path");

  res.log_likelihood = best;
  res.speech_path.resize(static_cast<size_t>(T));
  res.noise_path.resize(static_cast<size_t>(T));
  res.speech_path[static_cast<size_t>(T - 1)] = bi;
  res.noise_path[static_cast<size_t>(T - 1)] = bj;
  for (int t = T - 1; t > 0; --t) {
    const int i2 = res.speech_path[static_cast<size_t>(t)];
    const int j2 = res.noise_path[static_cast<size_t>(t)];
    res.speech_path[static_cast<size_t>(t - 1)] = psi_x[static_cast<size_t>(t)](i2, j2);
    res.noise_path[static_cast<size_t>(t - 1)] = psi_n[static_cast<size_t>(t)](i2, j2);
  }
  if (!model.state_words.empty())
    res.word_sequence = model.word_end_states.empty()
                            ? transcript_from_path(res.speech_path, model.state_words)
                            : transcript_from_path(res.speech_path, model.state_words,
                                                   model.word_end_states);
  return res;
}

DecodeResult megastate_viterbi(const FactorialModel& model, const Mat& observations) {
  model.validate();
  const auto T = static_cast<int>(observations.rows());
  require(T >= 1, "empty observation sequence");
  const int Sx = model.speech_chain.num_states();
  const int Sn = model.noise_chain.num_states();
  const int S = Sx * Sn;  // mega-state m = i * Sn + j (lexicographic)

  const Mat logAx = transitions_log(model.speech_chain.transitions);
  const Mat logAn = transitions_log(model.noise_chain.transitions);
  const Vec lpx = log_priors(model.speech_chain.priors);
  const Vec lpn = log_priors(model.noise_chain.priors);

  DecodeResult res;
  Vec delta(S);
  Eigen::MatrixXi psi(T, S);
  {
    const Mat em = emission_slab(model.scod, observations.row(0).transpose());
    for (int m = 0; m < S; ++m) delta[m] = lpx[m / Sn] + lpn[m % Sn] + em(m / Sn, m % Sn);
  }

  for (int t = 1; t < T; ++t) {
    const Mat em = emission_slab(model.scod, observations.row(t).transpose());
    Vec next(S);
    for (int m2 = 0; m2 < S; ++m2) {
      const int i2 = m2 / Sn, j2 = m2 % Sn;
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int m = 0; m < S; ++m) {
        const double score = delta[m] + logAx(m / Sn, i2) + logAn(m % Sn, j2);
        ++res.op_count;
        if (score > best) {
          best = score;
          arg = m;
        }
      }
      next[m2] = best + em(i2, j2);
      psi(t, m2) = arg;
    }
    delta = next;
  }

  int bm = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < S; ++m)
    if (delta[m] > best) {
      best = delta[m];
      bm = m;
    }
  if (best <= kLogZero) throw NumericalError("no reachable mega-state decoding path");

  res.log_likelihood = best;
  res.speech_path.resize(static_cast<size_t>(T));
  res.noise_path.resize(static_cast<size_t>(T));
  int m = bm;
  for (int t = T - 1; t >= 0; --t) {
    res.speech_path[static_cast<size_t>(t)] = m / Sn;
    res.noise_path[static_cast<size_t>(t)] = m % Sn;
    if (t > 0) m = psi(t, m);
  }
  if (!model.state_words.empty())
    res.word_sequence = model.word_end_states.empty()
                            ? transcript_from_path(res.speech_path, model.state_words)
                            : transcript_from_path(res.speech_path, model.state_words,
                                                   model.word_end_states);
  return res;
}

ComposedHmm compose_grammar(const std::vector<std::pair<std::string, Hmm>>& word_models,
                            const Hmm& silence, bool loop) {
  require(!word_models.empty(), "no word models to compose");
  silence.validate();
  for (const auto& [name, h] : word_models) {
    h.validate();
    require(h.emissions[0].dim() == silence.emissions[0].dim(),
            "word/silence feature spaces differ");
  }

  const int W = static_cast<int>(word_models.size());
  int total = silence.num_states();
  std::vector<int> word_start(static_cast<size_t>(W));
  for (int w = 0; w < W; ++w) {
    word_start[static_cast<size_t>(w)] = total;
    total += word_models[static_cast<size_t>(w)].second.num_states();
  }
  const int sp = total;  // one short-pause state at the end
  total += 1;

  ComposedHmm out;
  out.hmm.topology = Topology::LeftToRight;
  out.hmm.priors = Vec::Zero(total);
  out.hmm.transitions = Mat::Zero(total, total);
  out.hmm.exit_probs = Vec::Zero(total);
  out.hmm.emissions.resize(static_cast<size_t>(total));
  out.state_words.assign(static_cast<size_t>(total), "");
  out.word_end_states.assign(static_cast<size_t>(total), 0);
  for (int w = 0; w < W; ++w)
    out.word_end_states[static_cast<size_t>(word_start[static_cast<size_t>(w)] +
                                            word_models[static_cast<size_t>(w)].second.num_states() -
                                            1)] = 1;

  auto copy_internal = [&](const Hmm& h, int base, double exit_prob,
                           const std::vector<std::pair<int, double>>& exits) {
    const int S = h.num_states();
    for (int i = 0; i < S; ++i) {
      out.hmm.emissions[static_cast<size_t>(base + i)] = h.emissions[static_cast<size_t>(i)];
      const double keep = i == S - 1 ? 1.0 - exit_prob : 1.0;
      for (int j = 0; j < S; ++j)
        out.hmm.transitions(base + i, base + j) = keep * h.transitions(i, j);
      if (i == S - 1)
        for (const auto& [target, p] : exits) out.hmm.transitions(base + i, target) = exit_prob * p;
    }
  };

  // exit fan-out targets
  std::vector<std::pair<int, double>> to_words;
  for (int w = 0; w < W; ++w)
    to_words.emplace_back(word_start[static_cast<size_t>(w)], 1.0 / W);

  // silence: exits to word entries when looping, otherwise absorbs; the cap
  // acts as a word-insertion penalty so noise-only stretches do not hop into
  // short word hypotheses for free
  const double sil_exit = std::min(
      0.05, silence.exit_probs.size() > 0 && silence.exit_probs[silence.num_states() - 1] > 0.0
                ? silence.exit_probs[silence.num_states() - 1]
                : 0.3);
  copy_internal(silence, 0, sil_exit, to_words);

  // words: exit to the short-pause state
  for (int w = 0; w < W; ++w) {
    const Hmm& h = word_models[static_cast<size_t>(w)].second;
    const double word_exit =
        h.exit_probs.size() > 0 && h.exit_probs[h.num_states() - 1] > 0.0
            ? h.exit_probs[h.num_states() - 1]
            : 0.3;
    copy_internal(h, word_start[static_cast<size_t>(w)], word_exit,
                  {{sp, 1.0}});
    for (int i = 0; i < h.num_states(); ++i)
      out.state_words[static_cast<size_t>(word_start[static_cast<size_t>(w)] + i)] =
          word_models[static_cast<size_t>(w)].first;
  }

  // short pause: silence-like emission, loops back to words (when looping)
  // and to the leading silence states
  out.hmm.emissions[static_cast<size_t>(sp)] = silence.emissions[0];
  out.hmm.transitions(sp, sp) = 0.75;
  if (loop) {
    for (int w = 0; w < W; ++w)
      out.hmm.transitions(sp, word_start[static_cast<size_t>(w)]) = 0.10 / W;
    out.hmm.transitions(sp, 0) = 0.15;
  } else {
    out.hmm.transitions(sp, 0) = 0.25;
  }

  // entry: silence-first with a small direct-word allowance
  out.hmm.priors[0] = 0.8;
  for (int w = 0; w < W; ++w) out.hmm.priors[word_start[static_cast<size_t>(w)]] = 0.2 / W;

  for (int i = 0; i < total; ++i) {
    const double s = out.hmm.transitions.row(i).sum();
    require(s > 0.0, "composed row has no outgoing mass");
    out.hmm.transitions.row(i) /= s;
  }
  out.hmm.validate();
  return out;
}

std::vector<std::string> transcript_from_path(const std::vector<int>& path,
                                              const std::vector<std::string>& labeling) {
  std::vector<std::string> words;
  std::string prev;
  for (int s : path) {
    require(s >= 0 && s < static_cast<int>(labeling.size()), "path state outside labeling");
    const std::string& w = labeling[static_cast<size_t>(s)];
    if (!w.empty() && w != prev) words.push_back(w);
    prev = w;
  }
  return words;
}

std::vector<std::string> transcript_from_path(const std::vector<int>& path,
                                              const std::vector<std::string>& labeling,
                                              const std::vector<std::uint8_t>& word_ends) {
  require(word_ends.size() == labeling.size(), "word-end flags do not match the labeling");
  std::vector<std::string> words;
  for (size_t t = 0; t < path.size(); ++t) {
    const int s = path[t];
    require(s >= 0 && s < static_cast<int>(labeling.size()), "path state outside labeling");
    if (!word_ends[static_cast<size_t>(s)]) continue;
    // emit on departure from the exit state (self-loops extend the same word)
    if (t + 1 == path.size() || path[t + 1] != s) words.push_back(labeling[static_cast<size_t>(s)]);
  }
  return words;
}

}  // namespace fsp

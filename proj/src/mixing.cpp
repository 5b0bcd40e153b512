#include "fsp/mixing.hpp"

#include <fstream>
#include <numbers>
#include <sstream>

namespace fsp {

namespace {

constexpr double kActivityThresholdDb = 15.9;
constexpr double kHangoverMs = 200.0;

std::vector<std::string> split_transcript(const std::string& joined) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(joined);
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

std::string join_transcript(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ',';
    out += words[i];
  }
  return out.empty() ? "-" : out;
}

}  // namespace

double segment_level_db(const AudioSegment& seg) {
  seg.validate();
  require(seg.samples.size() > 0, "empty segment");
  const double ms = seg.samples.squaredNorm() / static_cast<double>(seg.samples.size());
  require(ms > 0.0, "segment is all zero");
  return 10.0 * std::log10(ms);
}

double active_level_db(const AudioSegment& seg) {
  seg.validate();
  require(seg.samples.size() > 0, "empty segment");
  const int block = std::max(1, seg.sample_rate / 100);  // 10 ms
  const auto n_blocks = static_cast<int>(seg.samples.size() / block);
  require(n_blocks >= 1, "segment shorter than one activity block");
  const int hangover_blocks = static_cast<int>(kHangoverMs / 10.0);

  Vec energy(n_blocks);
  for (int b = 0; b < n_blocks; ++b)
    energy[b] = seg.samples.segment(static_cast<Eigen::Index>(b) * block, block).squaredNorm() /
                block;

  double active_energy = 0.0;
  Eigen::Index active_samples = 0;
  double peak_db = -std::numeric_limits<double>::infinity();
  int since_active = hangover_blocks + 1;
  for (int b = 0; b < n_blocks; ++b) {
    const double db = energy[b] > 0.0 ? 10.0 * std::log10(energy[b])
                                      : -std::numeric_limits<double>::infinity();
    peak_db = std::max(peak_db, db);
    if (db > peak_db - kActivityThresholdDb)
      since_active = 0;
    else
      ++since_active;
    if (since_active <= hangover_blocks && energy[b] > 0.0) {
      active_energy += energy[b] * block;
      active_samples += block;
    }
  }
  if (active_samples == 0) throw DataError("no active speech in segment");
  return 10.0 * std::log10(active_energy / static_cast<double>(active_samples));
}

double gain_for_snr(double speech_level_db, double noise_level_db, double target_snr_db) {
  if (std::isinf(target_snr_db) && target_snr_db > 0.0) return 0.0;
  require(std::isfinite(speech_level_db) && std::isfinite(noise_level_db) &&
              std::isfinite(target_snr_db),
          "levels must be finite for a finite SNR target");
  return std::pow(10.0, (speech_level_db - noise_level_db - target_snr_db) / 20.0);
}

namespace {

AudioSegment convolve(const AudioSegment& x, const AudioSegment& h) {
  if (h.samples.size() == 0) return x;  // identity channel
  AudioSegment y;
  y.sample_rate = x.sample_rate;
  const Eigen::Index n = x.samples.size() + h.samples.size() - 1;
  y.samples = Vec::Zero(n);
  for (Eigen::Index i = 0; i < x.samples.size(); ++i)
    for (Eigen::Index j = 0; j < h.samples.size(); ++j)
      y.samples[i + j] += x.samples[i] * h.samples[j];
  return y;
}

}  // namespace

MixResult mix(const AudioSegment& x, const AudioSegment& n, const EnvironmentSpec& env) {
  x.validate();
  n.validate();
  MixResult res;
  res.x_channeled = convolve(x, env.channel_impulse);
  const Eigen::Index len = res.x_channeled.samples.size();
  if (n.samples.size() < len)
    throw DataError("noise segment shorter than the (channeled) speech segment");

  std::mt19937_64 rng(env.rng_seed);
  const Eigen::Index max_offset = n.samples.size() - len;
  res.noise_offset =
      max_offset > 0
          ? std::uniform_int_distribution<Eigen::Index>(0, max_offset)(rng)
          : 0;
  const Vec noise_window = n.samples.segment(res.noise_offset, len);

  double gain;
  if (env.fixed_gain) {
    gain = *env.fixed_gain;
    require(gain >= 0.0, "noise gain must be nonnegative");
  } else if (std::isinf(env.target_snr_db) && env.target_snr_db > 0.0) {
    gain = 0.0;
  } else {
    const double speech_db = active_level_db(res.x_channeled);
    AudioSegment nw{noise_window, n.sample_rate};
    const double noise_db = segment_level_db(nw);
    gain = gain_for_snr(speech_db, noise_db, env.target_snr_db);
  }
  res.gain = gain;
  res.noise_scaled.sample_rate = x.sample_rate;
  res.noise_scaled.samples = gain * noise_window;
  res.y.sample_rate = x.sample_rate;
  res.y.samples = res.x_channeled.samples + res.noise_scaled.samples;
  return res;
}

std::vector<StereoUtterance> make_stereo_corpus(const std::vector<LabeledUtterance>& utterances,
                                                const AudioSegment& noise,
                                                const std::vector<double>& snr_list,
                                                const FeatureConfig& cfg,
                                                const EnvironmentSpec& env) {
  require(!utterances.empty() && !snr_list.empty(), "empty corpus inputs");
  std::vector<StereoUtterance> out;
  out.reserve(utterances.size() * snr_list.size());
  std::mt19937_64 seeder(env.rng_seed);
  for (const auto& utt : utterances) {
    for (double snr : snr_list) {
      EnvironmentSpec e = env;
      e.target_snr_db = snr;
      e.rng_seed = seeder();
      const MixResult m = mix(utt.audio, noise, e);
      StereoUtterance su;
      su.transcript = utt.transcript;
      su.snr_db = snr;
      su.x_features = extract_features(m.x_channeled, cfg);
      su.n_features = m.gain > 0.0 ? extract_features(m.noise_scaled, cfg)
                                   : extract_features(
                                         AudioSegment{Vec::Zero(m.y.samples.size()), m.y.sample_rate},
                                         cfg);
      su.y_features = extract_features(m.y, cfg);
      require(su.x_features.size() == su.y_features.size() &&
                  su.n_features.size() == su.y_features.size(),
              "stereo streams misaligned");
      out.push_back(std::move(su));
    }
  }
  return out;
}

void SyntheticVocabulary::validate() const {
  require(word_classes.size() >= 2, "need at least two word classes");
  for (const auto& np : noise_profiles)
    require(!np.states.empty(), "noise profile needs at least one state");
  require(sample_rate > 0, "bad sample rate");
}

SyntheticVocabulary SyntheticVocabulary::default_vocab(int num_words) {
  require(num_words >= 2, "need at least two word classes");
  SyntheticVocabulary v;
  v.sample_rate = 8000;
  // spread base frequencies across the band; inharmonic partials per class
  for (int w = 0; w < num_words; ++w) {
    WordClass wc;
    wc.id = "w" + std::to_string(w);
    // all words share one harmonic series; each word is a spectral bump
    // centered on a different harmonic, so classes overlap and noise erodes
    // the distinguishing cue gradually instead of all-or-nothing
    const double f0 = 500.0;
    const double center = 1.4 + 1.0 * w;  // bump position in harmonic index
    wc.freqs_hz.clear();
    wc.partial_amps.clear();
    for (int k = 1; k <= 6; ++k) {
      wc.freqs_hz.push_back(f0 * k);
      const double z = (static_cast<double>(k) - center) / 0.7;
      wc.partial_amps.push_back(std::exp(-0.5 * z * z));
    }
    wc.min_dur_s = 0.10;
    wc.max_dur_s = 0.18;
    v.word_classes.push_back(wc);
  }
  NoiseProfile np;
  np.id = "machine2";
  // two very different regimes: a quiet peaky hum in the word-base band and a
  // louder band at the partials
  // each regime pairs an in-band masker with a distinct band above the word
  // formant range, so regimes mask speech yet stay identifiable from bands
  // words never occupy
  // quiet hiss with intermittent loud broadband bursts: a time-pooled noise
  // model smears burst energy over the quiet stretches, a regime-aware model
  // contains it
  np.states = {NoiseState{600.0, 0.70, 0.25}, NoiseState{1500.0, 0.55, 8.0}};
  np.mean_dwell_frames = 80.0;
  np.level = 0.1;
  v.noise_profiles.push_back(np);
  return v;
}

AudioSegment synthesize_word(const WordClass& word, int sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dur_dist(word.min_dur_s, word.max_dur_s);
  std::uniform_real_distribution<double> jit(-word.freq_jitter, word.freq_jitter);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const auto n = static_cast<Eigen::Index>(dur_dist(rng) * sample_rate);

  AudioSegment seg;
  seg.sample_rate = sample_rate;
  seg.samples = Vec::Zero(n);
  // slow amplitude modulation so word energy breathes within a token
  std::uniform_real_distribution<double> am_rate(6.0, 14.0);
  const double fm = am_rate(rng);
  const double am_ph = phase(rng);
  double amp_norm = 0.0;
  for (size_t k = 0; k < word.freqs_hz.size(); ++k)
    amp_norm += word.partial_amps.empty() ? 1.0 : word.partial_amps[k];
  // each "partial" is a narrowband noise band (two-pole resonator) around the
  // template frequency, so word tokens carry vowel-like stochastic texture
  // rather than deterministic tones
  std::normal_distribution<double> white(0.0, 1.0);
  for (size_t k = 0; k < word.freqs_hz.size(); ++k) {
    const double fj = word.freqs_hz[k] * (1.0 + jit(rng));
    const double rel = word.partial_amps.empty() ? 1.0 : word.partial_amps[k];
    const double amp = word.amplitude * rel / amp_norm;
    const double theta = 2.0 * std::numbers::pi * fj / sample_rate;
    const double r = 0.95;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double y = a1 * y1 + a2 * y2 + (1.0 - r) * white(rng);
      const double am =
          1.0 - 0.5 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fm * t / sample_rate + am_ph));
      seg.samples[t] += am * amp * 3.0 * y;
      y2 = y1;
      y1 = y;
    }
  }
  // raised-cosine attack/decay envelope
  const Eigen::Index ramp = std::min<Eigen::Index>(n / 4, sample_rate / 50);
  for (Eigen::Index t = 0; t < ramp; ++t) {
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * t / ramp);
    seg.samples[t] *= w;
    seg.samples[n - 1 - t] *= w;
  }
  return seg;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticVocabulary& vocab, int num_utterances,
                                          int min_words, int max_words, uint64_t seed) {
  vocab.validate();
  require(min_words >= 1 && max_words >= min_words, "bad words-per-utterance range");
  SyntheticCorpus corpus;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word_count(min_words, max_words);
  std::uniform_int_distribution<size_t> word_pick(0, vocab.word_classes.size() - 1);
  std::uniform_real_distribution<double> gap_dist(0.06, 0.12);
  std::normal_distribution<double> dither(0.0, 1e-4);

  const int sr = vocab.sample_rate;
  for (int u = 0; u < num_utterances; ++u) {
    std::vector<AudioSegment> parts;
    std::vector<std::string> transcript;
    auto silence = [&](double seconds) {
      AudioSegment s;
      s.sample_rate = sr;
      s.samples = Vec::Zero(static_cast<Eigen::Index>(seconds * sr));
      for (Eigen::Index t = 0; t < s.samples.size(); ++t) s.samples[t] = dither(rng);
      return s;
    };
    parts.push_back(silence(0.12));
    const int words = word_count(rng);
    for (int w = 0; w < words; ++w) {
      const auto& wc = vocab.word_classes[word_pick(rng)];
      parts.push_back(synthesize_word(wc, sr, rng));
      transcript.push_back(wc.id);
      parts.push_back(silence(w + 1 < words ? gap_dist(rng) : 0.12));
    }
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.samples.size();
    LabeledUtterance utt;
    utt.audio.sample_rate = sr;
    utt.audio.samples.resize(total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      utt.audio.samples.segment(at, p.samples.size()) = p.samples;
      at += p.samples.size();
    }
    utt.transcript = std::move(transcript);
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

GeneratedNoise generate_noise(const NoiseProfile& profile, Eigen::Index num_samples,
                              int sample_rate, uint64_t seed) {
  require(!profile.states.empty(), "noise profile has no states");
  GeneratedNoise out;
  out.audio.sample_rate = sample_rate;
  out.audio.samples = Vec::Zero(num_samples);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> white(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> weights = profile.state_weights;
  if (weights.empty()) weights.assign(profile.states.size(), 1.0);
  require(weights.size() == profile.states.size(), "state_weights size mismatch");
  std::discrete_distribution<size_t> state_pick(weights.begin(), weights.end());

  const int frame = std::max(1, sample_rate / 100);  // 10 ms
  const double switch_prob =
      profile.states.size() > 1 ? 1.0 / std::max(1.0, profile.mean_dwell_frames) : 0.0;

  size_t state = state_pick(rng);
  double y1 = 0.0, y2 = 0.0;  // resonator memory carried across switches
  double z1 = 0.0, z2 = 0.0;  // secondary-band resonator memory
  Eigen::Index t = 0;
  while (t < num_samples) {
    out.frame_states.push_back(static_cast<int>(state));
    const NoiseState& ns = profile.states[state];
    const double theta = 2.0 * std::numbers::pi * ns.center_hz / sample_rate;
    const double r = ns.bandwidth;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    const bool marked = ns.marker_hz > 0.0 && ns.marker_gain > 0.0;
    const double mtheta = 2.0 * std::numbers::pi * ns.marker_hz / sample_rate;
    const double b1 = 2.0 * r * std::cos(mtheta);
    const double b2 = -r * r;
    const Eigen::Index end = std::min<Eigen::Index>(t + frame, num_samples);
    for (; t < end; ++t) {
      const double y = a1 * y1 + a2 * y2 + (1.0 - r) * white(rng);
      double sample = y;
      if (marked) {
        const double z = b1 * z1 + b2 * z2 + (1.0 - r) * white(rng);
        sample += ns.marker_gain * z;
        z2 = z1;
        z1 = z;
      }
      out.audio.samples[t] = ns.gain * sample;
      y2 = y1;
      y1 = y;
    }
    if (uni(rng) < switch_prob) {
      size_t next = state_pick(rng);
      while (profile.states.size() > 1 && next == state) next = state_pick(rng);
      state = next;
    }
  }
  const double rms = std::sqrt(out.audio.samples.squaredNorm() /
                               static_cast<double>(std::max<Eigen::Index>(1, num_samples)));
  if (rms > 0.0) out.audio.samples *= profile.level / rms;
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  require(out.good(), "cannot write manifest: " + path);
  for (const auto& r : rows)
    out << r.utterance_id << ' ' << r.wav_path << ' ' << join_transcript(r.transcript) << ' '
        << r.snr_db << ' ' << r.noise_id << ' ' << r.seed << '\n';
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open manifest: " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestRow r;
    std::string transcript;
    std::string snr;  // stod handles "inf"/"-inf", which operator>> does not
    ss >> r.utterance_id >> r.wav_path >> transcript >> snr >> r.noise_id >> r.seed;
    require(!ss.fail(), "malformed manifest line: " + line);
    try {
      r.snr_db = std::stod(snr);
    } catch (const std::exception&) {
      throw DataError("malformed manifest SNR: " + snr);
    }
    r.transcript = transcript == "-" ? std::vector<std::string>{} : split_transcript(transcript);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace fsp

#ifndef FSP_MIXING_HPP
#define FSP_MIXING_HPP

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fsp/audio.hpp"
#include "fsp/common.hpp"
#include "fsp/features.hpp"

namespace fsp {

struct EnvironmentSpec {
  AudioSegment channel_impulse;  // empty samples => identity channel
  double target_snr_db = std::numeric_limits<double>::infinity();
  std::optional<double> fixed_gain;  // bypasses level measurement when set
  uint64_t rng_seed = 0;
};

// Active speech level (dB re unit amplitude) from an energy-threshold
// hysteresis detector: 10 ms blocks, activity threshold 15.9 dB below the
// running peak envelope, 200 ms hangover. Approximates ITU P.56; the SNR
// tolerance elsewhere is defined against this meter.
double active_level_db(const AudioSegment& seg);

// Plain full-segment level (dB of mean squared amplitude).
double segment_level_db(const AudioSegment& seg);

// g = 10^((speech_level - noise_level - target_snr) / 20); 0 for infinite SNR.
double gain_for_snr(double speech_level_db, double noise_level_db, double target_snr_db);

struct MixResult {
  AudioSegment y;
  AudioSegment x_channeled;   // x * h, same length as y
  AudioSegment noise_scaled;  // g * n over the overlapping window
  double gain = 0.0;
  Eigen::Index noise_offset = 0;
};

// y = (x * h) + g * n with the noise window taken at a seeded random offset.
MixResult mix(const AudioSegment& x, const AudioSegment& n, const EnvironmentSpec& env);

struct StereoUtterance {
  FeatureSequence x_features, n_features, y_features;
  std::vector<std::string> transcript;
  double snr_db = 0.0;
};

struct LabeledUtterance {
  AudioSegment audio;
  std::vector<std::string> transcript;
};

std::vector<StereoUtterance> make_stereo_corpus(const std::vector<LabeledUtterance>& utterances,
                                                const AudioSegment& noise,
                                                const std::vector<double>& snr_list,
                                                const FeatureConfig& cfg,
                                                const EnvironmentSpec& env);

// ---- synthetic desk-scale corpus --------------------------------------

struct WordClass {
  std::string id;
  std::vector<double> freqs_hz;      // sinusoid template
  std::vector<double> partial_amps;  // per-partial weights; empty = equal
  double min_dur_s = 0.18;
  double max_dur_s = 0.30;
  double freq_jitter = 0.015;  // relative
  double amplitude = 0.3;
};

struct NoiseState {
  double center_hz = 500.0;  // resonator band emphasis
  double bandwidth = 0.97;   // pole radius
  double gain = 1.0;         // relative level of this regime
  double marker_hz = 0.0;    // optional secondary band (0 = none)
  double marker_gain = 0.0;  // level of the secondary band relative to gain
};

struct NoiseProfile {
  std::string id;
  std::vector<NoiseState> states;
  std::vector<double> state_weights;  // relative occupancy; empty = uniform
  double mean_dwell_frames = 50.0;    // 10 ms frames
  double level = 0.1;                 // target RMS
};

struct SyntheticVocabulary {
  std::vector<WordClass> word_classes;
  std::vector<NoiseProfile> noise_profiles;
  int sample_rate = 8000;

  void validate() const;
  static SyntheticVocabulary default_vocab(int num_words = 4);
};

struct SyntheticCorpus {
  std::vector<LabeledUtterance> utterances;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticVocabulary& vocab, int num_utterances,
                                          int min_words, int max_words, uint64_t seed);

struct GeneratedNoise {
  AudioSegment audio;
  std::vector<int> frame_states;  // ground-truth state per 10 ms frame
};

GeneratedNoise generate_noise(const NoiseProfile& profile, Eigen::Index num_samples,
                              int sample_rate, uint64_t seed);

AudioSegment synthesize_word(const WordClass& word, int sample_rate, std::mt19937_64& rng);

// Corpus manifest rows: utterance-id wav-path transcript snr_db noise-id seed
struct ManifestRow {
  std::string utterance_id;
  std::string wav_path;
  std::vector<std::string> transcript;  // joined with ',' on disk
  double snr_db = 0.0;
  std::string noise_id;
  uint64_t seed = 0;
};

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

}  // namespace fsp

#endif

#ifndef FSP_FEATURES_HPP
#define FSP_FEATURES_HPP

#include <string>
#include <vector>

#include "fsp/audio.hpp"
#include "fsp/common.hpp"

namespace fsp {

enum class FeatureSpace : uint32_t { Mfcc0d26 = 0, LogMelFBd42 = 1, RawFilterbank = 2 };

std::string feature_space_name(FeatureSpace s);
FeatureSpace feature_space_from_name(const std::string& name);

enum class WindowKind : uint32_t { Rectangular = 0, Hamming = 1, Hanning = 2 };

struct FeatureConfig {
  int frame_length = 200;   // 25 ms at 8 kHz
  int hop_length = 80;      // 10 ms at 8 kHz
  WindowKind window = WindowKind::Hamming;
  int fft_size = 256;
  int num_filters = 13;
  int num_cepstra = 13;
  int delta_window = 2;
  FeatureSpace space_id = FeatureSpace::Mfcc0d26;
  double energy_floor = 1e-10;
  int sample_rate = 8000;

  void validate() const;
  // static dimension before deltas are appended
  int static_dim() const;

  static FeatureConfig mfcc0d26(int sample_rate = 8000);
  static FeatureConfig log_mel_fbd42(int sample_rate = 8000);
};

struct FilterbankMatrix {
  Mat weights;  // [num_filters x (fft_size/2 + 1)], nonnegative
};

struct DctMatrix {
  Mat forward;  // C  [num_cepstra x num_filters]
  Mat inverse;  // C^-1 (= C^T for the orthonormal scaling used here)
};

struct FeatureVector {
  Vec statics;
  Vec deltas;
  FeatureSpace space_id = FeatureSpace::Mfcc0d26;

  int dim() const { return static_cast<int>(statics.size() + deltas.size()); }
  Vec full() const {
    Vec v(dim());
    v << statics, deltas;
    return v;
  }
};

using FeatureSequence = std::vector<FeatureVector>;

Vec window_function(WindowKind kind, int length);

// HTK-style mel-spaced triangular filters over [0, nyquist].
FilterbankMatrix make_mel_filterbank(const FeatureConfig& cfg);

// Orthonormal DCT-II rows; inverse is the transpose (exact inverse when square).
DctMatrix make_dct(int num_cepstra, int num_filters);

std::vector<Vec> frame_and_window(const AudioSegment& seg, const FeatureConfig& cfg);
Vec power_spectrum(const Vec& frame, const FeatureConfig& cfg);
CVec complex_spectrum(const Vec& frame, const FeatureConfig& cfg);
Vec filterbank_energies(const Vec& power, const FilterbankMatrix& fb);
Vec cepstra_from_energies(const Vec& energies, const DctMatrix& dct, double floor);
Vec energies_from_cepstra(const Vec& cepstra, const DctMatrix& dct);
FeatureSequence append_deltas(const std::vector<Vec>& statics, int delta_window,
                              FeatureSpace space_id);
FeatureSequence extract_features(const AudioSegment& seg, const FeatureConfig& cfg);

Mat sequence_matrix(const FeatureSequence& seq);  // [frames x dim]

// Binary feature container with named streams (see README for the layout).
struct FeatureStream {
  std::string name;
  FeatureSequence frames;
};

void write_feature_container(const std::string& path, const FeatureConfig& cfg,
                             const std::vector<FeatureStream>& streams);
std::vector<FeatureStream> read_feature_container(const std::string& path, FeatureConfig* cfg_out = nullptr);

}  // namespace fsp

#endif

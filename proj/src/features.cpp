#include "fsp/features.hpp"

#include <fstream>
#include <numbers>

#include "fsp/fft.hpp"

namespace fsp {

std::string feature_space_name(FeatureSpace s) {
  switch (s) {
    case FeatureSpace::Mfcc0d26: return "MFCC0d26";
    case FeatureSpace::LogMelFBd42: return "LogMelFBd42";
    case FeatureSpace::RawFilterbank: return "raw-filterbank";
  }
  throw DataError("unknown feature space");
}

FeatureSpace feature_space_from_name(const std::string& name) {
  if (name == "MFCC0d26") return FeatureSpace::Mfcc0d26;
  if (name == "LogMelFBd42") return FeatureSpace::LogMelFBd42;
  if (name == "raw-filterbank") return FeatureSpace::RawFilterbank;
  throw DataError("unknown feature space name: " + name);
}

void FeatureConfig::validate() const {
  require(frame_length > 0 && hop_length > 0, "frame/hop must be positive");
  require(frame_length <= fft_size, "frame_length must not exceed fft_size");
  require(is_power_of_two(fft_size), "fft_size must be a power of two");
  require(num_cepstra <= num_filters, "num_cepstra must not exceed num_filters");
  require(delta_window >= 1, "delta_window must be >= 1");
  require(energy_floor > 0.0, "energy_floor must be positive");
  require(sample_rate > 0, "sample_rate must be positive");
  if (space_id == FeatureSpace::Mfcc0d26)
    require(num_filters == 13 && num_cepstra == 13,
            "MFCC0d26 uses 13 filters and 13 cepstra (full square DCT)");
}

int FeatureConfig::static_dim() const {
  return space_id == FeatureSpace::Mfcc0d26 ? num_cepstra : num_filters;
}

FeatureConfig FeatureConfig::mfcc0d26(int sample_rate) {
  FeatureConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.frame_length = sample_rate / 40;  // 25 ms
  cfg.hop_length = sample_rate / 100;   // 10 ms
  cfg.space_id = FeatureSpace::Mfcc0d26;
  cfg.num_filters = 13;
  cfg.num_cepstra = 13;
  return cfg;
}

FeatureConfig FeatureConfig::log_mel_fbd42(int sample_rate) {
  FeatureConfig cfg = mfcc0d26(sample_rate);
  cfg.space_id = FeatureSpace::LogMelFBd42;
  cfg.num_filters = 21;
  cfg.num_cepstra = 21;
  return cfg;
}

Vec window_function(WindowKind kind, int length) {
  Vec w(length);
  const double N = static_cast<double>(length - 1);
  for (int i = 0; i < length; ++i) {
    switch (kind) {
      case WindowKind::Rectangular: w[i] = 1.0; break;
      case WindowKind::Hamming:
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / N);
        break;
      case WindowKind::Hanning:
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / N);
        break;
    }
  }
  return w;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

FilterbankMatrix make_mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const int bins = cfg.fft_size / 2 + 1;
  const double nyquist = cfg.sample_rate / 2.0;
  const int M = cfg.num_filters;

  // M+2 equally spaced mel points from 0 to nyquist
  std::vector<double> centers_hz(M + 2);
  const double mel_hi = hz_to_mel(nyquist);
  for (int m = 0; m < M + 2; ++m) centers_hz[m] = mel_to_hz(mel_hi * m / (M + 1));

  FilterbankMatrix fb;
  fb.weights = Mat::Zero(M, bins);
  const double hz_per_bin = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  for (int m = 0; m < M; ++m) {
    const double lo = centers_hz[m], mid = centers_hz[m + 1], hi = centers_hz[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * hz_per_bin;
      if (f > lo && f < mid)
        fb.weights(m, k) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb.weights(m, k) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

DctMatrix make_dct(int num_cepstra, int num_filters) {
  require(num_cepstra >= 1 && num_cepstra <= num_filters, "bad DCT shape");
  DctMatrix dct;
  dct.forward.resize(num_cepstra, num_filters);
  const double N = static_cast<double>(num_filters);
  for (int k = 0; k < num_cepstra; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
    for (int n = 0; n < num_filters; ++n)
      dct.forward(k, n) = scale * std::cos(std::numbers::pi * k * (n + 0.5) / N);
  }
  dct.inverse = dct.forward.transpose();
  return dct;
}

std::vector<Vec> frame_and_window(const AudioSegment& seg, const FeatureConfig& cfg) {
  cfg.validate();
  seg.validate();
  const auto n = static_cast<int>(seg.samples.size());
  if (n < cfg.frame_length)
    throw DataError("segment too short: " + std::to_string(n) + " samples < one frame");
  const int frames = (n - cfg.frame_length) / cfg.hop_length + 1;
  const Vec win = window_function(cfg.window, cfg.frame_length);
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(frames));
  for (int t = 0; t < frames; ++t)
    out.push_back(seg.samples.segment(t * cfg.hop_length, cfg.frame_length).cwiseProduct(win));
  return out;
}

CVec complex_spectrum(const Vec& frame, const FeatureConfig& cfg) {
  require(frame.allFinite(), "non-finite frame");
  require(frame.size() <= cfg.fft_size, "frame longer than fft_size");
  return real_dft_half(frame, cfg.fft_size);
}

Vec power_spectrum(const Vec& frame, const FeatureConfig& cfg) {
  const CVec spec = complex_spectrum(frame, cfg);
  return spec.cwiseAbs2();
}

Vec filterbank_energies(const Vec& power, const FilterbankMatrix& fb) {
  require(power.size() == fb.weights.cols(), "spectrum/filterbank shape mismatch");
  return fb.weights * power;
}

Vec cepstra_from_energies(const Vec& energies, const DctMatrix& dct, double floor) {
  require(floor > 0.0, "energy floor must be positive");
  require(energies.size() == dct.forward.cols(), "energies/DCT shape mismatch");
  return dct.forward * energies.cwiseMax(floor).array().log().matrix();
}

Vec energies_from_cepstra(const Vec& cepstra, const DctMatrix& dct) {
  require(cepstra.size() == dct.inverse.cols(), "cepstra/DCT shape mismatch");
  return (dct.inverse * cepstra).array().exp().matrix();
}

FeatureSequence append_deltas(const std::vector<Vec>& statics, int delta_window,
                              FeatureSpace space_id) {
  require(!statics.empty(), "empty static sequence");
  const int T = static_cast<int>(statics.size());
  const int W = delta_window;
  double denom = 0.0;
  for (int th = 1; th <= W; ++th) denom += 2.0 * th * th;

  FeatureSequence out(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    Vec d = Vec::Zero(statics[0].size());
    for (int th = 1; th <= W; ++th) {
      const Vec& fwd = statics[static_cast<size_t>(std::min(t + th, T - 1))];
      const Vec& bwd = statics[static_cast<size_t>(std::max(t - th, 0))];
      d += th * (fwd - bwd);
    }
    out[static_cast<size_t>(t)] = FeatureVector{statics[static_cast<size_t>(t)], d / denom, space_id};
  }
  return out;
}

FeatureSequence extract_features(const AudioSegment& seg, const FeatureConfig& cfg) {
  const auto frames = frame_and_window(seg, cfg);
  const FilterbankMatrix fb = make_mel_filterbank(cfg);
  const DctMatrix dct = make_dct(cfg.num_cepstra, cfg.num_filters);

  std::vector<Vec> statics;
  statics.reserve(frames.size());
  for (const Vec& frame : frames) {
    const Vec energies = filterbank_energies(power_spectrum(frame, cfg), fb);
    if (cfg.space_id == FeatureSpace::Mfcc0d26)
      statics.push_back(cepstra_from_energies(energies, dct, cfg.energy_floor));
    else if (cfg.space_id == FeatureSpace::LogMelFBd42)
      statics.push_back(energies.cwiseMax(cfg.energy_floor).array().log().matrix());
    else
      statics.push_back(energies);
  }
  return append_deltas(statics, cfg.delta_window, cfg.space_id);
}

Mat sequence_matrix(const FeatureSequence& seq) {
  require(!seq.empty(), "empty feature sequence");
  Mat m(static_cast<Eigen::Index>(seq.size()), seq[0].dim());
  for (size_t t = 0; t < seq.size(); ++t) m.row(static_cast<Eigen::Index>(t)) = seq[t].full();
  return m;
}

namespace {

constexpr char kFeatMagic[8] = {'F', 'S', 'P', 'F', 'E', 'A', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), "truncated feature container");
  return v;
}

}  // namespace

void write_feature_container(const std::string& path, const FeatureConfig& cfg,
                             const std::vector<FeatureStream>& streams) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write feature container: " + path);
  out.write(kFeatMagic, 8);
  put<uint32_t>(out, 1);  // version
  put<uint32_t>(out, static_cast<uint32_t>(cfg.space_id));
  const uint32_t dim = static_cast<uint32_t>(2 * cfg.static_dim());
  put<uint32_t>(out, dim);
  put<uint32_t>(out, static_cast<uint32_t>(cfg.frame_length));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.hop_length));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.fft_size));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.num_filters));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.num_cepstra));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.delta_window));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.sample_rate));
  put<uint32_t>(out, static_cast<uint32_t>(cfg.window));
  put<uint32_t>(out, static_cast<uint32_t>(streams.size()));
  for (const auto& s : streams) {
    put<uint32_t>(out, static_cast<uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put<uint64_t>(out, static_cast<uint64_t>(s.frames.size()));
    for (const auto& f : s.frames) {
      require(f.dim() == static_cast<int>(dim), "frame dimension mismatch in stream " + s.name);
      const Vec v = f.full();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(sizeof(double) * dim));
    }
  }
}

std::vector<FeatureStream> read_feature_container(const std::string& path, FeatureConfig* cfg_out) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open feature container: " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kFeatMagic, 8) == 0, "bad feature container magic");
  const uint32_t version = get<uint32_t>(in);
  require(version == 1, "unsupported feature container version");
  FeatureConfig cfg;
  cfg.space_id = static_cast<FeatureSpace>(get<uint32_t>(in));
  const uint32_t dim = get<uint32_t>(in);
  cfg.frame_length = static_cast<int>(get<uint32_t>(in));
  cfg.hop_length = static_cast<int>(get<uint32_t>(in));
  cfg.fft_size = static_cast<int>(get<uint32_t>(in));
  cfg.num_filters = static_cast<int>(get<uint32_t>(in));
  cfg.num_cepstra = static_cast<int>(get<uint32_t>(in));
  cfg.delta_window = static_cast<int>(get<uint32_t>(in));
  cfg.sample_rate = static_cast<int>(get<uint32_t>(in));
  cfg.window = static_cast<WindowKind>(get<uint32_t>(in));
  require(dim == static_cast<uint32_t>(2 * cfg.static_dim()), "inconsistent container dimension");
  const uint32_t nstreams = get<uint32_t>(in);
  std::vector<FeatureStream> streams(nstreams);
  for (auto& s : streams) {
    const uint32_t name_len = get<uint32_t>(in);
    s.name.resize(name_len);
    in.read(s.name.data(), name_len);
    const uint64_t frames = get<uint64_t>(in);
    s.frames.resize(frames);
    const int sd = cfg.static_dim();
    for (auto& f : s.frames) {
      Vec v(dim);
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * dim));
      require(in.good(), "truncated feature container");
      f.statics = v.head(sd);
      f.deltas = v.tail(sd);
      f.space_id = cfg.space_id;
    }
  }
  if (cfg_out) *cfg_out = cfg;
  return streams;
}

}  // namespace fsp

#include <doctest.h>

#include <complex>
#include <filesystem>
#include <random>

#include "fsp/features.hpp"
#include "fsp/fft.hpp"
#include "helpers.hpp"

using namespace fsp;
using namespace fsp::testing;

namespace {

// quadratic-time DFT oracle
CVec naive_dft(const Vec& x, int n) {
  CVec out(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int t = 0; t < x.size() && t < n; ++t)
      acc += x[t] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * t / n));
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("real DFT matches the quadratic oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = random_vec(rng, 200);
    const CVec fast = real_dft_half(x, 256);
    const CVec slow = naive_dft(x, 256);
    REQUIRE(fast.size() == slow.size());
    for (int k = 0; k < fast.size(); ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
  }
}

TEST_CASE("fft rejects non-power-of-two sizes") {
  CHECK(is_power_of_two(256));
  CHECK_FALSE(is_power_of_two(200));
  std::vector<std::complex<double>> v(6);
  CHECK_THROWS_AS(fft_inplace(v), DataError);
}

TEST_CASE("window functions") {
  const Vec rect = window_function(WindowKind::Rectangular, 8);
  CHECK(rect.minCoeff() == 1.0);
  const Vec ham = window_function(WindowKind::Hamming, 101);
  CHECK(ham[0] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(ham[50] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 101; ++i) CHECK(ham[i] == doctest::Approx(ham[100 - i]).epsilon(1e-12));
  const Vec han = window_function(WindowKind::Hanning, 101);
  CHECK(han[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(han[50] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mel filterbank shape and coverage") {
  const FeatureConfig cfg = FeatureConfig::mfcc0d26();
  const FilterbankMatrix fb = make_mel_filterbank(cfg);
  REQUIRE(fb.weights.rows() == cfg.num_filters);
  REQUIRE(fb.weights.cols() == cfg.fft_size / 2 + 1);
  CHECK(fb.weights.minCoeff() >= 0.0);
  // every filter has support, and peak bins ascend with filter index
  int prev_peak = -1;
  for (int f = 0; f < fb.weights.rows(); ++f) {
    CHECK(fb.weights.row(f).maxCoeff() > 0.0);
    int peak = 0;
    fb.weights.row(f).maxCoeff(&peak);
    CHECK(peak > prev_peak);
    prev_peak = peak;
  }
}

TEST_CASE("orthonormal DCT round trip") {
  const DctMatrix dct = make_dct(13, 13);
  const Mat eye = dct.forward * dct.inverse;
  CHECK((eye - Mat::Identity(13, 13)).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec e(13);
    for (int i = 0; i < 13; ++i) e[i] = u(rng);
    const Vec cep = cepstra_from_energies(e, dct, 1e-10);
    const Vec back = energies_from_cepstra(cep, dct);
    CHECK(((back - e).cwiseAbs().cwiseQuotient(e)).maxCoeff() < 1e-8);
  }
}

TEST_CASE("framing count and too-short error") {
  AudioSegment seg;
  seg.sample_rate = 8000;
  seg.samples = Vec::Zero(1000);
  const FeatureConfig cfg = FeatureConfig::mfcc0d26();
  const auto frames = frame_and_window(seg, cfg);
  CHECK(static_cast<int>(frames.size()) == (1000 - cfg.frame_length) / cfg.hop_length + 1);

  seg.samples = Vec::Zero(50);
  CHECK_THROWS_AS(static_cast<void>(frame_and_window(seg, cfg)), DataError);
}

TEST_CASE("delta regression against a direct formula") {
  std::mt19937_64 rng(7);
  std::vector<Vec> statics;
  for (int t = 0; t < 12; ++t) statics.push_back(random_vec(rng, 3));
  const int D = 2;
  const auto seq = append_deltas(statics, D, FeatureSpace::RawFilterbank);
  REQUIRE(seq.size() == statics.size());
  const auto at = [&](int t) {
    const int c = std::clamp(t, 0, static_cast<int>(statics.size()) - 1);
    return statics[static_cast<size_t>(c)];
  };
  double denom = 0.0;
  for (int k = 1; k <= D; ++k) denom += 2.0 * k * k;
  for (int t = 0; t < 12; ++t) {
    Vec expect = Vec::Zero(3);
    for (int k = 1; k <= D; ++k) expect += k * (at(t + k) - at(t - k));
    expect /= denom;
    CHECK((seq[static_cast<size_t>(t)].deltas - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("feature spaces have their advertised dimensions") {
  std::mt19937_64 rng(3);
  AudioSegment seg;
  seg.sample_rate = 8000;
  seg.samples = random_vec(rng, 4000, -0.5, 0.5);

  const auto mfcc = extract_features(seg, FeatureConfig::mfcc0d26());
  REQUIRE_FALSE(mfcc.empty());
  CHECK(mfcc[0].dim() == 26);
  CHECK(mfcc[0].space_id == FeatureSpace::Mfcc0d26);

  const auto fb = extract_features(seg, FeatureConfig::log_mel_fbd42());
  CHECK(fb[0].dim() == 42);
  CHECK(fb[0].space_id == FeatureSpace::LogMelFBd42);
}

TEST_CASE("feature container round trip") {
  std::mt19937_64 rng(9);
  AudioSegment seg;
  seg.sample_rate = 8000;
  seg.samples = random_vec(rng, 3000, -0.5, 0.5);
  const FeatureConfig cfg = FeatureConfig::mfcc0d26();
  std::vector<FeatureStream> streams;
  streams.push_back({"x", extract_features(seg, cfg)});
  seg.samples = random_vec(rng, 3000, -0.5, 0.5);
  streams.push_back({"y", extract_features(seg, cfg)});

  const std::string path =
      (std::filesystem::temp_directory_path() / "fsp_feat_test.bin").string();
  write_feature_container(path, cfg, streams);
  FeatureConfig cfg2;
  const auto back = read_feature_container(path, &cfg2);
  CHECK(cfg2.space_id == cfg.space_id);
  CHECK(cfg2.frame_length == cfg.frame_length);
  REQUIRE(back.size() == streams.size());
  for (size_t s = 0; s < back.size(); ++s) {
    CHECK(back[s].name == streams[s].name);
    REQUIRE(back[s].frames.size() == streams[s].frames.size());
    for (size_t t = 0; t < back[s].frames.size(); ++t) {
      CHECK(back[s].frames[t].full() == streams[s].frames[t].full());
    }
  }
  std::filesystem::remove(path);

  // truncation is detected
  write_feature_container(path, cfg, streams);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(static_cast<void>(read_feature_container(path)), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("feature space names round trip") {
  for (FeatureSpace s :
       {FeatureSpace::Mfcc0d26, FeatureSpace::LogMelFBd42, FeatureSpace::RawFilterbank})
    CHECK(feature_space_from_name(feature_space_name(s)) == s);
  CHECK_THROWS_AS(static_cast<void>(feature_space_from_name("bogus")), DataError);
}

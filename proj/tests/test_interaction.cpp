#include <doctest.h>

#include <random>

#include "fsp/features.hpp"
#include "fsp/interaction.hpp"
#include "helpers.hpp"

using namespace fsp;
using namespace fsp::testing;

namespace {

struct FrontEnd {
  FeatureConfig cfg = FeatureConfig::mfcc0d26();
  FilterbankMatrix fb;
  DctMatrix dct;
  FrontEnd() : fb(make_mel_filterbank(cfg)), dct(make_dct(13, 13)) {}
};

}  // namespace

TEST_CASE("additive mixing decomposes per bin and per filter with the true phase factor") {
  FrontEnd fe;
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec x = random_vec(rng, fe.cfg.frame_length, -0.5, 0.5);
    const Vec n = random_vec(rng, fe.cfg.frame_length, -0.3, 0.3);
    const Vec y = x + n;  // identity channel, shared framing

    const CVec X = complex_spectrum(x, fe.cfg);
    const CVec N = complex_spectrum(n, fe.cfg);
    const CVec Y = complex_spectrum(y, fe.cfg);

    // per-bin: |Y|^2 = |X|^2 + |N|^2 + 2 Re(X conj N)
    for (int k = 0; k < X.size(); ++k) {
      const double lhs = std::norm(Y[k]);
      const double rhs = std::norm(X[k]) + std::norm(N[k]) + 2.0 * (X[k] * std::conj(N[k])).real();
      CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
    }

    // per-filter with alpha from the aligned spectra
    const Vec alpha = true_alpha_from_spectra(X, CVec(), N, fe.fb);
    CHECK(alpha.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    auto energies = [&](const Vec& frame) {
      return filterbank_energies(power_spectrum(frame, fe.cfg), fe.fb);
    };
    const Vec ex = energies(x), en = energies(n), ey = energies(y);
    for (int i = 0; i < ex.size(); ++i) {
      const double rhs = ex[i] + en[i] + 2.0 * alpha[i] * std::sqrt(ex[i] * en[i]);
      CHECK(std::abs(ey[i] - rhs) <= 1e-8 * std::max(std::abs(ey[i]), std::abs(rhs)));
    }
  }
}

TEST_CASE("true alpha is zero on zero-energy filters") {
  FrontEnd fe;
  const CVec X = CVec::Zero(fe.cfg.fft_size / 2 + 1);
  CVec N = CVec::Zero(fe.cfg.fft_size / 2 + 1);
  N[10] = std::complex<double>(1.0, 0.0);
  const Vec alpha = true_alpha_from_spectra(X, CVec(), N, fe.fb);
  CHECK(alpha.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cepstral mismatch inverts exactly on the square-DCT path") {
  FrontEnd fe;
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_vec(rng, fe.cfg.frame_length, -0.5, 0.5);
    const Vec n = random_vec(rng, fe.cfg.frame_length, -0.3, 0.3);
    const Vec y = x + n;
    const Vec alpha = true_alpha_from_spectra(complex_spectrum(x, fe.cfg), CVec(),
                                              complex_spectrum(n, fe.cfg), fe.fb);
    auto cep = [&](const Vec& frame) {
      return cepstra_from_energies(filterbank_energies(power_spectrum(frame, fe.cfg), fe.fb),
                                   fe.dct, 1e-10);
    };
    const Vec y_c = mismatch_cepstral(cep(x), Vec::Zero(13), cep(n), fe.dct, alpha);
    CHECK((y_c - cep(y)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("VTS Jacobians match central finite differences") {
  FrontEnd fe;
  std::mt19937_64 rng(43);
  const double step = 1e-5;
  for (double a : {0.0, 2.5}) {
    const Vec alpha = Vec::Constant(13, a);
    for (int trial = 0; trial < 100; ++trial) {
      const Vec x0 = random_vec(rng, 13, -1.0, 1.0);
      const Vec n0 = random_vec(rng, 13, -1.0, 1.0);
      const Vec h0 = Vec::Zero(13);
      VtsExpansion exp_;
      try {
        exp_ = vts_expand(x0, h0, n0, fe.dct, alpha);
      } catch (const NumericalError&) {
        CHECK(a == 2.5);  // alpha outside [-1,1] can drive the denominator to the floor
        continue;
      }
      CHECK((exp_.g_value - mismatch_cepstral(x0, h0, n0, fe.dct, alpha)).cwiseAbs().maxCoeff() <
            1e-12);
      double max_rel = 0.0;
      for (int c = 0; c < 13; ++c) {
        Vec dx = Vec::Zero(13);
        dx[c] = step;
        const Vec gx =
            (mismatch_cepstral(x0 + dx, h0, n0, fe.dct, alpha) -
             mismatch_cepstral(x0 - dx, h0, n0, fe.dct, alpha)) /
            (2.0 * step);
        const Vec gn =
            (mismatch_cepstral(x0, h0, n0 + dx, fe.dct, alpha) -
             mismatch_cepstral(x0, h0, n0 - dx, fe.dct, alpha)) /
            (2.0 * step);
        for (int r_ = 0; r_ < 13; ++r_) {
          const double scale = std::max(1.0, std::abs(gx[r_]));
          max_rel = std::max(max_rel, std::abs(exp_.G(r_, c) - gx[r_]) / scale);
          max_rel = std::max(max_rel,
                             std::abs(exp_.F(r_, c) - gn[r_]) / std::max(1.0, std::abs(gn[r_])));
        }
      }
      CHECK(max_rel < 1e-5);
      // G + F = I (the filterbank mixing weights partition unity)
      CHECK((exp_.G + exp_.F - Mat::Identity(13, 13)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("phase factor modes") {
  CHECK(PhaseFactorMode::parse("zero").kind == PhaseFactorMode::Kind::Zero);
  const PhaseFactorMode c = PhaseFactorMode::parse("const:2.5");
  CHECK(c.value == 2.5);
  CHECK(c.outside_support());
  CHECK_FALSE(PhaseFactorMode::parse("const:0.7").outside_support());
  const PhaseFactorMode s = PhaseFactorMode::parse("sampled:99");
  CHECK(s.seed == 99);
  CHECK(PhaseFactorMode::parse(s.to_string()).seed == 99);
  CHECK_THROWS_AS(static_cast<void>(PhaseFactorMode::parse("bogus")), DataError);

  CHECK(phase_alpha(PhaseFactorMode::zero(), 5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phase_alpha(c, 5).minCoeff() == 2.5);
  const Vec draw1 = phase_alpha(s, 13);
  const Vec draw2 = phase_alpha(s, 13);
  CHECK(draw1 == draw2);  // fresh generator per call when none is supplied
  CHECK(draw1.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("mismatch clamps instead of producing non-finite output") {
  FrontEnd fe;
  // strongly negative alpha forces the energy sum toward zero
  const Vec x = Vec::Zero(13);
  const Vec n = Vec::Zero(13);
  const Vec alpha = Vec::Constant(13, -1.0);
  const Vec y = mismatch_cepstral(x, Vec::Zero(13), n, fe.dct, alpha);
  CHECK(y.allFinite());
}

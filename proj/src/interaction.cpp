#include "fsp/interaction.hpp"

namespace fsp {

PhaseFactorMode PhaseFactorMode::parse(const std::string& text) {
  if (text == "zero") return zero();
  if (text.rfind("const:", 0) == 0) return constant(std::stod(text.substr(6)));
  if (text.rfind("sampled:", 0) == 0)
    return sampled(static_cast<uint64_t>(std::stoull(text.substr(8))));
  throw DataError("bad phase mode (want zero|const:<v>|sampled:<seed>): " + text);
}

std::string PhaseFactorMode::to_string() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Constant: return "const:" + std::to_string(value);
    case Kind::Sampled: return "sampled:" + std::to_string(seed);
  }
  throw DataError("bad phase mode");
}

Vec phase_alpha(const PhaseFactorMode& mode, int num_filters, std::mt19937_64* rng) {
  require(num_filters >= 1, "num_filters must be >= 1");
  switch (mode.kind) {
    case PhaseFactorMode::Kind::Zero:
      return Vec::Zero(num_filters);
    case PhaseFactorMode::Kind::Constant:
      return Vec::Constant(num_filters, mode.value);
    case PhaseFactorMode::Kind::Sampled: {
      std::mt19937_64 local(mode.seed);
      std::mt19937_64& gen = rng ? *rng : local;
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      Vec a(num_filters);
      for (int i = 0; i < num_filters; ++i) a[i] = uni(gen);
      return a;
    }
  }
  throw DataError("bad phase mode");
}

Vec mismatch_cepstral(const Vec& x_c, const Vec& h_c, const Vec& n_c, const DctMatrix& dct,
                      const Vec& alpha, double floor) {
  const Eigen::Index nf = dct.inverse.rows();
  require(x_c.size() == dct.forward.cols() || x_c.size() == dct.inverse.cols(),
          "cepstra/DCT shape mismatch");
  require(dct.forward.rows() == dct.forward.cols(),
          "mismatch_cepstral needs the square invertible DCT path");
  require(alpha.size() == nf, "alpha length must equal num_filters");
  require(x_c.allFinite() && h_c.allFinite() && n_c.allFinite(), "non-finite cepstral input");

  const Vec u = (dct.inverse * (x_c + h_c)).array().exp();
  const Vec v = (dct.inverse * n_c).array().exp();
  const Vec residual = 2.0 * alpha.array() * (dct.inverse * (x_c + h_c + n_c)).array().exp().sqrt();
  const Vec arg = (u + v + residual.matrix()).cwiseMax(floor);
  const Vec y = dct.forward * arg.array().log().matrix();
  if (!y.allFinite()) throw NumericalError("mismatch produced non-finite output");
  return y;
}

VtsExpansion vts_expand(const Vec& x0, const Vec& h0, const Vec& n0, const DctMatrix& dct,
                        const Vec& alpha, double floor) {
  require(x0.allFinite() && h0.allFinite() && n0.allFinite(), "non-finite expansion point");
  require(dct.forward.rows() == dct.forward.cols(), "vts_expand needs the square DCT path");
  const Eigen::Index nf = dct.inverse.rows();
  require(alpha.size() == nf, "alpha length must equal num_filters");

  const Vec u = (dct.inverse * (x0 + h0)).array().exp();
  const Vec v = (dct.inverse * n0).array().exp();
  const Vec r = alpha.array() * (u.array() * v.array()).sqrt();
  const Vec denom = u + v + 2.0 * r.matrix();
  if ((denom.array() <= floor).any())
    throw NumericalError("degenerate mismatch denominator at expansion point");

  VtsExpansion exp_;
  exp_.x0 = x0;
  exp_.h0 = h0;
  exp_.n0 = n0;
  exp_.g_value = dct.forward * denom.array().log().matrix();
  const Vec dx = (u + r.matrix()).cwiseQuotient(denom);
  const Vec dn = (v + r.matrix()).cwiseQuotient(denom);
  exp_.G = dct.forward * dx.asDiagonal() * dct.inverse;
  exp_.F = dct.forward * dn.asDiagonal() * dct.inverse;
  return exp_;
}

Vec true_alpha_from_spectra(const CVec& X, const CVec& H, const CVec& N,
                            const FilterbankMatrix& fb) {
  const Eigen::Index bins = fb.weights.cols();
  require(X.size() == bins && N.size() == bins, "spectrum/filterbank shape mismatch");
  CVec XH = X;
  if (H.size() > 0) {
    require(H.size() == bins, "channel spectrum shape mismatch");
    XH = X.cwiseProduct(H);
  }
  const Vec cross = (XH.conjugate().cwiseProduct(N)).real();  // |XH||N|cos(phi) per bin
  const Vec xbar = fb.weights * XH.cwiseAbs2();
  const Vec nbar = fb.weights * N.cwiseAbs2();
  const Vec num = fb.weights * cross;

  Vec alpha = Vec::Zero(fb.weights.rows());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double denom = std::sqrt(xbar[i] * nbar[i]);
    alpha[i] = denom > 0.0 ? num[i] / denom : 0.0;
  }
  return alpha;
}

}  // namespace fsp

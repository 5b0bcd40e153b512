#ifndef FSP_INTERACTION_HPP
#define FSP_INTERACTION_HPP

#include <random>
#include <string>

#include "fsp/common.hpp"
#include "fsp/features.hpp"

namespace fsp {

// Phase factor handling: zero, a fixed constant (2.5 is a common choice even
// though the true support set is [-1, 1]), or per-filter uniform draws.
struct PhaseFactorMode {
  enum class Kind { Zero, Constant, Sampled } kind = Kind::Zero;
  double value = 0.0;
  uint64_t seed = 0;

  static PhaseFactorMode zero() { return {}; }
  static PhaseFactorMode constant(double v) { return {Kind::Constant, v, 0}; }
  static PhaseFactorMode sampled(uint64_t seed) { return {Kind::Sampled, 0.0, seed}; }
  // "zero" | "const:<v>" | "sampled:<seed>"
  static PhaseFactorMode parse(const std::string& text);
  std::string to_string() const;
  // true when a constant lies outside the [-1, 1] support set
  bool outside_support() const {
    return kind == Kind::Constant && (value < -1.0 || value > 1.0);
  }
};

// One alpha vector. Sampled mode draws from the supplied generator, or from a
// fresh generator seeded by the mode when none is given.
Vec phase_alpha(const PhaseFactorMode& mode, int num_filters, std::mt19937_64* rng = nullptr);

// Cepstral-domain mismatch y = C log(exp(C^-1(x+h)) + exp(C^-1 n) + residual),
// with the log argument clamped below at `floor` (large |alpha| can drive the
// energy sum nonpositive).
Vec mismatch_cepstral(const Vec& x_c, const Vec& h_c, const Vec& n_c, const DctMatrix& dct,
                      const Vec& alpha, double floor = 1e-10);

struct VtsExpansion {
  Vec x0, h0, n0;
  Vec g_value;  // mismatch evaluated at the expansion point
  Mat G;        // d f / d x
  Mat F;        // d f / d n
};

// First-order expansion of the mismatch around (x0, h0, n0). In the
// filterbank-log domain the Jacobians are diagonal mixers
//   dx = (u + r) / (u + v + 2r),  dn = (v + r) / (u + v + 2r)
// with u = exp(C^-1(x0+h0)), v = exp(C^-1 n0), r = alpha*sqrt(uv),
// conjugated back through C diag(.) C^-1.
VtsExpansion vts_expand(const Vec& x0, const Vec& h0, const Vec& n0, const DctMatrix& dct,
                        const Vec& alpha, double floor = 1e-10);

// Per-filter phase factor computed from aligned complex spectra (channel
// defaults to identity when H is empty). Filters with zero source energy get
// alpha = 0.
Vec true_alpha_from_spectra(const CVec& X, const CVec& H, const CVec& N,
                            const FilterbankMatrix& fb);

}  // namespace fsp

#endif

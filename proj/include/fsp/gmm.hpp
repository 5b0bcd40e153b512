#ifndef FSP_GMM_HPP
#define FSP_GMM_HPP

#include <optional>
#include <vector>

#include "fsp/common.hpp"

namespace fsp {

enum class CovKind : uint32_t { Diagonal = 0, Full = 1, BlockDiagonal = 2 };

std::string cov_kind_name(CovKind k);
CovKind cov_kind_from_name(const std::string& name);

// Zero the entries of m that the covariance kind forbids. BlockDiagonal
// splits the dimension in half (statics / deltas).
void apply_cov_pattern(Mat& m, CovKind kind);

struct GaussianComponent {
  Vec mean;
  Mat cov;             // stored dense; sparsity pattern per CovKind
  double log_weight = 0.0;

  // Cached Cholesky of cov; call refresh() after touching mean/cov.
  void refresh();
  double log_density(const Vec& y) const;
  bool cache_valid() const { return cached_; }

 private:
  Mat chol_lower_;
  Vec inv_diag_;       // fast path when cov is exactly diagonal
  double log_norm_ = 0.0;
  bool diag_only_ = false;
  bool cached_ = false;
};

struct Gmm {
  std::vector<GaussianComponent> components;
  CovKind cov_kind = CovKind::Diagonal;

  int dim() const { return components.empty() ? 0 : static_cast<int>(components[0].mean.size()); }
  int num_components() const { return static_cast<int>(components.size()); }
  void refresh();

  double log_likelihood(const Vec& y) const;
  // Posterior over components; sample weights never enter here.
  Vec responsibilities(const Vec& y) const;
};

struct WeightedSampleSet {
  Mat samples;  // [L x dim]
  Vec weights;  // length L, nonnegative

  void validate() const;
  double total_weight() const { return weights.sum(); }
};

struct FitReport {
  int iterations = 0;
  int reseeds = 0;
  double final_log_likelihood = 0.0;  // weighted, sum over samples
  double total_weight = 0.0;
};

// Weighted mean / covariance of the sample set (maximum-likelihood divisors).
GaussianComponent weighted_gaussian_fit(const WeightedSampleSet& ws, CovKind kind,
                                        std::optional<Vec> cov_floor = std::nullopt);

// Per-dimension covariance floor: 1e-4 of the global weighted variance.
Vec default_cov_floor(const WeightedSampleSet& ws);

// Weighted log-likelihood sum_l w_l log p(y_l).
double weighted_log_likelihood(const Gmm& gmm, const WeightedSampleSet& ws);

// One E+M sweep of the weighted EM update equations.
Gmm weighted_em_step(const Gmm& current, const WeightedSampleSet& ws, const Vec& cov_floor,
                     int* reseeds = nullptr);

// Weighted k-means++ seeding for EM initialization.
Gmm weighted_kmeanspp_init(const WeightedSampleSet& ws, int K, CovKind kind, uint64_t seed);

Gmm weighted_em_fit(const WeightedSampleSet& ws, int K, CovKind kind,
                    std::optional<Gmm> init = std::nullopt, int max_iters = 100,
                    double tol = 1e-6, uint64_t seed = 0, FitReport* report = nullptr,
                    std::optional<Vec> cov_floor = std::nullopt);

}  // namespace fsp

#endif

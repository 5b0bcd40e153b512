#include "fsp/gmm.hpp"

#include <numbers>
#include <random>

namespace fsp {

std::string cov_kind_name(CovKind k) {
  switch (k) {
    case CovKind::Diagonal: return "diagonal";
    case CovKind::Full: return "full";
    case CovKind::BlockDiagonal: return "block-diagonal";
  }
  throw DataError("unknown covariance kind");
}

CovKind cov_kind_from_name(const std::string& name) {
  if (name == "diagonal") return CovKind::Diagonal;
  if (name == "full") return CovKind::Full;
  if (name == "block-diagonal") return CovKind::BlockDiagonal;
  throw DataError("unknown covariance kind: " + name);
}

void apply_cov_pattern(Mat& m, CovKind kind) {
  const Eigen::Index d = m.rows();
  if (kind == CovKind::Diagonal) {
    const Vec diag = m.diagonal();
    m.setZero();
    m.diagonal() = diag;
  } else if (kind == CovKind::BlockDiagonal) {
    const Eigen::Index h = d / 2;
    m.topRightCorner(h, d - h).setZero();
    m.bottomLeftCorner(d - h, h).setZero();
  }
}

void GaussianComponent::refresh() {
  const Eigen::Index d = mean.size();
  require(cov.rows() == d && cov.cols() == d, "covariance shape mismatch");
  const double log2pi = std::log(2.0 * std::numbers::pi);

  diag_only_ = true;
  for (Eigen::Index i = 0; i < d && diag_only_; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && cov(i, j) != 0.0) {
        diag_only_ = false;
        break;
      }

  if (diag_only_) {
    const Vec var = cov.diagonal();
    if ((var.array() <= 0.0).any()) throw NumericalError("non-positive variance");
    inv_diag_ = var.cwiseInverse();
    log_norm_ = -0.5 * (d * log2pi + var.array().log().sum());
  } else {
    Mat work = cov;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LLT<Mat> llt(work);
      if (llt.info() == Eigen::Success) {
        chol_lower_ = llt.matrixL();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) logdet += 2.0 * std::log(chol_lower_(i, i));
        log_norm_ = -0.5 * (d * log2pi + logdet);
        cached_ = true;
        return;
      }
      ridge = ridge == 0.0 ? 1e-10 * cov.diagonal().mean() : ridge * 10.0;
      work = cov + ridge * Mat::Identity(d, d);
    }
    throw NumericalError("covariance is not positive definite");
  }
  cached_ = true;
}

double GaussianComponent::log_density(const Vec& y) const {
  require(cached_, "GaussianComponent::refresh() not called");
  require(y.size() == mean.size(), "dimension mismatch in Gaussian evaluation");
  if (diag_only_) {
    const Vec diff = y - mean;
    return log_norm_ - 0.5 * diff.cwiseProduct(diff).dot(inv_diag_);
  }
  const Vec z = chol_lower_.triangularView<Eigen::Lower>().solve(y - mean);
  return log_norm_ - 0.5 * z.squaredNorm();
}

void Gmm::refresh() {
  for (auto& c : components) c.refresh();
}

double Gmm::log_likelihood(const Vec& y) const {
  require(!components.empty(), "empty mixture");
  Vec terms(num_components());
  for (int k = 0; k < num_components(); ++k)
    terms[k] = components[static_cast<size_t>(k)].log_weight +
               components[static_cast<size_t>(k)].log_density(y);
  return log_sum_exp(terms);
}

Vec Gmm::responsibilities(const Vec& y) const {
  Vec terms(num_components());
  for (int k = 0; k < num_components(); ++k)
    terms[k] = components[static_cast<size_t>(k)].log_weight +
               components[static_cast<size_t>(k)].log_density(y);
  const double total = log_sum_exp(terms);
  return (terms.array() - total).exp();
}

void WeightedSampleSet::validate() const {
  require(samples.rows() == weights.size(), "samples/weights length mismatch");
  require((weights.array() >= 0.0).all(), "weights must be nonnegative");
}

Vec default_cov_floor(const WeightedSampleSet& ws) {
  ws.validate();
  const double W = ws.total_weight();
  require(W > 0.0, "zero total weight");
  const Vec mu = (ws.weights.transpose() * ws.samples).transpose() / W;
  Vec var = Vec::Zero(ws.samples.cols());
  for (Eigen::Index l = 0; l < ws.samples.rows(); ++l) {
    const Vec d = ws.samples.row(l).transpose() - mu;
    var += ws.weights[l] * d.cwiseProduct(d);
  }
  var /= W;
  // keep the floor strictly positive even for degenerate data
  return (1e-4 * var.array()).max(1e-12).matrix();
}

GaussianComponent weighted_gaussian_fit(const WeightedSampleSet& ws, CovKind kind,
                                        std::optional<Vec> cov_floor) {
  ws.validate();
  const double W = ws.total_weight();
  if (W <= 0.0) throw DataError("unsupported state pair: total sample weight is zero");
  const Eigen::Index d = ws.samples.cols();

  const Vec floor = cov_floor ? *cov_floor : default_cov_floor(ws);
  GaussianComponent g;
  g.mean = (ws.weights.transpose() * ws.samples).transpose() / W;
  g.cov = Mat::Zero(d, d);
  for (Eigen::Index l = 0; l < ws.samples.rows(); ++l) {
    if (ws.weights[l] == 0.0) continue;
    const Vec diff = ws.samples.row(l).transpose() - g.mean;
    g.cov += ws.weights[l] * (diff * diff.transpose());
  }
  g.cov /= W;
  apply_cov_pattern(g.cov, kind);
  for (Eigen::Index i = 0; i < d; ++i) g.cov(i, i) = std::max(g.cov(i, i), floor[i]);
  g.log_weight = 0.0;
  g.refresh();
  return g;
}

double weighted_log_likelihood(const Gmm& gmm, const WeightedSampleSet& ws) {
  double total = 0.0;
  for (Eigen::Index l = 0; l < ws.samples.rows(); ++l) {
    if (ws.weights[l] == 0.0) continue;
    total += ws.weights[l] * gmm.log_likelihood(ws.samples.row(l).transpose());
  }
  return total;
}

namespace {

// Reseed target: the highest-weighted, least-explained sample.
Eigen::Index reseed_sample(const Gmm& gmm, const WeightedSampleSet& ws) {
  Eigen::Index best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < ws.samples.rows(); ++l) {
    if (ws.weights[l] == 0.0) continue;
    const double score =
        std::log(ws.weights[l]) - gmm.log_likelihood(ws.samples.row(l).transpose());
    if (score > best_score) {
      best_score = score;
      best = l;
    }
  }
  return best;
}

}  // namespace

Gmm weighted_em_step(const Gmm& current, const WeightedSampleSet& ws, const Vec& cov_floor,
                     int* reseeds) {
  ws.validate();
  const int K = current.num_components();
  const Eigen::Index L = ws.samples.rows();
  const Eigen::Index d = ws.samples.cols();
  const double W = ws.total_weight();
  require(W > 0.0, "zero total weight");

  // E-step: responsibilities from the old parameters (weights do not enter).
  Mat gamma(L, K);
  for (Eigen::Index l = 0; l < L; ++l)
    gamma.row(l) = current.responsibilities(ws.samples.row(l).transpose()).transpose();

  Gmm next;
  next.cov_kind = current.cov_kind;
  next.components.resize(static_cast<size_t>(K));

  std::vector<int> dead;
  for (int k = 0; k < K; ++k) {
    const Vec wk_l = ws.weights.cwiseProduct(gamma.col(k));
    const double Wk = wk_l.sum();
    auto& comp = next.components[static_cast<size_t>(k)];
    if (Wk <= 1e-10 * W) {
      dead.push_back(k);
      continue;
    }
    comp.mean = (wk_l.transpose() * ws.samples).transpose() / Wk;
    comp.cov = Mat::Zero(d, d);
    for (Eigen::Index l = 0; l < L; ++l) {
      if (wk_l[l] == 0.0) continue;
      const Vec diff = ws.samples.row(l).transpose() - comp.mean;
      comp.cov += wk_l[l] * (diff * diff.transpose());
    }
    comp.cov /= Wk;
    apply_cov_pattern(comp.cov, next.cov_kind);
    for (Eigen::Index i = 0; i < d; ++i) comp.cov(i, i) = std::max(comp.cov(i, i), cov_floor[i]);
    comp.log_weight = std::log(Wk / W);
    comp.refresh();
  }

  if (!dead.empty()) {
    // Renormalize survivors, then reseed each dead component from the data.
    Vec lw(K);
    double surv_total = 0.0;
    for (int k = 0; k < K; ++k)
      if (std::find(dead.begin(), dead.end(), k) == dead.end())
        surv_total += std::exp(next.components[static_cast<size_t>(k)].log_weight);
    Gmm survivors;
    survivors.cov_kind = next.cov_kind;
    for (int k = 0; k < K; ++k)
      if (std::find(dead.begin(), dead.end(), k) == dead.end())
        survivors.components.push_back(next.components[static_cast<size_t>(k)]);
    require(!survivors.components.empty(), "all mixture components died");
    const double reseed_weight = 1.0 / static_cast<double>(L + 1);
    for (int k : dead) {
      const Eigen::Index l = reseed_sample(survivors, ws);
      auto& comp = next.components[static_cast<size_t>(k)];
      comp.mean = ws.samples.row(l).transpose();
      comp.cov = Mat::Zero(d, d);
      comp.cov.diagonal() = cov_floor.cwiseMax(default_cov_floor(ws) * 1e4);
      comp.log_weight = std::log(reseed_weight);
      comp.refresh();
      if (reseeds) ++*reseeds;
    }
    // restore sum-to-one over all components
    double total = 0.0;
    for (auto& c : next.components) total += std::exp(c.log_weight);
    for (auto& c : next.components) c.log_weight -= std::log(total);
  }
  return next;
}

Gmm weighted_kmeanspp_init(const WeightedSampleSet& ws, int K, CovKind kind, uint64_t seed) {
  ws.validate();
  const Eigen::Index L = ws.samples.rows();
  require(K >= 1, "K must be >= 1");
  std::mt19937_64 rng(seed);

  std::vector<Eigen::Index> active;
  for (Eigen::Index l = 0; l < L; ++l)
    if (ws.weights[l] > 0.0) active.push_back(l);
  require(static_cast<int>(active.size()) >= K,
          "K exceeds the number of positively weighted samples");

  auto pick = [&](const Vec& probs) {
    std::discrete_distribution<Eigen::Index> dist(probs.data(), probs.data() + probs.size());
    return active[static_cast<size_t>(dist(rng))];
  };

  std::vector<Eigen::Index> centers;
  Vec probs(static_cast<Eigen::Index>(active.size()));
  for (size_t i = 0; i < active.size(); ++i) probs[static_cast<Eigen::Index>(i)] = ws.weights[active[i]];
  centers.push_back(pick(probs));
  Vec d2 = Vec::Constant(static_cast<Eigen::Index>(active.size()),
                         std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < K) {
    for (size_t i = 0; i < active.size(); ++i) {
      const double dist =
          (ws.samples.row(active[i]) - ws.samples.row(centers.back())).squaredNorm();
      d2[static_cast<Eigen::Index>(i)] = std::min(d2[static_cast<Eigen::Index>(i)], dist);
    }
    Vec p = d2.cwiseProduct(probs);
    if (p.sum() <= 0.0) p = probs;  // all remaining mass on existing centers
    centers.push_back(pick(p));
  }

  const Vec floor = default_cov_floor(ws);
  GaussianComponent pooled = weighted_gaussian_fit(ws, kind, floor);
  Gmm init;
  init.cov_kind = kind;
  for (int k = 0; k < K; ++k) {
    GaussianComponent c = pooled;
    c.mean = ws.samples.row(centers[static_cast<size_t>(k)]).transpose();
    c.log_weight = -std::log(static_cast<double>(K));
    c.refresh();
    init.components.push_back(std::move(c));
  }
  return init;
}

Gmm weighted_em_fit(const WeightedSampleSet& ws, int K, CovKind kind, std::optional<Gmm> init,
                    int max_iters, double tol, uint64_t seed, FitReport* report,
                    std::optional<Vec> cov_floor) {
  ws.validate();
  require(K >= 1, "K must be >= 1");
  const double W = ws.total_weight();
  if (W <= 0.0) throw DataError("unsupported state pair: total sample weight is zero");
  int positive = 0;
  for (Eigen::Index l = 0; l < ws.weights.size(); ++l)
    if (ws.weights[l] > 0.0) ++positive;
  require(positive >= K, "K exceeds the effective sample count");

  const Vec floor = cov_floor ? *cov_floor : default_cov_floor(ws);
  Gmm gmm = init ? *init : weighted_kmeanspp_init(ws, K, kind, seed);
  require(gmm.num_components() == K, "init component count mismatch");
  for (auto& c : gmm.components)
    if (!c.cache_valid()) c.refresh();

  FitReport rep;
  rep.total_weight = W;
  double prev_ll = weighted_log_likelihood(gmm, ws);
  for (int it = 0; it < max_iters; ++it) {
    gmm = weighted_em_step(gmm, ws, floor, &rep.reseeds);
    ++rep.iterations;
    const double ll = weighted_log_likelihood(gmm, ws);
    const double denom = std::max(1.0, std::abs(prev_ll));
    if (it > 0 && std::abs(ll - prev_ll) / denom < tol) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
  }
  rep.final_log_likelihood = prev_ll;
  if (report) *report = rep;
  return gmm;
}

}  // namespace fsp

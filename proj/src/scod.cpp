#include "fsp/scod.hpp"

#include <limits>

namespace fsp {

std::string scod_method_name(ScodMethod m) {
  switch (m) {
    case ScodMethod::VTS: return "vts";
    case ScodMethod::DPMC: return "dpmc";
    case ScodMethod::IDPMC: return "idpmc";
    case ScodMethod::WSS: return "wss";
  }
  throw DataError("unknown scod method");
}

ScodMethod scod_method_from_name(const std::string& name) {
  if (name == "vts") return ScodMethod::VTS;
  if (name == "dpmc") return ScodMethod::DPMC;
  if (name == "idpmc") return ScodMethod::IDPMC;
  if (name == "wss") return ScodMethod::WSS;
  throw DataError("unknown scod method: " + name);
}

double ScodGrid::log_likelihood(int i, int j, const Vec& y) const {
  require(i >= 0 && i < speech_states && j >= 0 && j < noise_states,
          "scod cell index out of range");
  const ScodCell& c = cell(i, j);
  if (!c.supported) return unsupported_floor;
  return c.gmm.log_likelihood(y);
}

void ScodGrid::refresh() {
  for (auto& c : cells)
    if (c.supported) c.gmm.refresh();
}

double scod_log_likelihood(const ScodGrid& grid, int i, int j, const Vec& y) {
  return grid.log_likelihood(i, j, y);
}

namespace {

void split_static_delta(const GaussianComponent& c, Vec& mu_s, Vec& mu_d, Vec& var_s, Vec& var_d) {
  const Eigen::Index d = c.mean.size();
  const Eigen::Index h = d / 2;
  mu_s = c.mean.head(h);
  mu_d = c.mean.tail(d - h);
  var_s = c.cov.diagonal().head(h);
  var_d = c.cov.diagonal().tail(d - h);
}

Mat floored_symmetric(Mat m, double floor) {
  m = 0.5 * (m + m.transpose()).eval();
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = std::max(m(i, i), floor);
  return m;
}

}  // namespace

ScodGrid build_vts(const Hmm& speech, const Hmm& noise, const DctMatrix& dct,
                   const PhaseFactorMode& phase) {
  speech.validate();
  noise.validate();
  const int Sx = speech.num_states();
  const int Sn = noise.num_states();
  const Eigen::Index dim = speech.emissions[0].dim();
  require(dim == noise.emissions[0].dim(), "VTS requires equal source feature spaces");
  require(dct.forward.rows() == dct.forward.cols() && dct.forward.rows() == dim / 2,
          "VTS requires the square DCT path matching the static dimension");

  const Vec h0 = Vec::Zero(dim / 2);  // channel removed from the environment model
  std::mt19937_64 rng(phase.seed);

  ScodGrid grid;
  grid.speech_states = Sx;
  grid.noise_states = Sn;
  grid.method = ScodMethod::VTS;
  grid.observation_space = FeatureSpace::Mfcc0d26;
  grid.cells.resize(static_cast<size_t>(Sx * Sn));

  for (int i = 0; i < Sx; ++i) {
    for (int j = 0; j < Sn; ++j) {
      ScodCell cell;
      cell.gmm.cov_kind = CovKind::BlockDiagonal;
      for (const auto& cx : speech.emissions[static_cast<size_t>(i)].components) {
        Vec mu_xs, mu_xd, var_xs, var_xd;
        split_static_delta(cx, mu_xs, mu_xd, var_xs, var_xd);
        for (const auto& cn : noise.emissions[static_cast<size_t>(j)].components) {
          Vec mu_ns, mu_nd, var_ns, var_nd;
          split_static_delta(cn, mu_ns, mu_nd, var_ns, var_nd);

          const Vec alpha = phase_alpha(phase, static_cast<int>(dim / 2), &rng);
          const VtsExpansion exp_ = vts_expand(mu_xs, h0, mu_ns, dct, alpha);

          const Eigen::Index h = dim / 2;
          GaussianComponent comp;
          comp.mean.resize(dim);
          comp.mean.head(h) = exp_.g_value;
          comp.mean.tail(h) = exp_.G * mu_xd + exp_.F * mu_nd;
          comp.cov = Mat::Zero(dim, dim);
          comp.cov.topLeftCorner(h, h) = floored_symmetric(
              exp_.G * var_xs.asDiagonal() * exp_.G.transpose() +
                  exp_.F * var_ns.asDiagonal() * exp_.F.transpose(),
              1e-8);
          comp.cov.bottomRightCorner(h, h) = floored_symmetric(
              exp_.G * var_xd.asDiagonal() * exp_.G.transpose() +
                  exp_.F * var_nd.asDiagonal() * exp_.F.transpose(),
              1e-8);
          comp.log_weight = cx.log_weight + cn.log_weight;
          comp.refresh();
          cell.gmm.components.push_back(std::move(comp));
        }
      }
      cell.supported = true;
      cell.total_weight = 1.0;
      grid.cell(i, j) = std::move(cell);
    }
  }
  return grid;
}

namespace {

Vec sample_gaussian(const GaussianComponent& c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z(c.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  // diagonal source covariances: scale per dimension
  return c.mean + c.cov.diagonal().cwiseSqrt().cwiseProduct(z);
}

int sample_component(const Gmm& gmm, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng);
  for (int k = 0; k < gmm.num_components(); ++k) {
    u -= std::exp(gmm.components[static_cast<size_t>(k)].log_weight);
    if (u <= 0.0) return k;
  }
  return gmm.num_components() - 1;
}

}  // namespace

ScodGrid build_dpmc(const Hmm& speech, const Hmm& noise, const DctMatrix& dct,
                    const PhaseFactorMode& phase, int samples_per_cell, int K, CovKind cov_kind,
                    int em_iters, uint64_t seed) {
  speech.validate();
  noise.validate();
  require(samples_per_cell >= 10, "too few samples per cell");
  const int Sx = speech.num_states();
  const int Sn = noise.num_states();
  const Eigen::Index dim = speech.emissions[0].dim();
  require(dim == noise.emissions[0].dim(), "DPMC requires equal source feature spaces");
  const Eigen::Index h = dim / 2;
  require(dct.forward.rows() == dct.forward.cols() && dct.forward.rows() == h,
          "DPMC requires the square DCT path matching the static dimension");
  const Vec h0 = Vec::Zero(h);

  ScodGrid grid;
  grid.speech_states = Sx;
  grid.noise_states = Sn;
  grid.method = K > 1 ? ScodMethod::IDPMC : ScodMethod::DPMC;
  grid.observation_space = FeatureSpace::Mfcc0d26;
  grid.cells.resize(static_cast<size_t>(Sx * Sn));

  for (int i = 0; i < Sx; ++i) {
    for (int j = 0; j < Sn; ++j) {
      std::mt19937_64 rng(seed ^ (static_cast<uint64_t>(i) << 32) ^ static_cast<uint64_t>(j) ^
                          0x9e3779b97f4a7c15ULL);
      const Gmm& gx = speech.emissions[static_cast<size_t>(i)];
      const Gmm& gn = noise.emissions[static_cast<size_t>(j)];

      Mat ys(samples_per_cell, dim);
      for (int l = 0; l < samples_per_cell; ++l) {
        const Vec x = sample_gaussian(gx.components[static_cast<size_t>(sample_component(gx, rng))], rng);
        const Vec n = sample_gaussian(gn.components[static_cast<size_t>(sample_component(gn, rng))], rng);
        const Vec alpha = phase_alpha(phase, static_cast<int>(h), &rng);
        // statics through the exact mismatch; deltas through the Jacobians
        // of the mismatch at the sampled statics
        ys.row(l).head(h) = mismatch_cepstral(x.head(h), h0, n.head(h), dct, alpha).transpose();
        const VtsExpansion exp_ = vts_expand(x.head(h), h0, n.head(h), dct, alpha);
        ys.row(l).tail(h) = (exp_.G * x.tail(h) + exp_.F * n.tail(h)).transpose();
      }

      WeightedSampleSet ws{ys, Vec::Ones(samples_per_cell)};
      ScodCell cell;
      cell.total_weight = static_cast<double>(samples_per_cell);
      if (K <= 1) {
        cell.gmm.cov_kind = cov_kind;
        cell.gmm.components.push_back(weighted_gaussian_fit(ws, cov_kind));
        cell.iterations = 1;
      } else {
        FitReport rep;
        cell.gmm = weighted_em_fit(ws, K, cov_kind, std::nullopt, em_iters, 1e-6,
                                   rng(), &rep);
        cell.iterations = rep.iterations;
        cell.reseeds = rep.reseeds;
      }
      cell.supported = true;
      grid.cell(i, j) = std::move(cell);
    }
  }
  return grid;
}

std::vector<StereoSample> make_stereo_samples(const std::vector<StereoUtterance>& corpus,
                                              const Hmm& speech, const Hmm& noise) {
  speech.validate();
  noise.validate();
  const int Sx = speech.num_states();
  const int Sn = noise.num_states();
  std::vector<StereoSample> out;
  for (const auto& utt : corpus) {
    require(utt.x_features.size() == utt.y_features.size() &&
                utt.n_features.size() == utt.y_features.size(),
            "stereo utterance streams misaligned");
    for (size_t t = 0; t < utt.y_features.size(); ++t) {
      StereoSample s;
      s.y = utt.y_features[t].full();
      const Vec x = utt.x_features[t].full();
      const Vec n = utt.n_features[t].full();
      require(x.size() == speech.emissions[0].dim(),
              "speech feature space does not match the speech model");
      require(n.size() == noise.emissions[0].dim(),
              "noise feature space does not match the noise model");
      s.speech_loglik.resize(Sx);
      for (int i = 0; i < Sx; ++i)
        s.speech_loglik[i] = speech.emissions[static_cast<size_t>(i)].log_likelihood(x);
      s.noise_loglik.resize(Sn);
      for (int j = 0; j < Sn; ++j)
        s.noise_loglik[j] = noise.emissions[static_cast<size_t>(j)].log_likelihood(n);
      out.push_back(std::move(s));
    }
  }
  return out;
}

WssWeights wss_weights(const StereoSample& sample, const Vec& speech_prior,
                       const Vec& noise_prior) {
  require(sample.speech_loglik.size() == speech_prior.size(),
          "speech prior length mismatch");
  require(sample.noise_loglik.size() == noise_prior.size(), "noise prior length mismatch");
  require(std::abs(speech_prior.sum() - 1.0) < 1e-8 && std::abs(noise_prior.sum() - 1.0) < 1e-8,
          "priors must be distributions");

  auto one_source = [](const Vec& loglik, const Vec& prior) {
    Vec terms(loglik.size());
    for (Eigen::Index i = 0; i < loglik.size(); ++i)
      terms[i] = prior[i] > 0.0 ? loglik[i] + std::log(prior[i]) : kLogZero;
    const double log_marginal = log_sum_exp(terms);
    return (loglik.array() - log_marginal).exp().matrix().eval();
  };
  return WssWeights{one_source(sample.speech_loglik, speech_prior),
                    one_source(sample.noise_loglik, noise_prior)};
}

ScodGrid build_wss(const std::vector<StereoSample>& samples, const Vec& speech_prior,
                   const Vec& noise_prior, const WssBuildConfig& cfg,
                   FeatureSpace observation_space) {
  require(!samples.empty(), "no stereo samples");
  const int Sx = static_cast<int>(speech_prior.size());
  const int Sn = static_cast<int>(noise_prior.size());
  const auto L = static_cast<Eigen::Index>(samples.size());
  const auto dim = samples[0].y.size();

  Mat ys(L, dim);
  Mat wx(L, Sx), wn(L, Sn);
  for (Eigen::Index l = 0; l < L; ++l) {
    ys.row(l) = samples[static_cast<size_t>(l)].y.transpose();
    const WssWeights w = wss_weights(samples[static_cast<size_t>(l)], speech_prior, noise_prior);
    wx.row(l) = w.speech.transpose();
    wn.row(l) = w.noise.transpose();
  }

  ScodGrid grid;
  grid.speech_states = Sx;
  grid.noise_states = Sn;
  grid.method = ScodMethod::WSS;
  grid.observation_space = observation_space;
  grid.cells.resize(static_cast<size_t>(Sx * Sn));

  // floor covariances from the pooled corpus variance, not per cell: cells
  // whose weights concentrate on near-identical frames would otherwise
  // collapse to degenerate Gaussians; the extra 1e2 keeps per-cell fits from
  // becoming so sharp that a single EM initialization flips whole decodes
  const Vec pool_floor = 1e2 * default_cov_floor(WeightedSampleSet{ys, Vec::Ones(L)});

  const auto fit_cell = [&](const Vec& w, uint64_t salt) {
    ScodCell cell;
    const double W = w.sum();
    cell.total_weight = W;
    if (W < cfg.support_weight_per_dim * static_cast<double>(dim)) return cell;
    // drop negligible weights to keep the per-cell fit tractable
    const double cutoff = cfg.prune_rel * w.maxCoeff();
    Eigen::Index kept = 0;
    for (Eigen::Index l = 0; l < L; ++l)
      if (w[l] > cutoff) ++kept;
    Mat sub(kept, dim);
    Vec subw(kept);
    Eigen::Index r = 0;
    for (Eigen::Index l = 0; l < L; ++l)
      if (w[l] > cutoff) {
        sub.row(r) = ys.row(l);
        subw[r] = w[l];
        ++r;
      }
    WeightedSampleSet ws{std::move(sub), std::move(subw)};
    try {
      if (cfg.components <= 1) {
        cell.gmm.cov_kind = cfg.cov_kind;
        cell.gmm.components.push_back(weighted_gaussian_fit(ws, cfg.cov_kind, pool_floor));
        cell.iterations = 1;
      } else {
        // EM is sensitive to initialization on these weighted sets; keep the
        // best of a few restarts by weighted likelihood
        double best_ll = -std::numeric_limits<double>::infinity();
        for (uint64_t restart = 0; restart < 3; ++restart) {
          FitReport rep;
          Gmm fit = weighted_em_fit(ws, cfg.components, cfg.cov_kind, std::nullopt, cfg.em_iters,
                                    1e-6, cfg.seed ^ salt ^ (restart * 0x9e3779b97f4a7c15ull),
                                    &rep, pool_floor);
          double ll = 0.0;
          for (Eigen::Index l = 0; l < ws.samples.rows(); ++l)
            ll += ws.weights[l] * fit.log_likelihood(ws.samples.row(l).transpose());
          if (ll > best_ll) {
            best_ll = ll;
            cell.gmm = std::move(fit);
            cell.iterations = rep.iterations;
            cell.reseeds = rep.reseeds;
          }
        }
      }
      cell.supported = true;
    } catch (const std::exception&) {
      cell.supported = false;  // degenerate cell
    }
    return cell;
  };

  int supported = 0;
  for (int i = 0; i < Sx; ++i) {
    for (int j = 0; j < Sn; ++j) {
      const uint64_t salt = (static_cast<uint64_t>(i) << 32) ^ static_cast<uint64_t>(j);
      ScodCell cell = fit_cell(wx.col(i).cwiseProduct(wn.col(j)), salt);
      if (cell.supported) ++supported;
      grid.cell(i, j) = std::move(cell);
    }
  }

  // back off starved (speech, noise) cells to the speech-state marginal:
  // the distribution fitted from speech occupancy alone, ignoring the noise
  // regime, so a rarely co-occurring pair is served by the single-regime fit
  // instead of a hard likelihood floor
  std::vector<std::optional<ScodCell>> marginal(static_cast<size_t>(Sx));
  for (int i = 0; i < Sx; ++i) {
    bool needed = false;
    for (int j = 0; j < Sn; ++j)
      if (!grid.cell(i, j).supported) needed = true;
    if (!needed) continue;
    if (!marginal[static_cast<size_t>(i)])
      marginal[static_cast<size_t>(i)] =
          fit_cell(wx.col(i), (static_cast<uint64_t>(i) << 32) ^ 0xffffffffull);
    const ScodCell& m = *marginal[static_cast<size_t>(i)];
    if (!m.supported) continue;
    for (int j = 0; j < Sn; ++j)
      if (!grid.cell(i, j).supported) {
        const double W = grid.cell(i, j).total_weight;
        grid.cell(i, j) = m;
        grid.cell(i, j).total_weight = W;
        ++supported;
      }
  }
  if (supported == 0) throw DataError("all SCOD cells unsupported");
  return grid;
}

}  // namespace fsp

#include "fsp/eval.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fsp {

using json = nlohmann::ordered_json;

namespace {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "double formatting failed");
  return std::string(buf, end);
}

uint64_t derive_seed(uint64_t base, uint64_t salt) {
  uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

AlignmentCounts align_words(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // dp(i, j): minimal (S + D + I) aligning ref[0..i) with hyp[0..j)
  Mat dp(n + 1, m + 1);
  for (int i = 0; i <= n; ++i) dp(i, 0) = i;
  for (int j = 0; j <= m; ++j) dp(0, j) = j;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= m; ++j) {
      const double sub = dp(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0.0 : 1.0);
      dp(i, j) = std::min({sub, dp(i - 1, j) + 1.0, dp(i, j - 1) + 1.0});
    }
  // backtrace, preferring matches/substitutions so counts are canonical
  AlignmentCounts c;
  c.ref_words = n;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dp(i, j) == dp(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0.0 : 1.0)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp(i, j) == dp(i - 1, j) + 1.0) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

double word_accuracy(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  require(!ref.empty(), "word_accuracy: empty reference");
  return align_words(ref, hyp).accuracy();
}

void ExperimentConfig::validate() const {
  vocab.validate();
  require(num_utterances >= 5, "need at least 5 utterances");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
  require(min_words >= 1 && max_words >= min_words, "bad word-count range");
  require(tokens_per_word >= 2, "need at least 2 tokens per word");
  require(states_per_word >= 1 && components_per_state >= 1, "bad source-model spec");
  require(!train_snrs.empty(), "train SNR list is empty");
  require(!test_snrs.empty(), "test SNR list is empty");
  require(!methods.empty(), "method list is empty");
  require(noise_mode == "single" || noise_mode == "multi" || noise_mode.rfind("fixed:", 0) == 0,
          "noise_mode must be single | multi | fixed:<k>");
  require(max_noise_states >= 1, "max_noise_states must be >= 1");
  require(dpmc_samples >= 8, "dpmc_samples too small");
  require(idpmc_components >= 1, "idpmc_components must be >= 1");
  features.validate();
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["num_words"] = cfg.vocab.word_classes.size();
  j["num_utterances"] = cfg.num_utterances;
  j["train_fraction"] = cfg.train_fraction;
  j["min_words"] = cfg.min_words;
  j["max_words"] = cfg.max_words;
  j["tokens_per_word"] = cfg.tokens_per_word;
  j["feature_space"] = feature_space_name(cfg.features.space_id);
  j["states_per_word"] = cfg.states_per_word;
  j["components_per_state"] = cfg.components_per_state;
  j["train_snrs"] = cfg.train_snrs;
  std::vector<std::string> snrs;
  for (double s : cfg.test_snrs) snrs.push_back(fmt_double(s));
  j["test_snrs"] = snrs;
  std::vector<std::string> methods;
  for (ScodMethod m : cfg.methods) methods.push_back(scod_method_name(m));
  j["methods"] = methods;
  j["noise_mode"] = cfg.noise_mode;
  j["max_noise_states"] = cfg.max_noise_states;
  j["noise_components"] = cfg.noise_components;
  j["wss_components"] = cfg.wss.components;
  j["wss_cov"] = cov_kind_name(cfg.wss.cov_kind);
  j["wss_em_iters"] = cfg.wss.em_iters;
  j["max_wss_samples"] = cfg.max_wss_samples;
  j["dpmc_samples"] = cfg.dpmc_samples;
  j["idpmc_components"] = cfg.idpmc_components;
  j["pmc_em_iters"] = cfg.pmc_em_iters;
  j["phase"] = cfg.phase.to_string();
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config file: invalid JSON: ") + e.what());
  }
  require(j.is_object(), "config file: top level must be an object");
  ExperimentConfig cfg;
  const std::set<std::string> known = {
      "seed",          "num_words",      "num_utterances", "train_fraction",
      "min_words",     "max_words",      "tokens_per_word", "feature_space",
      "states_per_word", "components_per_state", "train_snrs", "test_snrs",
      "methods",       "noise_mode",     "max_noise_states", "noise_components", "wss_components",
      "wss_cov",       "wss_em_iters",  "max_wss_samples", "dpmc_samples",   "idpmc_components",
      "pmc_em_iters",  "phase",          "output_dir"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()) > 0, "config file: unknown key '" + it.key() + "'");
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("num_words"))
    cfg.vocab = SyntheticVocabulary::default_vocab(j["num_words"].get<int>());
  if (j.contains("num_utterances")) cfg.num_utterances = j["num_utterances"].get<int>();
  if (j.contains("train_fraction")) cfg.train_fraction = j["train_fraction"].get<double>();
  if (j.contains("min_words")) cfg.min_words = j["min_words"].get<int>();
  if (j.contains("max_words")) cfg.max_words = j["max_words"].get<int>();
  if (j.contains("tokens_per_word")) cfg.tokens_per_word = j["tokens_per_word"].get<int>();
  if (j.contains("feature_space")) {
    const FeatureSpace space = feature_space_from_name(j["feature_space"].get<std::string>());
    cfg.features = space == FeatureSpace::Mfcc0d26 ? FeatureConfig::mfcc0d26()
                                                   : FeatureConfig::log_mel_fbd42();
  }
  if (j.contains("states_per_word")) cfg.states_per_word = j["states_per_word"].get<int>();
  if (j.contains("components_per_state"))
    cfg.components_per_state = j["components_per_state"].get<int>();
  if (j.contains("train_snrs")) {
    cfg.train_snrs.clear();
    for (const auto& s : j["train_snrs"])
      cfg.train_snrs.push_back(s.is_string() ? std::stod(s.get<std::string>())
                                             : s.get<double>());
  }
  if (j.contains("test_snrs")) {
    cfg.test_snrs.clear();
    for (const auto& s : j["test_snrs"])
      cfg.test_snrs.push_back(s.is_string() ? std::stod(s.get<std::string>())
                                            : s.get<double>());
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"])
      cfg.methods.push_back(scod_method_from_name(m.get<std::string>()));
  }
  if (j.contains("noise_mode")) cfg.noise_mode = j["noise_mode"].get<std::string>();
  if (j.contains("max_noise_states")) cfg.max_noise_states = j["max_noise_states"].get<int>();
  if (j.contains("noise_components")) cfg.noise_components = j["noise_components"].get<int>();
  if (j.contains("wss_components")) cfg.wss.components = j["wss_components"].get<int>();
  if (j.contains("wss_cov"))
    cfg.wss.cov_kind = cov_kind_from_name(j["wss_cov"].get<std::string>());
  if (j.contains("wss_em_iters")) cfg.wss.em_iters = j["wss_em_iters"].get<int>();
  if (j.contains("max_wss_samples")) cfg.max_wss_samples = j["max_wss_samples"].get<size_t>();
  if (j.contains("dpmc_samples")) cfg.dpmc_samples = j["dpmc_samples"].get<int>();
  if (j.contains("idpmc_components")) cfg.idpmc_components = j["idpmc_components"].get<int>();
  if (j.contains("pmc_em_iters")) cfg.pmc_em_iters = j["pmc_em_iters"].get<int>();
  if (j.contains("phase")) cfg.phase = PhaseFactorMode::parse(j["phase"].get<std::string>());
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  cfg.validate();
  return cfg;
}

std::string ResultTable::to_csv() const {
  std::ostringstream out;
  out << "noise_id,snr_db,method,noise_states,accuracy,utterances,"
         "mean_log_likelihood,mean_op_count\n";
  for (const auto& r : rows) {
    out << r.noise_id << ',' << fmt_double(r.snr_db) << ',' << r.method << ','
        << r.noise_states << ',' << fmt_double(r.accuracy) << ',' << r.utterances << ','
        << fmt_double(r.mean_log_likelihood) << ',' << fmt_double(r.mean_op_count) << '\n';
  }
  return out.str();
}

ResultTable ResultTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "result CSV: empty file");
  require(line.rfind("noise_id,", 0) == 0, "result CSV: unexpected header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    require(cells.size() == 8, "result CSV: expected 8 columns");
    ResultRow r;
    r.noise_id = cells[0];
    r.snr_db = std::stod(cells[1]);
    r.method = cells[2];
    r.noise_states = std::stoi(cells[3]);
    r.accuracy = std::stod(cells[4]);
    r.utterances = std::stoi(cells[5]);
    r.mean_log_likelihood = std::stod(cells[6]);
    r.mean_op_count = std::stod(cells[7]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

double ResultTable::mean_accuracy(const std::string& method, int noise_states, double lo,
                                  double hi) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.method == method && r.noise_states == noise_states && r.snr_db >= lo && r.snr_db <= hi) {
      sum += r.accuracy;
      ++n;
    }
  require(n > 0, "mean_accuracy: no matching rows");
  return sum / n;
}

namespace {

// Dithered silence matching the synthetic corpus floor.
AudioSegment make_silence(double seconds, int sample_rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  // same dither process as the corpus generator's inter-word gaps
  std::normal_distribution<double> dither(0.0, 1e-4);
  AudioSegment seg;
  seg.sample_rate = sample_rate;
  seg.samples = Vec::Zero(static_cast<Eigen::Index>(seconds * sample_rate));
  for (Eigen::Index i = 0; i < seg.samples.size(); ++i) seg.samples[i] = dither(rng);
  return seg;
}

Hmm train_word_model(const WordClass& word, const ExperimentConfig& cfg, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Mat> seqs;
  for (int t = 0; t < cfg.tokens_per_word; ++t) {
    AudioSegment token = synthesize_word(word, cfg.vocab.sample_rate, rng);
    // small dithered pads so edge frames resemble deployment context
    AudioSegment padded = make_silence(0.04, cfg.vocab.sample_rate, derive_seed(seed, 100 + t));
    AudioSegment tail = make_silence(0.04, cfg.vocab.sample_rate, derive_seed(seed, 200 + t));
    AudioSegment utt;
    utt.sample_rate = cfg.vocab.sample_rate;
    utt.samples.resize(padded.samples.size() + token.samples.size() + tail.samples.size());
    utt.samples << padded.samples, token.samples, tail.samples;
    seqs.push_back(sequence_matrix(extract_features(utt, cfg.features)));
  }
  HmmTrainConfig tc;
  tc.num_states = cfg.states_per_word;
  tc.num_components = cfg.components_per_state;
  tc.seed = seed;
  return hmm_train(seqs, Topology::LeftToRight, tc);
}

Hmm train_silence_model(const ExperimentConfig& cfg, uint64_t seed) {
  std::vector<Mat> seqs;
  for (int t = 0; t < 8; ++t) {
    AudioSegment seg = make_silence(0.4, cfg.vocab.sample_rate, derive_seed(seed, t));
    seqs.push_back(sequence_matrix(extract_features(seg, cfg.features)));
  }
  HmmTrainConfig tc;
  tc.num_states = 1;
  tc.num_components = cfg.components_per_state;
  tc.seed = seed;
  return hmm_train(seqs, Topology::LeftToRight, tc);
}

}  // namespace

SourceModels train_source_models(const ExperimentConfig& cfg) {
  SourceModels src;
  for (size_t w = 0; w < cfg.vocab.word_classes.size(); ++w)
    src.word_models.emplace_back(
        cfg.vocab.word_classes[w].id,
        train_word_model(cfg.vocab.word_classes[w], cfg, derive_seed(cfg.seed, 10 + w)));
  src.silence = train_silence_model(cfg, derive_seed(cfg.seed, 20));
  return src;
}

Hmm train_noise_model(const Mat& noise_features, const ExperimentConfig& cfg, uint64_t seed) {
  if (cfg.noise_mode == "single")
    return bic_select_noise_states(noise_features, 1, cfg.noise_components, seed);
  if (cfg.noise_mode == "multi")
    return bic_select_noise_states(noise_features, cfg.max_noise_states, cfg.noise_components,
                                   seed);
  const int k = std::stoi(cfg.noise_mode.substr(6));
  require(k >= 1, "fixed noise-state count must be >= 1");
  return bic_select_noise_states(noise_features, k, cfg.noise_components, seed, true);
}

namespace {

ScodGrid build_grid(ScodMethod method, const ExperimentConfig& cfg, const Hmm& speech,
                    const Hmm& noise, const std::vector<StereoSample>& pool, uint64_t seed) {
  const DctMatrix dct = make_dct(cfg.features.num_cepstra, cfg.features.num_filters);
  switch (method) {
    case ScodMethod::VTS: {
      ScodGrid g = build_vts(speech, noise, dct, cfg.phase);
      g.observation_space = cfg.features.space_id;
      return g;
    }
    case ScodMethod::DPMC: {
      ScodGrid g = build_dpmc(speech, noise, dct, cfg.phase, cfg.dpmc_samples, 1,
                              CovKind::Diagonal, cfg.pmc_em_iters, seed);
      g.observation_space = cfg.features.space_id;
      return g;
    }
    case ScodMethod::IDPMC: {
      ScodGrid g = build_dpmc(speech, noise, dct, cfg.phase, cfg.dpmc_samples,
                              cfg.idpmc_components, CovKind::Diagonal, cfg.pmc_em_iters, seed);
      g.observation_space = cfg.features.space_id;
      return g;
    }
    case ScodMethod::WSS: {
      WssBuildConfig wc = cfg.wss;
      wc.seed = seed;
      return build_wss(pool, speech.stationary_distribution(), noise.stationary_distribution(),
                       wc, cfg.features.space_id);
    }
  }
  throw DataError("unknown observation-model method");
}

}  // namespace

ModelBundle build_bundle(const ExperimentConfig& cfg, const SourceModels& src, const Hmm& noise,
                         ScodMethod method, uint64_t seed,
                         const std::vector<StereoSample>* pool) {
  ComposedHmm composed = compose_grammar(src.word_models, src.silence, true);
  std::vector<StereoSample> local;
  if (method == ScodMethod::WSS && pool == nullptr) {
    SyntheticCorpus corpus = generate_synthetic_corpus(
        cfg.vocab, cfg.num_utterances, cfg.min_words, cfg.max_words, derive_seed(cfg.seed, 1));
    Eigen::Index max_len = 0;
    for (const auto& u : corpus.utterances) max_len = std::max(max_len, u.audio.samples.size());
    GeneratedNoise gn =
        generate_noise(cfg.vocab.noise_profiles.at(0), max_len + cfg.vocab.sample_rate,
                       cfg.vocab.sample_rate, derive_seed(cfg.seed, 3));
    EnvironmentSpec env;
    env.rng_seed = derive_seed(cfg.seed, 30);
    std::vector<StereoUtterance> stereo =
        make_stereo_corpus(corpus.utterances, gn.audio, cfg.train_snrs, cfg.features, env);
    local = make_stereo_samples(stereo, composed.hmm, noise);
    if (local.size() > cfg.max_wss_samples) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 32));
      std::shuffle(local.begin(), local.end(), rng);
      local.resize(cfg.max_wss_samples);
    }
    pool = &local;
  }
  static const std::vector<StereoSample> kEmpty;
  ModelBundle bundle;
  bundle.features = cfg.features;
  bundle.word_models = src.word_models;
  bundle.silence = src.silence;
  bundle.noise = noise;
  bundle.phase = cfg.phase;
  bundle.scod = build_grid(method, cfg, composed.hmm, noise, pool ? *pool : kEmpty, seed);
  return bundle;
}

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const NoiseProfile& profile = cfg.vocab.noise_profiles.at(0);
  json manifest;
  manifest["seed"] = cfg.seed;
  manifest["noise_id"] = profile.id;
  manifest["noise_mode"] = cfg.noise_mode;
  manifest["num_utterances"] = cfg.num_utterances;
  manifest["train_fraction"] = cfg.train_fraction;
  manifest["word_range"] = {cfg.min_words, cfg.max_words};
  manifest["tokens_per_word"] = cfg.tokens_per_word;
  manifest["states_per_word"] = cfg.states_per_word;
  manifest["components_per_state"] = cfg.components_per_state;
  manifest["train_snrs"] = cfg.train_snrs;
  std::vector<std::string> test_snr_text;
  for (double s : cfg.test_snrs) test_snr_text.push_back(fmt_double(s));
  manifest["test_snrs"] = test_snr_text;
  manifest["phase"] = cfg.phase.to_string();
  manifest["features"] = feature_space_name(cfg.features.space_id);
  manifest["wss_components"] = cfg.wss.components;
  manifest["max_wss_samples"] = cfg.max_wss_samples;
  manifest["dpmc_samples"] = cfg.dpmc_samples;
  manifest["idpmc_components"] = cfg.idpmc_components;

  // ---- corpus ----------------------------------------------------------
  const uint64_t corpus_seed = derive_seed(cfg.seed, 1);
  manifest["corpus_seed"] = corpus_seed;
  SyntheticCorpus corpus = generate_synthetic_corpus(cfg.vocab, cfg.num_utterances, cfg.min_words,
                                                     cfg.max_words, corpus_seed);
  std::vector<size_t> order(corpus.utterances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(cfg.seed, 2));
  std::shuffle(order.begin(), order.end(), split_rng);
  const size_t n_train = std::max<size_t>(
      1, static_cast<size_t>(cfg.train_fraction * static_cast<double>(order.size())));
  std::vector<LabeledUtterance> train_utts, test_utts;
  for (size_t k = 0; k < order.size(); ++k)
    (k < n_train ? train_utts : test_utts).push_back(corpus.utterances[order[k]]);
  require(!test_utts.empty(), "empty held-out split");
  manifest["train_utterances"] = train_utts.size();
  manifest["test_utterances"] = test_utts.size();

  Eigen::Index max_len = 0;
  for (const auto& u : corpus.utterances) max_len = std::max(max_len, u.audio.samples.size());
  const uint64_t noise_seed = derive_seed(cfg.seed, 3);
  manifest["noise_seed"] = noise_seed;
  GeneratedNoise noise = generate_noise(profile, max_len + cfg.vocab.sample_rate,
                                        cfg.vocab.sample_rate, noise_seed);

  // ---- source models ---------------------------------------------------
  std::vector<std::pair<std::string, Hmm>> word_models;
  json word_seeds = json::object();
  for (size_t w = 0; w < cfg.vocab.word_classes.size(); ++w) {
    const uint64_t ws = derive_seed(cfg.seed, 10 + w);
    word_seeds[cfg.vocab.word_classes[w].id] = ws;
    word_models.emplace_back(cfg.vocab.word_classes[w].id,
                             train_word_model(cfg.vocab.word_classes[w], cfg, ws));
  }
  manifest["word_model_seeds"] = word_seeds;
  const uint64_t sil_seed = derive_seed(cfg.seed, 20);
  manifest["silence_seed"] = sil_seed;
  Hmm silence = train_silence_model(cfg, sil_seed);

  // ---- stereo training corpus and noise model ---------------------------
  EnvironmentSpec train_env;
  train_env.rng_seed = derive_seed(cfg.seed, 30);
  manifest["train_mix_seed"] = train_env.rng_seed;
  std::vector<StereoUtterance> stereo =
      make_stereo_corpus(train_utts, noise.audio, cfg.train_snrs, cfg.features, train_env);

  Eigen::Index n_rows = 0;
  for (const auto& su : stereo) n_rows += static_cast<Eigen::Index>(su.n_features.size());
  Mat noise_feats(n_rows, stereo.front().n_features.front().dim());
  Eigen::Index r = 0;
  for (const auto& su : stereo) {
    Mat m = sequence_matrix(su.n_features);
    noise_feats.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  const uint64_t noise_model_seed = derive_seed(cfg.seed, 31);
  manifest["noise_model_seed"] = noise_model_seed;
  Hmm noise_hmm = train_noise_model(noise_feats, cfg, noise_model_seed);
  manifest["noise_states"] = noise_hmm.num_states();

  // ---- observation grids -------------------------------------------------
  ComposedHmm composed = compose_grammar(word_models, silence, true);
  std::vector<StereoSample> pool;
  const bool needs_wss = std::find(cfg.methods.begin(), cfg.methods.end(), ScodMethod::WSS) !=
                         cfg.methods.end();
  const uint64_t pool_seed = derive_seed(cfg.seed, 32);
  if (needs_wss) {
    pool = make_stereo_samples(stereo, composed.hmm, noise_hmm);
    if (pool.size() > cfg.max_wss_samples) {
      std::mt19937_64 rng(pool_seed);
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(cfg.max_wss_samples);
    }
    manifest["wss_pool_seed"] = pool_seed;
    manifest["wss_pool_size"] = pool.size();
  }

  ExperimentRun run;
  run.noise_states = noise_hmm.num_states();
  json method_seeds = json::object();

  for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const ScodMethod method = cfg.methods[mi];
    const uint64_t build_seed = derive_seed(cfg.seed, 40 + mi);
    method_seeds[scod_method_name(method)] = build_seed;
    ModelBundle bundle;
    bundle.features = cfg.features;
    bundle.word_models = word_models;
    bundle.silence = silence;
    bundle.noise = noise_hmm;
    bundle.phase = cfg.phase;
    try {
      bundle.scod = build_grid(method, cfg, composed.hmm, noise_hmm, pool, build_seed);
    } catch (const std::exception& e) {
      throw NumericalError("stage build-scod (" + scod_method_name(method) + "): " + e.what());
    }
    run.bundles.push_back(std::move(bundle));
  }
  manifest["scod_build_seeds"] = method_seeds;

  // ---- decode and score ---------------------------------------------------
  json mix_seeds = json::object();
  for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    FactorialModel model = run.bundles[mi].compose(true);
    for (size_t si = 0; si < cfg.test_snrs.size(); ++si) {
      const double snr = cfg.test_snrs[si];
      EnvironmentSpec env;
      env.rng_seed = derive_seed(cfg.seed, 1000 + si);  // shared across methods
      mix_seeds[fmt_double(snr)] = env.rng_seed;
      std::vector<StereoUtterance> test_mix;
      try {
        test_mix = make_stereo_corpus(test_utts, noise.audio, {snr}, cfg.features, env);
      } catch (const std::exception& e) {
        throw DataError("stage test-mix: " + std::string(e.what()));
      }
      AlignmentCounts counts;
      double ll_sum = 0.0, op_sum = 0.0;
      for (const auto& su : test_mix) {
        DecodeResult res;
        try {
          res = factorial_viterbi(model, sequence_matrix(su.y_features));
        } catch (const std::exception& e) {
          throw NumericalError("stage decode (" + scod_method_name(cfg.methods[mi]) + "): " +
                               e.what());
        }
        const AlignmentCounts c = align_words(su.transcript, res.word_sequence);
        counts.ref_words += c.ref_words;
        counts.substitutions += c.substitutions;
        counts.deletions += c.deletions;
        counts.insertions += c.insertions;
        ll_sum += res.log_likelihood;
        op_sum += static_cast<double>(res.op_count);
      }
      ResultRow row;
      row.noise_id = profile.id;
      row.snr_db = snr;
      row.method = scod_method_name(cfg.methods[mi]);
      row.noise_states = noise_hmm.num_states();
      row.accuracy = counts.accuracy();
      row.utterances = static_cast<int>(test_mix.size());
      row.mean_log_likelihood = ll_sum / static_cast<double>(test_mix.size());
      row.mean_op_count = op_sum / static_cast<double>(test_mix.size());
      run.table.rows.push_back(std::move(row));
    }
  }
  manifest["test_mix_seeds"] = mix_seeds;

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    save_text_file(cfg.output_dir + "/results.csv", run.table.to_csv());
    save_text_file(cfg.output_dir + "/run.json", manifest.dump(2) + "\n");
  }
  return run;
}

std::vector<std::string> emit_plots(const ResultTable& table, const std::string& out_dir) {
  require(!table.rows.empty(), "emit_plots: empty result table");
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;

  struct SeriesKey {
    std::string method;
    int noise_states;
    bool operator<(const SeriesKey& o) const {
      return method != o.method ? method < o.method : noise_states < o.noise_states;
    }
  };
  std::map<SeriesKey, std::vector<std::pair<double, double>>> series;
  for (const auto& r : table.rows)
    series[{r.method, r.noise_states}].emplace_back(r.snr_db, r.accuracy);
  for (auto& [k, pts] : series)
    std::sort(pts.begin(), pts.end());

  for (const auto& [k, pts] : series) {
    std::ostringstream csv;
    csv << "snr_db,accuracy\n";
    for (const auto& [snr, acc] : pts) csv << fmt_double(snr) << ',' << fmt_double(acc) << '\n';
    const std::string path =
        out_dir + "/series_" + k.method + "_ns" + std::to_string(k.noise_states) + ".csv";
    save_text_file(path, csv.str());
    written.push_back(path);
  }

  // improvement series: multi-state minus single-state per method
  std::map<std::string, std::pair<int, int>> spans;  // method -> (min ns, max ns)
  for (const auto& [k, pts] : series) {
    auto it = spans.find(k.method);
    if (it == spans.end())
      spans[k.method] = {k.noise_states, k.noise_states};
    else {
      it->second.first = std::min(it->second.first, k.noise_states);
      it->second.second = std::max(it->second.second, k.noise_states);
    }
  }
  std::ostringstream warnings;
  for (const auto& [method, span] : spans) {
    if (span.first != 1 || span.second <= 1) {
      warnings << "no single/multi noise-state pair for method " << method
               << "; improvement series omitted\n";
      continue;
    }
    const auto& single = series[{method, 1}];
    const auto& multi = series[{method, span.second}];
    std::ostringstream csv;
    csv << "snr_db,accuracy_improvement\n";
    int points = 0;
    for (const auto& [snr, acc] : multi) {
      auto it = std::find_if(single.begin(), single.end(),
                             [&](const auto& p) { return p.first == snr; });
      if (it == single.end()) continue;
      csv << fmt_double(snr) << ',' << fmt_double(acc - it->second) << '\n';
      ++points;
    }
    if (points == 0) {
      warnings << "no shared SNR points for method " << method
               << "; improvement series omitted\n";
      continue;
    }
    const std::string path = out_dir + "/improvement_" + method + ".csv";
    save_text_file(path, csv.str());
    written.push_back(path);
  }
  if (!warnings.str().empty()) {
    const std::string path = out_dir + "/plot_warnings.txt";
    save_text_file(path, warnings.str());
    written.push_back(path);
  }

  // best-effort SVG chart over the finite-SNR points
  double snr_lo = 1e300, snr_hi = -1e300, acc_lo = 0.0, acc_hi = 100.0;
  for (const auto& [k, pts] : series)
    for (const auto& [snr, acc] : pts) {
      if (!std::isfinite(snr)) continue;
      snr_lo = std::min(snr_lo, snr);
      snr_hi = std::max(snr_hi, snr);
      acc_lo = std::min(acc_lo, acc);
      acc_hi = std::max(acc_hi, acc);
    }
  if (snr_lo <= snr_hi) {
    if (snr_lo == snr_hi) {
      snr_lo -= 1.0;
      snr_hi += 1.0;
    }
    const double W = 640, H = 420, ml = 60, mr = 160, mt = 20, mb = 50;
    auto px = [&](double snr) { return ml + (snr - snr_lo) / (snr_hi - snr_lo) * (W - ml - mr); };
    auto py = [&](double acc) { return H - mb - (acc - acc_lo) / (acc_hi - acc_lo) * (H - mt - mb); };
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                             "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    svg << "<text x='" << (ml + (W - ml - mr) / 2) << "' y='" << H - 12
        << "' text-anchor='middle' font-size='13'>SNR (dB)</text>\n";
    svg << "<text x='16' y='" << (mt + (H - mt - mb) / 2)
        << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
        << (mt + (H - mt - mb) / 2) << ")'>word accuracy (%)</text>\n";
    int idx = 0;
    for (const auto& [k, pts] : series) {
      const char* color = palette[idx % 8];
      std::ostringstream poly;
      for (const auto& [snr, acc] : pts) {
        if (!std::isfinite(snr)) continue;
        poly << px(snr) << ',' << py(acc) << ' ';
      }
      svg << "<polyline points='" << poly.str() << "' fill='none' stroke='" << color
          << "' stroke-width='2'/>\n";
      for (const auto& [snr, acc] : pts) {
        if (!std::isfinite(snr)) continue;
        svg << "<circle cx='" << px(snr) << "' cy='" << py(acc) << "' r='3' fill='" << color
            << "'/>\n";
      }
      svg << "<text x='" << W - mr + 10 << "' y='" << mt + 16 + 18 * idx
          << "' font-size='12' fill='" << color << "'>" << k.method << " (ns="
          << k.noise_states << ")</text>\n";
      ++idx;
    }
    svg << "</svg>\n";
    const std::string path = out_dir + "/accuracy_vs_snr.svg";
    save_text_file(path, svg.str());
    written.push_back(path);
  }
  return written;
}

}  // namespace fsp

#include <CLI11.hpp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include "fsp/eval.hpp"
#include "fsp/serialize.hpp"

namespace fs = std::filesystem;
using namespace fsp;

namespace {

std::vector<double> parse_snr_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    if (cell == "inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      size_t used = 0;
      out.push_back(std::stod(cell, &used));
      require(used == cell.size(), "bad SNR value: " + cell);
    }
  }
  require(!out.empty(), "empty SNR list");
  return out;
}

std::vector<ScodMethod> parse_method_list(const std::string& text) {
  std::vector<ScodMethod> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(scod_method_from_name(cell));
  require(!out.empty(), "empty method list");
  return out;
}

// shared --config handling plus the most useful command-line overrides
struct ConfigArgs {
  std::string config_path;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* noise_mode_opt = nullptr;
  CLI::Option* methods_opt = nullptr;
  CLI::Option* utts_opt = nullptr;
  CLI::Option* test_snrs_opt = nullptr;
  CLI::Option* train_snrs_opt = nullptr;
  CLI::Option* out_dir_opt = nullptr;
  CLI::Option* phase_opt = nullptr;
  uint64_t seed = 0;
  std::string noise_mode, methods, test_snrs, train_snrs, out_dir, phase;
  int num_utterances = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON file")
        ->check(CLI::ExistingFile);
    seed_opt = cmd->add_option("--seed", seed, "master random seed");
    noise_mode_opt =
        cmd->add_option("--noise-mode", noise_mode, "single | multi | fixed:<k>");
    methods_opt = cmd->add_option("--methods", methods, "comma list: vts,dpmc,idpmc,wss");
    utts_opt = cmd->add_option("--num-utterances", num_utterances, "synthetic corpus size");
    test_snrs_opt = cmd->add_option("--test-snrs", test_snrs, "comma list of dB values or inf");
    train_snrs_opt = cmd->add_option("--train-snrs", train_snrs, "comma list of dB values");
    out_dir_opt = cmd->add_option("--out-dir", out_dir, "output directory");
    phase_opt = cmd->add_option("--alpha", phase, "zero | const:<v> | sampled:<seed>");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = experiment_config_from_json(load_text_file(config_path));
    if (seed_opt->count()) cfg.seed = seed;
    if (noise_mode_opt->count()) cfg.noise_mode = noise_mode;
    if (methods_opt->count()) cfg.methods = parse_method_list(methods);
    if (utts_opt->count()) cfg.num_utterances = num_utterances;
    if (test_snrs_opt->count()) cfg.test_snrs = parse_snr_list(test_snrs);
    if (train_snrs_opt->count()) cfg.train_snrs = parse_snr_list(train_snrs);
    if (out_dir_opt->count()) cfg.output_dir = out_dir;
    if (phase_opt->count()) cfg.phase = PhaseFactorMode::parse(phase);
    cfg.validate();
    return cfg;
  }
};

SourceModels load_source_models(const std::string& dir) {
  SourceModels src;
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("word_", 0) == 0 && name.size() > 14 &&
        name.substr(name.size() - 9) == ".hmm.json")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string base = fs::path(f).filename().string();
    const std::string id = base.substr(5, base.size() - 5 - 9);
    src.word_models.emplace_back(id, load_hmm(f));
  }
  require(!src.word_models.empty(), "no word_<id>.hmm.json models in " + dir);
  src.silence = load_hmm(dir + "/silence.hmm.json");
  return src;
}

void decode_one(const FactorialModel& model, const FeatureConfig& feat, const std::string& id,
                const AudioSegment& audio) {
  const Mat obs = sequence_matrix(extract_features(audio, feat));
  const DecodeResult res = factorial_viterbi(model, obs);
  std::cout << id << '\t';
  for (size_t k = 0; k < res.word_sequence.size(); ++k)
    std::cout << (k ? " " : "") << res.word_sequence[k];
  if (res.word_sequence.empty()) std::cout << '-';
  std::cout << '\t' << res.log_likelihood << '\t' << res.op_count << '\n';
}

int dispatch(CLI::App& app, int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factorial-model speech recognition toolkit"};
  app.require_subcommand(1);
  try {
    return dispatch(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

namespace {

int dispatch(CLI::App& app, int argc, char** argv) {
  // ---- mix -------------------------------------------------------------
  auto* mix_cmd = app.add_subcommand("mix", "mix speech and noise at a target SNR");
  std::string mix_speech, mix_noise, mix_channel, mix_out;
  double mix_snr = std::numeric_limits<double>::infinity();
  double mix_gain = 0.0;
  uint64_t mix_seed = 0;
  mix_cmd->add_option("--speech", mix_speech)->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--noise", mix_noise)->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--snr", mix_snr, "target SNR in dB (inf = clean)");
  auto* gain_opt = mix_cmd->add_option("--gain", mix_gain, "fixed noise gain, bypasses SNR");
  mix_cmd->add_option("--channel", mix_channel, "channel impulse response WAV")
      ->check(CLI::ExistingFile);
  mix_cmd->add_option("--seed", mix_seed, "noise-offset seed");
  mix_cmd->add_option("--out", mix_out)->required();

  // ---- gen-corpus --------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("gen-corpus", "synthesize a labeled word corpus");
  std::string gen_dir;
  int gen_num = 20, gen_min = 2, gen_max = 5, gen_words = 4;
  uint64_t gen_seed = 0;
  gen_cmd->add_option("--out-dir", gen_dir)->required();
  gen_cmd->add_option("--num", gen_num, "number of utterances");
  gen_cmd->add_option("--min-words", gen_min);
  gen_cmd->add_option("--max-words", gen_max);
  gen_cmd->add_option("--num-words", gen_words, "vocabulary size");
  gen_cmd->add_option("--seed", gen_seed);

  // ---- train-source --------------------------------------------------------
  auto* ts_cmd = app.add_subcommand("train-source", "train word and silence models");
  ConfigArgs ts_cfg;
  ts_cfg.attach(ts_cmd);
  std::string ts_dir;
  ts_cmd->add_option("--models-dir", ts_dir, "where the model files go")->required();

  // ---- train-noise --------------------------------------------------------
  auto* tn_cmd = app.add_subcommand("train-noise", "train the noise chain");
  ConfigArgs tn_cfg;
  tn_cfg.attach(tn_cmd);
  std::string tn_wav, tn_out;
  double tn_seconds = 30.0;
  tn_cmd->add_option("--wav", tn_wav, "noise recording (default: synthesize from the profile)")
      ->check(CLI::ExistingFile);
  tn_cmd->add_option("--seconds", tn_seconds, "synthesized noise duration");
  tn_cmd->add_option("--out", tn_out)->required();

  // ---- build-scod --------------------------------------------------------
  auto* bs_cmd = app.add_subcommand("build-scod", "build the observation grid and bundle");
  ConfigArgs bs_cfg;
  bs_cfg.attach(bs_cmd);
  std::string bs_models, bs_noise, bs_method = "wss", bs_out;
  bs_cmd->add_option("--models-dir", bs_models)->required()->check(CLI::ExistingDirectory);
  bs_cmd->add_option("--noise-model", bs_noise, "default <models-dir>/noise.hmm.json");
  bs_cmd->add_option("--method", bs_method, "vts | dpmc | idpmc | wss");
  bs_cmd->add_option("--out", bs_out, "bundle JSON path")->required();

  // ---- decode --------------------------------------------------------
  auto* dec_cmd = app.add_subcommand("decode", "decode WAVs with a model bundle");
  std::string dec_bundle, dec_manifest;
  std::vector<std::string> dec_wavs;
  dec_cmd->add_option("--bundle", dec_bundle)->required()->check(CLI::ExistingFile);
  dec_cmd->add_option("--wav", dec_wavs, "WAV files to decode")->check(CLI::ExistingFile);
  dec_cmd->add_option("--manifest", dec_manifest, "corpus manifest to decode")
      ->check(CLI::ExistingFile);

  // ---- evaluate --------------------------------------------------------
  auto* ev_cmd = app.add_subcommand("evaluate", "score a bundle against a manifest");
  std::string ev_bundle, ev_manifest;
  ev_cmd->add_option("--bundle", ev_bundle)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--manifest", ev_manifest)->required()->check(CLI::ExistingFile);

  // ---- run --------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "full experiment pipeline");
  ConfigArgs run_cfg;
  run_cfg.attach(run_cmd);

  // ---- emit-plots --------------------------------------------------------
  auto* ep_cmd = app.add_subcommand("emit-plots", "plot-ready series from a result table");
  std::string ep_results, ep_dir;
  ep_cmd->add_option("--results", ep_results)->required()->check(CLI::ExistingFile);
  ep_cmd->add_option("--out-dir", ep_dir)->required();

  app.parse(argc, argv);

  if (mix_cmd->parsed()) {
    const AudioSegment x = read_wav(mix_speech);
    const AudioSegment n = read_wav(mix_noise);
    EnvironmentSpec env;
    env.target_snr_db = mix_snr;
    env.rng_seed = mix_seed;
    if (gain_opt->count()) env.fixed_gain = mix_gain;
    if (!mix_channel.empty()) env.channel_impulse = read_wav(mix_channel);
    const MixResult res = mix(x, n, env);
    write_wav(mix_out, res.y);
    std::cout << "gain=" << res.gain << " noise_offset=" << res.noise_offset << '\n';
    return 0;
  }

  if (gen_cmd->parsed()) {
    SyntheticVocabulary vocab = SyntheticVocabulary::default_vocab(gen_words);
    SyntheticCorpus corpus =
        generate_synthetic_corpus(vocab, gen_num, gen_min, gen_max, gen_seed);
    fs::create_directories(gen_dir);
    std::vector<ManifestRow> rows;
    for (size_t k = 0; k < corpus.utterances.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "utt_%05zu.wav", k);
      const std::string wav = gen_dir + "/" + name;
      write_wav(wav, corpus.utterances[k].audio);
      ManifestRow row;
      row.utterance_id = std::string(name, std::strlen(name) - 4);
      row.wav_path = wav;
      row.transcript = corpus.utterances[k].transcript;
      row.snr_db = std::numeric_limits<double>::infinity();
      row.noise_id = "none";
      row.seed = gen_seed;
      rows.push_back(std::move(row));
    }
    write_manifest(gen_dir + "/manifest.txt", rows);
    std::cout << "wrote " << rows.size() << " utterances to " << gen_dir << '\n';
    return 0;
  }

  if (ts_cmd->parsed()) {
    const ExperimentConfig cfg = ts_cfg.resolve();
    const SourceModels src = train_source_models(cfg);
    fs::create_directories(ts_dir);
    for (const auto& [id, hmm] : src.word_models)
      save_hmm(ts_dir + "/word_" + id + ".hmm.json", hmm);
    save_hmm(ts_dir + "/silence.hmm.json", src.silence);
    std::cout << "wrote " << src.word_models.size() << " word models + silence to " << ts_dir
              << '\n';
    return 0;
  }

  if (tn_cmd->parsed()) {
    const ExperimentConfig cfg = tn_cfg.resolve();
    AudioSegment noise;
    if (!tn_wav.empty()) {
      noise = read_wav(tn_wav);
    } else {
      noise = generate_noise(cfg.vocab.noise_profiles.at(0),
                             static_cast<Eigen::Index>(tn_seconds * cfg.vocab.sample_rate),
                             cfg.vocab.sample_rate, cfg.seed)
                  .audio;
    }
    const Mat feats = sequence_matrix(extract_features(noise, cfg.features));
    const Hmm hmm = train_noise_model(feats, cfg, cfg.seed);
    save_hmm(tn_out, hmm);
    std::cout << "noise model: " << hmm.num_states() << " states -> " << tn_out << '\n';
    return 0;
  }

  if (bs_cmd->parsed()) {
    const ExperimentConfig cfg = bs_cfg.resolve();
    const SourceModels src = load_source_models(bs_models);
    const std::string noise_path =
        bs_noise.empty() ? bs_models + "/noise.hmm.json" : bs_noise;
    const Hmm noise = load_hmm(noise_path);
    const ScodMethod method = scod_method_from_name(bs_method);
    const ModelBundle bundle = build_bundle(cfg, src, noise, method, cfg.seed);
    save_bundle(bs_out, bundle);
    int supported = 0;
    for (const auto& c : bundle.scod.cells) supported += c.supported ? 1 : 0;
    std::cout << "grid " << bundle.scod.speech_states << 'x' << bundle.scod.noise_states << ", "
              << supported << '/' << bundle.scod.cells.size() << " cells supported -> " << bs_out
              << '\n';
    return 0;
  }

  if (dec_cmd->parsed()) {
    require(!dec_wavs.empty() || !dec_manifest.empty(), "decode: give --wav or --manifest");
    const ModelBundle bundle = load_bundle(dec_bundle);
    const FactorialModel model = bundle.compose(true);
    for (const auto& w : dec_wavs) decode_one(model, bundle.features, w, read_wav(w));
    if (!dec_manifest.empty())
      for (const auto& row : read_manifest(dec_manifest))
        decode_one(model, bundle.features, row.utterance_id, read_wav(row.wav_path));
    return 0;
  }

  if (ev_cmd->parsed()) {
    const ModelBundle bundle = load_bundle(ev_bundle);
    const FactorialModel model = bundle.compose(true);
    AlignmentCounts totals;
    int utts = 0;
    for (const auto& row : read_manifest(ev_manifest)) {
      require(!row.transcript.empty(), "evaluate: manifest row without transcript: " +
                                           row.utterance_id);
      const Mat obs =
          sequence_matrix(extract_features(read_wav(row.wav_path), bundle.features));
      const DecodeResult res = factorial_viterbi(model, obs);
      const AlignmentCounts c = align_words(row.transcript, res.word_sequence);
      totals.ref_words += c.ref_words;
      totals.substitutions += c.substitutions;
      totals.deletions += c.deletions;
      totals.insertions += c.insertions;
      ++utts;
    }
    require(utts > 0, "evaluate: empty manifest");
    std::cout << "utterances=" << utts << " words=" << totals.ref_words
              << " sub=" << totals.substitutions << " del=" << totals.deletions
              << " ins=" << totals.insertions << " accuracy=" << totals.accuracy() << '\n';
    return 0;
  }

  if (run_cmd->parsed()) {
    const ExperimentConfig cfg = run_cfg.resolve();
    const ExperimentRun run = run_experiment(cfg);
    std::cout << run.table.to_csv();
    return 0;
  }

  if (ep_cmd->parsed()) {
    const ResultTable table = ResultTable::from_csv(load_text_file(ep_results));
    for (const auto& f : emit_plots(table, ep_dir)) std::cout << f << '\n';
    return 0;
  }

  return 1;
}

}  // namespace

#include <doctest.h>

#include <filesystem>
#include <random>

#include "fsp/eval.hpp"
#include "fsp/serialize.hpp"
#include "helpers.hpp"

using namespace fsp;
using namespace fsp::testing;

TEST_CASE("word accuracy on the documented examples") {
  const std::vector<std::string> five{"a", "b", "c", "d", "e"};
  CHECK(word_accuracy(five, five) == 100.0);
  CHECK(word_accuracy({"1", "2", "3"}, {"1", "3"}) == doctest::Approx(200.0 / 3.0));
  CHECK(word_accuracy({"1"}, {"1", "1", "1"}) == -100.0);
  CHECK_THROWS_AS(static_cast<void>(word_accuracy({}, {"a"})), DataError);
}

TEST_CASE("alignment matches the exhaustive oracle on every tiny pair") {
  const std::vector<std::string> vocab{"x", "y", "z"};
  std::vector<std::vector<std::string>> seqs{{}};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : seqs)
      if (static_cast<int>(s.size()) == len - 1)
        for (const auto& w : vocab) {
          auto t = s;
          t.push_back(w);
          next.push_back(std::move(t));
        }
    seqs.insert(seqs.end(), next.begin(), next.end());
  }
  int checked = 0;
  for (const auto& ref : seqs) {
    if (ref.empty()) continue;
    for (const auto& hyp : seqs) {
      const AlignmentCounts c = align_words(ref, hyp);
      const int oracle = edit_distance_oracle(ref, hyp, 0, 0);
      CHECK(c.substitutions + c.deletions + c.insertions == oracle);
      CHECK(c.ref_words == static_cast<int>(ref.size()));
      ++checked;
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("result table CSV round trip and averaging") {
  ResultTable table;
  table.rows.push_back({"machine2", 20.0, "wss", 2, 95.5, 40, -1234.5, 47628.0});
  table.rows.push_back({"machine2", 0.0, "wss", 2, 61.25, 40, -2345.25, 47628.0});
  table.rows.push_back(
      {"machine2", std::numeric_limits<double>::infinity(), "vts", 1, 100.0, 40, -99.5, 1.0});
  const std::string csv = table.to_csv();
  const ResultTable back = ResultTable::from_csv(csv);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.to_csv() == csv);
  CHECK(back.rows[2].snr_db == std::numeric_limits<double>::infinity());
  CHECK(table.mean_accuracy("wss", 2, 0.0, 20.0) == doctest::Approx((95.5 + 61.25) / 2.0));
  CHECK_THROWS_AS(static_cast<void>(table.mean_accuracy("nope", 1, 0.0, 20.0)), DataError);
  CHECK_THROWS_AS(static_cast<void>(ResultTable::from_csv("bogus\n")), DataError);
}

TEST_CASE("experiment config JSON round trips and rejects unknown keys") {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.noise_mode = "fixed:2";
  cfg.methods = {ScodMethod::VTS, ScodMethod::WSS};
  cfg.test_snrs = {std::numeric_limits<double>::infinity(), 10.0};
  const std::string text = experiment_config_to_json(cfg);
  const ExperimentConfig back = experiment_config_from_json(text);
  CHECK(back.seed == 42);
  CHECK(back.noise_mode == "fixed:2");
  CHECK(back.methods == cfg.methods);
  CHECK(std::isinf(back.test_snrs[0]));
  CHECK(experiment_config_to_json(back) == text);
  CHECK_THROWS_AS(static_cast<void>(experiment_config_from_json("{\"turbo\": true}")), DataError);
  CHECK_THROWS_AS(static_cast<void>(experiment_config_from_json("not json")), DataError);
}

TEST_CASE("model serialization is byte-stable and validated") {
  std::mt19937_64 rng(71);
  const Hmm hmm = random_hmm(rng, 3, 2, 4);
  const std::string once = hmm_to_json(hmm);
  const Hmm loaded = hmm_from_json(once);
  CHECK(hmm_to_json(loaded) == once);
  CHECK(loaded.transitions == hmm.transitions);
  CHECK(loaded.emissions[0].components[0].mean == hmm.emissions[0].components[0].mean);

  // loaded models serve identical likelihoods
  for (int q = 0; q < 100; ++q) {
    const Vec y = random_vec(rng, 4, -3.0, 3.0);
    CHECK(loaded.emissions[0].log_likelihood(y) == hmm.emissions[0].log_likelihood(y));
  }

  CHECK_THROWS_AS(static_cast<void>(hmm_from_json(once.substr(0, once.size() / 2))), DataError);
  std::string wrong_version = once;
  wrong_version.replace(wrong_version.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(static_cast<void>(hmm_from_json(wrong_version)), DataError);
  CHECK_THROWS_AS(static_cast<void>(gmm_from_json(once)), DataError);  // format tag mismatch
}

TEST_CASE("scod grid serialization reproduces likelihood queries exactly") {
  std::mt19937_64 rng(72);
  FactorialModel model = random_factorial(rng, 3, 2, 4);
  model.scod.cell(2, 1).supported = false;  // keep one floored cell in the file
  const std::string text = scod_to_json(model.scod);
  const ScodGrid back = scod_from_json(text);
  CHECK(scod_to_json(back) == text);
  for (int q = 0; q < 100; ++q) {
    const Vec y = random_vec(rng, 4, -3.0, 3.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(back.log_likelihood(i, j, y) == model.scod.log_likelihood(i, j, y));
  }
}

TEST_CASE("bundle round trip composes an equivalent deployment model") {
  std::mt19937_64 rng(73);
  ModelBundle bundle;
  bundle.features = FeatureConfig::mfcc0d26();
  bundle.phase = PhaseFactorMode::constant(2.5);
  Hmm word = random_hmm(rng, 2, 1, 4);
  word.exit_probs[1] = 0.3;
  bundle.word_models = {{"w0", word}, {"w1", random_hmm(rng, 2, 1, 4)}};
  bundle.silence = random_hmm(rng, 1, 1, 4);
  bundle.noise = random_hmm(rng, 2, 1, 4);
  const ComposedHmm composed = compose_grammar(bundle.word_models, bundle.silence, true);
  bundle.scod = random_factorial(rng, composed.hmm.num_states(), 2, 4).scod;

  const std::string path =
      (std::filesystem::temp_directory_path() / "fsp_bundle_test.json").string();
  save_bundle(path, bundle);
  const ModelBundle back = load_bundle(path);
  CHECK(bundle_to_json(back) == load_text_file(path));
  const FactorialModel a = bundle.compose(true);
  const FactorialModel b = back.compose(true);
  CHECK(a.speech_chain.transitions == b.speech_chain.transitions);
  CHECK(a.state_words == b.state_words);
  std::filesystem::remove(path);
}

TEST_CASE("emit_plots writes series, improvements, and warnings") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "fsp_plots_test").string();
  std::filesystem::remove_all(dir);

  ResultTable table;
  table.rows.push_back({"machine2", 10.0, "wss", 2, 80.0, 40, -1.0, 10.0});
  table.rows.push_back({"machine2", 0.0, "wss", 2, 60.0, 40, -1.0, 10.0});
  table.rows.push_back({"machine2", 10.0, "wss", 1, 70.0, 40, -1.0, 10.0});
  table.rows.push_back({"machine2", 0.0, "wss", 1, 55.0, 40, -1.0, 10.0});
  table.rows.push_back({"machine2", 10.0, "vts", 2, 65.0, 40, -1.0, 10.0});

  const auto files = emit_plots(table, dir);
  auto has = [&](const std::string& name) {
    return std::find_if(files.begin(), files.end(), [&](const std::string& f) {
             return f.size() >= name.size() && f.substr(f.size() - name.size()) == name;
           }) != files.end();
  };
  CHECK(has("series_wss_ns2.csv"));
  CHECK(has("series_wss_ns1.csv"));
  CHECK(has("series_vts_ns2.csv"));
  CHECK(has("improvement_wss.csv"));
  CHECK(has("plot_warnings.txt"));  // vts has no single-state series
  CHECK(has("accuracy_vs_snr.svg"));

  const std::string imp = load_text_file(dir + "/improvement_wss.csv");
  CHECK(imp == "snr_db,accuracy_improvement\n0,5\n10,10\n");

  // single-row table -> single-point series, no improvement output
  ResultTable tiny;
  tiny.rows.push_back({"machine2", 5.0, "wss", 1, 50.0, 10, -1.0, 10.0});
  const std::string dir2 = dir + "2";
  std::filesystem::remove_all(dir2);
  const auto files2 = emit_plots(tiny, dir2);
  CHECK(load_text_file(dir2 + "/series_wss_ns1.csv") == "snr_db,accuracy\n5,50\n");

  CHECK_THROWS_AS(static_cast<void>(emit_plots(ResultTable{}, dir2)), DataError);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("experiment pipeline is deterministic end to end") {
  ExperimentConfig cfg;
  cfg.num_utterances = 10;
  cfg.tokens_per_word = 6;
  cfg.methods = {ScodMethod::VTS};
  cfg.test_snrs = {10.0};
  cfg.train_snrs = {10.0};
  cfg.noise_mode = "single";
  cfg.seed = 123;
  const ExperimentRun a = run_experiment(cfg);
  const ExperimentRun b = run_experiment(cfg);
  CHECK(a.table.to_csv() == b.table.to_csv());
  REQUIRE(a.table.rows.size() == 1);
  CHECK(a.table.rows[0].noise_states == 1);
  CHECK(a.table.rows[0].utterances == 2);
  CHECK(a.table.rows[0].accuracy <= 100.0);
}

TEST_CASE("method sweep produces the full cartesian row set") {
  ExperimentConfig cfg;
  cfg.num_utterances = 10;
  cfg.tokens_per_word = 6;
  cfg.methods = {ScodMethod::VTS, ScodMethod::IDPMC, ScodMethod::WSS};
  cfg.test_snrs = {std::numeric_limits<double>::infinity(), 5.0};
  cfg.train_snrs = {10.0, 0.0};
  cfg.noise_mode = "fixed:2";
  cfg.seed = 5;
  const ExperimentRun run = run_experiment(cfg);
  CHECK(run.noise_states == 2);
  CHECK(run.table.rows.size() == 6);  // 3 methods x 2 SNRs
  for (const std::string& m : {"vts", "idpmc", "wss"}) {
    int rows = 0;
    double sum = 0.0;
    for (const auto& r : run.table.rows)
      if (r.method == m) {
        ++rows;
        if (std::isfinite(r.snr_db)) sum += r.accuracy;
      }
    CHECK(rows == 2);
    // the mean over a declared SNR window matches the per-cell average
    CHECK(run.table.mean_accuracy(m, 2, 0.0, 20.0) == doctest::Approx(sum));
  }
}

TEST_CASE("run artifacts include the results table and a complete manifest") {
  const std::string dir = (std::filesystem::temp_directory_path() / "fsp_run_test").string();
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg;
  cfg.num_utterances = 10;
  cfg.tokens_per_word = 6;
  cfg.methods = {ScodMethod::VTS};
  cfg.test_snrs = {10.0};
  cfg.train_snrs = {10.0};
  cfg.noise_mode = "single";
  cfg.seed = 9;
  cfg.output_dir = dir;
  const ExperimentRun run = run_experiment(cfg);
  CHECK(ResultTable::from_csv(load_text_file(dir + "/results.csv")).to_csv() ==
        run.table.to_csv());
  const std::string manifest = load_text_file(dir + "/run.json");
  for (const char* key : {"seed", "corpus_seed", "noise_seed", "word_model_seeds",
                          "silence_seed", "train_mix_seed", "noise_model_seed",
                          "scod_build_seeds", "test_mix_seeds"})
    CHECK(manifest.find(key) != std::string::npos);
  std::filesystem::remove_all(dir);
}

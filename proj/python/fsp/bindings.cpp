#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fsp/eval.hpp"
#include "fsp/serialize.hpp"

namespace py = pybind11;
using namespace fsp;

namespace {

FeatureConfig config_for(const std::string& space, int sample_rate) {
  const FeatureSpace id = feature_space_from_name(space);
  return id == FeatureSpace::Mfcc0d26 ? FeatureConfig::mfcc0d26(sample_rate)
                                      : FeatureConfig::log_mel_fbd42(sample_rate);
}

AudioSegment segment(const Vec& samples, int sample_rate) {
  AudioSegment seg;
  seg.samples = samples;
  seg.sample_rate = sample_rate;
  seg.validate();
  return seg;
}

}  // namespace

PYBIND11_MODULE(_fsp, m) {
  m.doc() = "factorial-model speech recognition toolkit";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "extract_features",
      [](const Vec& samples, int sample_rate, const std::string& space) -> Mat {
        return sequence_matrix(extract_features(segment(samples, sample_rate), config_for(space, sample_rate)));
      },
      py::arg("samples"), py::arg("sample_rate") = 8000, py::arg("space") = "mfcc0d26",
      "Feature matrix [frames x dim] (statics + deltas) for a mono signal.");

  m.def(
      "mix",
      [](const Vec& x, const Vec& n, double snr_db, int sample_rate, uint64_t seed) {
        EnvironmentSpec env;
        env.target_snr_db = snr_db;
        env.rng_seed = seed;
        MixResult res = mix(segment(x, sample_rate), segment(n, sample_rate), env);
        return py::make_tuple(res.y.samples, res.gain);
      },
      py::arg("speech"), py::arg("noise"), py::arg("snr_db"), py::arg("sample_rate") = 8000,
      py::arg("seed") = 0, "Mix speech and noise at a target SNR; returns (samples, gain).");

  m.def(
      "mismatch",
      [](const Vec& x_c, const Vec& n_c, double alpha, int num_cepstra) -> Vec {
        const DctMatrix dct = make_dct(num_cepstra, num_cepstra);
        const Vec a = Vec::Constant(num_cepstra, alpha);
        return mismatch_cepstral(x_c, Vec::Zero(num_cepstra), n_c, dct, a);
      },
      py::arg("x"), py::arg("n"), py::arg("alpha") = 0.0, py::arg("num_cepstra") = 13,
      "Cepstral-domain corrupted-speech mismatch of clean speech and noise.");

  m.def("word_accuracy", &word_accuracy, py::arg("ref"), py::arg("hyp"),
        "Levenshtein word accuracy, (N - S - D - I) / N * 100.");

  m.def(
      "read_wav",
      [](const std::string& path) {
        const AudioSegment seg = read_wav(path);
        return py::make_tuple(seg.samples, seg.sample_rate);
      },
      py::arg("path"), "Read a 16-bit mono PCM WAV; returns (samples, sample_rate).");

  m.def(
      "write_wav",
      [](const std::string& path, const Vec& samples, int sample_rate) {
        write_wav(path, segment(samples, sample_rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 8000);

  m.def(
      "generate_corpus",
      [](int num_utterances, int num_words, int min_words, int max_words, uint64_t seed) {
        const SyntheticVocabulary vocab = SyntheticVocabulary::default_vocab(num_words);
        const SyntheticCorpus corpus =
            generate_synthetic_corpus(vocab, num_utterances, min_words, max_words, seed);
        py::list out;
        for (const auto& u : corpus.utterances) out.append(py::make_tuple(u.audio.samples, u.transcript));
        return out;
      },
      py::arg("num_utterances"), py::arg("num_words") = 4, py::arg("min_words") = 2,
      py::arg("max_words") = 5, py::arg("seed") = 0,
      "Synthetic labeled corpus; list of (samples, transcript) pairs.");

  m.def(
      "decode_wav",
      [](const std::string& bundle_path, const std::string& wav_path) {
        const ModelBundle bundle = load_bundle(bundle_path);
        const FactorialModel model = bundle.compose(true);
        const Mat obs = sequence_matrix(extract_features(read_wav(wav_path), bundle.features));
        const DecodeResult res = factorial_viterbi(model, obs);
        return py::make_tuple(res.word_sequence, res.log_likelihood, res.op_count);
      },
      py::arg("bundle_path"), py::arg("wav_path"),
      "Decode one WAV with a saved model bundle; returns (words, log_likelihood, op_count).");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = experiment_config_from_json(config_json);
        return run_experiment(cfg).table.to_csv();
      },
      py::arg("config_json"),
      "Full train/build/decode/score pipeline from a JSON config string; returns the result CSV.");

  m.def("default_config_json",
        []() { return experiment_config_to_json(ExperimentConfig{}); },
        "JSON text of the default experiment configuration.");
}

#include "fsp/serialize.hpp"

#include <fstream>
#include <json.hpp>

namespace fsp {

using json = nlohmann::ordered_json;

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  if (!a.is_array()) throw DataError("model file: expected a numeric array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw DataError("model file: expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i)));
  return rows;
}

Mat mat_from_json(const json& rows) {
  if (!rows.is_array()) throw DataError("model file: expected a matrix (array of arrays)");
  if (rows.empty()) return Mat(0, 0);
  Mat m;
  for (size_t i = 0; i < rows.size(); ++i) {
    Vec r = vec_from_json(rows[i]);
    if (i == 0) m.resize(static_cast<Eigen::Index>(rows.size()), r.size());
    if (r.size() != m.cols()) throw DataError("model file: ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = r;
  }
  return m;
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw DataError(std::string("model file: missing field '") + name + "'");
  return *it;
}

void check_header(const json& j, const std::string& format) {
  if (!j.is_object()) throw DataError("model file: top level must be an object");
  const std::string got = field(j, "format").get<std::string>();
  if (got != format)
    throw DataError("model file: expected format '" + format + "', found '" + got + "'");
  const int version = field(j, "version").get<int>();
  if (version != kModelFormatVersion)
    throw DataError("model file: unsupported version " + std::to_string(version));
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: invalid JSON: ") + e.what());
  }
}

json gmm_to_obj(const Gmm& gmm) {
  json j;
  j["cov_kind"] = cov_kind_name(gmm.cov_kind);
  json comps = json::array();
  for (const auto& c : gmm.components) {
    json jc;
    jc["log_weight"] = c.log_weight;
    jc["mean"] = vec_to_json(c.mean);
    jc["cov"] = mat_to_json(c.cov);
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j;
}

Gmm gmm_from_obj(const json& j) {
  Gmm gmm;
  gmm.cov_kind = cov_kind_from_name(field(j, "cov_kind").get<std::string>());
  const json& comps = field(j, "components");
  if (!comps.is_array() || comps.empty())
    throw DataError("model file: mixture needs at least one component");
  for (const auto& jc : comps) {
    GaussianComponent c;
    c.log_weight = field(jc, "log_weight").get<double>();
    c.mean = vec_from_json(field(jc, "mean"));
    c.cov = mat_from_json(field(jc, "cov"));
    if (c.cov.rows() != c.mean.size() || c.cov.cols() != c.mean.size())
      throw DataError("model file: covariance shape does not match mean");
    gmm.components.push_back(std::move(c));
  }
  gmm.refresh();
  return gmm;
}

json hmm_to_obj(const Hmm& hmm) {
  json j;
  j["topology"] = topology_name(hmm.topology);
  j["priors"] = vec_to_json(hmm.priors);
  j["transitions"] = mat_to_json(hmm.transitions);
  j["exit_probs"] = vec_to_json(hmm.exit_probs);
  json ems = json::array();
  for (const auto& g : hmm.emissions) ems.push_back(gmm_to_obj(g));
  j["emissions"] = std::move(ems);
  return j;
}

Hmm hmm_from_obj(const json& j) {
  Hmm hmm;
  hmm.topology = topology_from_name(field(j, "topology").get<std::string>());
  hmm.priors = vec_from_json(field(j, "priors"));
  hmm.transitions = mat_from_json(field(j, "transitions"));
  hmm.exit_probs = vec_from_json(field(j, "exit_probs"));
  for (const auto& jg : field(j, "emissions")) hmm.emissions.push_back(gmm_from_obj(jg));
  hmm.validate();
  return hmm;
}

json feature_config_to_obj(const FeatureConfig& cfg) {
  json j;
  j["space"] = feature_space_name(cfg.space_id);
  j["sample_rate"] = cfg.sample_rate;
  j["frame_length"] = cfg.frame_length;
  j["hop_length"] = cfg.hop_length;
  j["window"] = static_cast<int>(cfg.window);
  j["fft_size"] = cfg.fft_size;
  j["num_filters"] = cfg.num_filters;
  j["num_cepstra"] = cfg.num_cepstra;
  j["delta_window"] = cfg.delta_window;
  j["energy_floor"] = cfg.energy_floor;
  return j;
}

FeatureConfig feature_config_from_obj(const json& j) {
  FeatureConfig cfg;
  cfg.space_id = feature_space_from_name(field(j, "space").get<std::string>());
  cfg.sample_rate = field(j, "sample_rate").get<int>();
  cfg.frame_length = field(j, "frame_length").get<int>();
  cfg.hop_length = field(j, "hop_length").get<int>();
  cfg.window = static_cast<WindowKind>(field(j, "window").get<int>());
  cfg.fft_size = field(j, "fft_size").get<int>();
  cfg.num_filters = field(j, "num_filters").get<int>();
  cfg.num_cepstra = field(j, "num_cepstra").get<int>();
  cfg.delta_window = field(j, "delta_window").get<int>();
  cfg.energy_floor = field(j, "energy_floor").get<double>();
  cfg.validate();
  return cfg;
}

json scod_to_obj(const ScodGrid& grid) {
  json j;
  j["speech_states"] = grid.speech_states;
  j["noise_states"] = grid.noise_states;
  j["observation_space"] = feature_space_name(grid.observation_space);
  j["method"] = scod_method_name(grid.method);
  j["unsupported_floor"] = grid.unsupported_floor;
  json cells = json::array();
  for (const auto& cell : grid.cells) {
    json jc;
    jc["supported"] = cell.supported;
    jc["total_weight"] = cell.total_weight;
    jc["iterations"] = cell.iterations;
    jc["reseeds"] = cell.reseeds;
    if (cell.supported) jc["gmm"] = gmm_to_obj(cell.gmm);
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  return j;
}

ScodGrid scod_from_obj(const json& j) {
  ScodGrid grid;
  grid.speech_states = field(j, "speech_states").get<int>();
  grid.noise_states = field(j, "noise_states").get<int>();
  grid.observation_space = feature_space_from_name(field(j, "observation_space").get<std::string>());
  grid.method = scod_method_from_name(field(j, "method").get<std::string>());
  grid.unsupported_floor = field(j, "unsupported_floor").get<double>();
  const json& cells = field(j, "cells");
  const size_t expect = static_cast<size_t>(grid.speech_states) * grid.noise_states;
  if (!cells.is_array() || cells.size() != expect)
    throw DataError("model file: grid cell count does not match the state grid");
  for (const auto& jc : cells) {
    ScodCell cell;
    cell.supported = field(jc, "supported").get<bool>();
    cell.total_weight = field(jc, "total_weight").get<double>();
    cell.iterations = field(jc, "iterations").get<int>();
    cell.reseeds = field(jc, "reseeds").get<int>();
    if (cell.supported) cell.gmm = gmm_from_obj(field(jc, "gmm"));
    grid.cells.push_back(std::move(cell));
  }
  return grid;
}

std::string dump(json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string gmm_to_json(const Gmm& gmm) {
  json j;
  j["format"] = "fsp-gmm";
  j["version"] = kModelFormatVersion;
  j.update(gmm_to_obj(gmm));
  return dump(j);
}

Gmm gmm_from_json(const std::string& text) {
  json j = parse(text);
  check_header(j, "fsp-gmm");
  return gmm_from_obj(j);
}

std::string hmm_to_json(const Hmm& hmm) {
  json j;
  j["format"] = "fsp-hmm";
  j["version"] = kModelFormatVersion;
  j.update(hmm_to_obj(hmm));
  return dump(j);
}

Hmm hmm_from_json(const std::string& text) {
  json j = parse(text);
  check_header(j, "fsp-hmm");
  return hmm_from_obj(j);
}

std::string feature_config_to_json(const FeatureConfig& cfg) {
  json j;
  j["format"] = "fsp-features";
  j["version"] = kModelFormatVersion;
  j.update(feature_config_to_obj(cfg));
  return dump(j);
}

FeatureConfig feature_config_from_json(const std::string& text) {
  json j = parse(text);
  check_header(j, "fsp-features");
  return feature_config_from_obj(j);
}

std::string scod_to_json(const ScodGrid& grid) {
  json j;
  j["format"] = "fsp-scod";
  j["version"] = kModelFormatVersion;
  j.update(scod_to_obj(grid));
  return dump(j);
}

ScodGrid scod_from_json(const std::string& text) {
  json j = parse(text);
  check_header(j, "fsp-scod");
  return scod_from_obj(j);
}

FactorialModel ModelBundle::compose(bool loop) const {
  ComposedHmm composed = compose_grammar(word_models, silence, loop);
  FactorialModel model;
  model.speech_chain = std::move(composed.hmm);
  model.state_words = std::move(composed.state_words);
  model.word_end_states = std::move(composed.word_end_states);
  model.noise_chain = noise;
  model.scod = scod;
  model.validate();
  return model;
}

std::string bundle_to_json(const ModelBundle& bundle) {
  json j;
  j["format"] = "fsp-bundle";
  j["version"] = kModelFormatVersion;
  j["features"] = feature_config_to_obj(bundle.features);
  j["phase"] = bundle.phase.to_string();
  json words = json::array();
  for (const auto& [name, hmm] : bundle.word_models) {
    json jw;
    jw["word"] = name;
    jw["model"] = hmm_to_obj(hmm);
    words.push_back(std::move(jw));
  }
  j["word_models"] = std::move(words);
  j["silence"] = hmm_to_obj(bundle.silence);
  j["noise"] = hmm_to_obj(bundle.noise);
  j["scod"] = scod_to_obj(bundle.scod);
  return dump(j);
}

ModelBundle bundle_from_json(const std::string& text) {
  json j = parse(text);
  check_header(j, "fsp-bundle");
  ModelBundle bundle;
  bundle.features = feature_config_from_obj(field(j, "features"));
  bundle.phase = PhaseFactorMode::parse(field(j, "phase").get<std::string>());
  for (const auto& jw : field(j, "word_models"))
    bundle.word_models.emplace_back(field(jw, "word").get<std::string>(),
                                    hmm_from_obj(field(jw, "model")));
  bundle.silence = hmm_from_obj(field(j, "silence"));
  bundle.noise = hmm_from_obj(field(j, "noise"));
  bundle.scod = scod_from_obj(field(j, "scod"));
  return bundle;
}

void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed: " + path);
}

std::string load_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void save_hmm(const std::string& path, const Hmm& hmm) { save_text_file(path, hmm_to_json(hmm)); }
Hmm load_hmm(const std::string& path) { return hmm_from_json(load_text_file(path)); }
void save_scod(const std::string& path, const ScodGrid& grid) {
  save_text_file(path, scod_to_json(grid));
}
ScodGrid load_scod(const std::string& path) { return scod_from_json(load_text_file(path)); }
void save_bundle(const std::string& path, const ModelBundle& bundle) {
  save_text_file(path, bundle_to_json(bundle));
}
ModelBundle load_bundle(const std::string& path) {
  return bundle_from_json(load_text_file(path));
}

}  // namespace fsp

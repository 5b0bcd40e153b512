#ifndef FSP_SERIALIZE_HPP
#define FSP_SERIALIZE_HPP

#include <map>
#include <string>
#include <vector>

#include "fsp/common.hpp"
#include "fsp/decoder.hpp"
#include "fsp/features.hpp"
#include "fsp/gmm.hpp"
#include "fsp/hmm.hpp"
#include "fsp/scod.hpp"

// JSON model files. Every file carries a "format" tag and an integer
// "version"; loading rejects unknown tags and versions. Doubles are written
// with the serializer's exact round-trip representation, so
// save -> load -> save reproduces the file byte for byte.

namespace fsp {

inline constexpr int kModelFormatVersion = 1;

std::string gmm_to_json(const Gmm& gmm);
Gmm gmm_from_json(const std::string& text);

std::string hmm_to_json(const Hmm& hmm);
Hmm hmm_from_json(const std::string& text);

std::string feature_config_to_json(const FeatureConfig& cfg);
FeatureConfig feature_config_from_json(const std::string& text);

std::string scod_to_json(const ScodGrid& grid);
ScodGrid scod_from_json(const std::string& text);

// Everything a decode run needs: front-end config, the composed grammar and
// its word models, the noise chain, and the observation grid.
struct ModelBundle {
  FeatureConfig features;
  std::vector<std::pair<std::string, Hmm>> word_models;
  Hmm silence;
  Hmm noise;
  ScodGrid scod;
  PhaseFactorMode phase;

  FactorialModel compose(bool loop = true) const;
};

std::string bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const std::string& text);

void save_text_file(const std::string& path, const std::string& text);
std::string load_text_file(const std::string& path);

void save_hmm(const std::string& path, const Hmm& hmm);
Hmm load_hmm(const std::string& path);
void save_scod(const std::string& path, const ScodGrid& grid);
ScodGrid load_scod(const std::string& path);
void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);

}  // namespace fsp

#endif

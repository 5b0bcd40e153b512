#ifndef FSP_AUDIO_HPP
#define FSP_AUDIO_HPP

#include <string>

#include "fsp/common.hpp"

namespace fsp {

struct AudioSegment {
  Vec samples;       // amplitude, dimensionless
  int sample_rate = 8000;

  void validate() const {
    require(sample_rate > 0, "sample_rate must be positive");
    require(samples.allFinite(), "audio samples must be finite");
  }
};

// Mono 16-bit signed little-endian PCM. Samples map to [-1, 1) on read
// and are clipped to that range on write.
AudioSegment read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioSegment& seg);

}  // namespace fsp

#endif

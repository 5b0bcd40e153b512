#include "fsp/audio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace fsp {

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

AudioSegment read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open wav file: " + path);

  char tag[4];
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "RIFF", 4) == 0, "not a RIFF file: " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  require(in.good() && std::memcmp(tag, "WAVE", 4) == 0, "not a WAVE file: " + path);

  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  std::vector<int16_t> pcm;
  bool have_fmt = false, have_data = false;
  while (in.read(tag, 4)) {
    const uint32_t size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = read_u16(in);
      channels = read_u16(in);
      sample_rate = static_cast<int>(read_u32(in));
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      require(format == 1, "only PCM wav supported: " + path);
      require(channels == 1, "only mono wav supported: " + path);
      require(bits == 16, "only 16-bit wav supported: " + path);
      if (size > 16) in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      require(have_fmt, "wav data chunk before fmt: " + path);
      const size_t count = size / 2;
      pcm.resize(count);
      in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(count * 2));
      require(in.good(), "truncated wav data: " + path);
      have_data = true;
      break;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  require(have_data, "wav file has no data chunk: " + path);

  AudioSegment seg;
  seg.sample_rate = sample_rate;
  seg.samples.resize(static_cast<Eigen::Index>(pcm.size()));
  for (size_t i = 0; i < pcm.size(); ++i)
    seg.samples[static_cast<Eigen::Index>(i)] = static_cast<double>(pcm[i]) / 32768.0;
  return seg;
}

void write_wav(const std::string& path, const AudioSegment& seg) {
  seg.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write wav file: " + path);

  const uint32_t n = static_cast<uint32_t>(seg.samples.size());
  const uint32_t data_size = n * 2;
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(seg.sample_rate));
  write_u32(out, static_cast<uint32_t>(seg.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  for (uint32_t i = 0; i < n; ++i) {
    double v = std::clamp(seg.samples[static_cast<Eigen::Index>(i)], -1.0, 32767.0 / 32768.0);
    const int16_t s = static_cast<int16_t>(std::lrint(v * 32768.0));
    write_u16(out, static_cast<uint16_t>(s));
  }
}

}  // namespace fsp

// Copyright 2026  The svsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "svsd/dsp.hpp"
#include "svsd/error.hpp"

namespace svsd {
namespace {

std::uint32_t ReadU32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<unsigned char> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void PutU16(std::vector<unsigned char> &out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void PutTag(std::vector<unsigned char> &out, const char *tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip load_audio(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    Fail(ErrorCode::kFormat, name + ": not a RIFF/WAVE file");

  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  const unsigned char *data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    std::uint32_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16)
        Fail(ErrorCode::kFormat, name + ": truncated fmt chunk");
      format = ReadU16(chunk + 8);
      channels = ReadU16(chunk + 10);
      rate = ReadU32(chunk + 12);
      bits = ReadU16(chunk + 22);
      // WAVE_FORMAT_EXTENSIBLE stores the real format tag in the sub-format.
      if (format == 0xfffe && size >= 26 && avail >= 26)
        format = ReadU16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, avail);
    }
    pos = body + size + (size & 1u);
  }

  if (format == 0) Fail(ErrorCode::kFormat, name + ": missing fmt chunk");
  if (data == nullptr) Fail(ErrorCode::kFormat, name + ": missing data chunk");
  if (format != 1 || bits != 16)
    Fail(ErrorCode::kFormat,
         name + ": unsupported encoding (need 16-bit PCM, got format " +
             std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  if (channels != 1 && channels != 2)
    Fail(ErrorCode::kFormat, name + ": unsupported channel count " +
                                 std::to_string(channels));
  if (rate == 0) Fail(ErrorCode::kFormat, name + ": zero sample rate");

  const std::size_t frame_bytes = 2u * static_cast<std::size_t>(channels);
  const std::size_t frames = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char *p = data + i * frame_bytes;
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      auto v = static_cast<std::int16_t>(ReadU16(p + 2 * c));
      acc += v / 32768.0;
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

void save_audio(const std::filesystem::path &path, const AudioClip &clip) {
  Require(clip.sample_rate > 0, ErrorCode::kInvalidArgument,
          "save_audio: sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  PutTag(out, "RIFF");
  PutU32(out, 36 + 2 * n);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(clip.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  PutTag(out, "data");
  PutU32(out, 2 * n);
  for (double x : clip.samples) {
    double q = std::nearbyint(x * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) Fail(ErrorCode::kIo, "cannot write " + path.string());
  os.write(reinterpret_cast<const char *>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace svsd

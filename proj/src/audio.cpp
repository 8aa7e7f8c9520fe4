#include "diafactor/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "diafactor/errors.hpp"

namespace diafactor {

void validate_audio(const AudioBuffer& a) {
  if (a.sample_rate < 8000)
    throw ValidationError("sample rate " + std::to_string(a.sample_rate) + " below 8000 Hz");
  if (!a.samples.allFinite()) throw ValidationError("audio contains non-finite samples");
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError(path + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_len = read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size())
      throw IoError(path + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw IoError(path + ": short fmt chunk");
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw IoError(path + ": missing fmt or data chunk");
  if (format != 1)
    throw IoError(path + ": unsupported encoding (format tag " + std::to_string(format) +
                  "), expected 16-bit PCM");
  if (channels != 1)
    throw IoError(path + ": expected mono, got " + std::to_string(channels) + " channels");
  if (bits != 16)
    throw IoError(path + ": expected 16-bit samples, got " + std::to_string(bits));

  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  const Eigen::Index n = data_len / 2;
  out.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::int16_t v =
        static_cast<std::int16_t>(read_u16(data + 2 * static_cast<std::size_t>(i)));
    out.samples[i] = static_cast<float>(v) / 32767.0f;
  }
  validate_audio(out);
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& a) {
  validate_audio(a);
  const std::uint32_t n = static_cast<std::uint32_t>(a.samples.size());
  const std::uint32_t data_len = n * 2;
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(a.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(a.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (Eigen::Index i = 0; i < a.samples.size(); ++i) {
    // round half away from zero; DSP stays in float, quantization only here
    long q = std::lround(static_cast<double>(a.samples[i]) * 32767.0);
    q = std::min<long>(32767, std::max<long>(-32768, q));
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write wav file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace diafactor

#include <bit>
#include <cstring>
#include <fstream>

#include "embercall/audio.hpp"

namespace embercall {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <class T>
T load(std::string_view bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) throw ValidationError("wav: truncated file");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

struct Layout {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Layout parse_layout(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw ValidationError("wav: not a RIFF/WAVE file");
  Layout layout;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const auto size = load<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      layout.format = load<std::uint16_t>(bytes, body);
      layout.channels = load<std::uint16_t>(bytes, body + 2);
      layout.sample_rate = load<std::uint32_t>(bytes, body + 4);
      layout.bits = load<std::uint16_t>(bytes, body + 14);
      if (layout.format == kFormatExtensible) {
        if (size < 26) throw ValidationError("wav: short extensible fmt chunk");
        layout.format = load<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      layout.data_offset = body;
      // Streams written without a final size carry 0 or 0xFFFFFFFF here.
      layout.data_size = std::min<std::size_t>(size, bytes.size() - body);
      have_data = true;
      if (have_fmt) break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || !have_data) throw ValidationError("wav: missing fmt or data chunk");
  if (layout.channels == 0) throw ValidationError("wav: zero channels");
  if (layout.sample_rate == 0) throw ValidationError("wav: zero sample rate");
  const bool pcm_ok = layout.format == kFormatPcm &&
                      (layout.bits == 8 || layout.bits == 16 || layout.bits == 24 || layout.bits == 32);
  const bool float_ok = layout.format == kFormatFloat && (layout.bits == 32 || layout.bits == 64);
  if (!pcm_ok && !float_ok)
    throw ValidationError("wav: unsupported encoding (format " + std::to_string(layout.format) + ", " +
                          std::to_string(layout.bits) + " bits)");
  return layout;
}

double decode_sample(const char* p, const Layout& layout) {
  if (layout.format == kFormatFloat) {
    if (layout.bits == 32) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (layout.bits) {
    case 8:
      return (static_cast<double>(static_cast<unsigned char>(*p)) - 128.0) / 128.0;
    case 16: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return v / 32768.0;
    }
    case 24: {
      const auto* u = reinterpret_cast<const unsigned char*>(p);
      std::int32_t v = (u[0] << 8) | (u[1] << 16) | (u[2] << 24);
      return (v >> 8) / 8388608.0;
    }
    default: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return v / 2147483648.0;
    }
  }
}

template <class T>
void store(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

WavInfo read_wav_info(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  // Headers are small; read enough to find fmt and the data chunk header.
  std::string head(1 << 16, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const auto file_size = static_cast<std::size_t>(fs::file_size(path));
  Layout layout;
  try {
    layout = parse_layout(head);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const auto declared = load<std::uint32_t>(head, layout.data_offset - 4);
  const std::size_t data = std::min<std::size_t>(declared, file_size - layout.data_offset);
  const std::size_t frame = static_cast<std::size_t>(layout.channels) * (layout.bits / 8);
  return {static_cast<int>(layout.sample_rate), layout.channels, data / frame};
}

AudioClip decode_wav(std::string_view bytes, std::string stem) {
  const Layout layout = parse_layout(bytes);
  const std::size_t width = layout.bits / 8;
  const std::size_t frame = width * layout.channels;
  const std::size_t frames = layout.data_size / frame;
  AudioClip clip;
  clip.stem = std::move(stem);
  clip.sample_rate = static_cast<int>(layout.sample_rate);
  clip.samples.resize(frames);
  const char* data = bytes.data() + layout.data_offset;
  for (std::size_t i = 0; i < frames; ++i) {
    if (layout.channels == 1) {
      clip.samples[i] = static_cast<float>(decode_sample(data + i * frame, layout));
      continue;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < layout.channels; ++c) acc += decode_sample(data + i * frame + c * width, layout);
    clip.samples[i] = static_cast<float>(acc / layout.channels);
  }
  return clip;
}

AudioClip read_wav(const fs::path& path) {
  try {
    return decode_wav(read_file(path), path.stem().string());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string encode_wav(const AudioClip& clip, WavEncoding encoding) {
  const bool is_float = encoding == WavEncoding::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(clip.samples.size() * block);
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  store<std::uint32_t>(out, 36 + data_size);
  out += "WAVEfmt ";
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
  store<std::uint16_t>(out, 1);
  store<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  store<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  store<std::uint16_t>(out, block);
  store<std::uint16_t>(out, bits);
  out += "data";
  store<std::uint32_t>(out, data_size);
  for (float s : clip.samples) {
    if (is_float) {
      store<float>(out, s);
    } else {
      const long q = std::lround(static_cast<double>(s) * 32768.0);
      store<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L)));
    }
  }
  return out;
}

void write_wav(const fs::path& path, const AudioClip& clip, WavEncoding encoding) {
  atomic_write_bytes(path, encode_wav(clip, encoding));
}

}  // namespace embercall

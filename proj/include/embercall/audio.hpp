#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embercall/util.hpp"

namespace embercall {

/// Mono sample buffer. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::string stem;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  /// Throws ValidationError unless samples are nonempty and finite and the
  /// rate is positive.
  void validate() const;
};

struct ChunkPart {
  int part_index = 0;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;  // exclusive

  std::size_t size() const { return end_sample - start_sample; }
};

struct ChunkPlan {
  std::string parent_stem;
  std::vector<ChunkPart> parts;

  std::string part_stem(std::size_t i) const;
};

/// "{stem}_part{NNN}".
std::string part_stem(std::string_view stem, int part_index);
/// Inverse of part_stem; returns the input unchanged if it has no part suffix.
std::string parent_stem(std::string_view stem);

/// Halves every segment at its midpoint while it lasts longer than
/// threshold_s. Parts are numbered in temporal order.
ChunkPlan recursive_chunk(std::size_t num_samples, int sample_rate, std::string stem, double threshold_s);
ChunkPlan recursive_chunk(const AudioClip& clip, double threshold_s);

/// Copies one part out of the parent clip; the result's stem is the part stem.
AudioClip extract_part(const AudioClip& clip, const ChunkPlan& plan, std::size_t i);

/// Appends seeded uniform noise in [-noise_amplitude, noise_amplitude] up to the
/// smallest multiple of multiple_s that is at least the current duration.
AudioClip pad_to_multiple(const AudioClip& clip, double multiple_s, float noise_amplitude, std::uint64_t seed);

struct Window {
  int start_time = 0;  // whole seconds
  std::span<const float> samples;
};

/// Views into `clip`, which must outlive the result.
std::vector<Window> slide_windows(const AudioClip& clip, int window_s, int hop_s);
/// floor((n - w) / h) + 1 in samples, 0 when the clip is shorter than a window.
std::size_t window_count(std::size_t num_samples, int sample_rate, int window_s, int hop_s);

/// Mean squared amplitude.
double energy(std::span<const float> samples);

/// Linear-interpolation resampler. Identity when the rates match.
AudioClip resample(const AudioClip& clip, int target_rate);

// WAV I/O. Reads PCM 8/16/24/32-bit and IEEE float 32/64, averaging channels
// to mono. Writes mono.

enum class WavEncoding { Float32, Pcm16 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  std::size_t frames = 0;
};

WavInfo read_wav_info(const fs::path& path);
AudioClip read_wav(const fs::path& path);
AudioClip decode_wav(std::string_view bytes, std::string stem);
std::string encode_wav(const AudioClip& clip, WavEncoding encoding = WavEncoding::Float32);
/// Atomic (temp file + rename).
void write_wav(const fs::path& path, const AudioClip& clip, WavEncoding encoding = WavEncoding::Float32);

}  // namespace embercall

#include "embercall/audio.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

namespace embercall {

void AudioClip::validate() const {
  if (sample_rate <= 0) throw ValidationError("audio clip '" + stem + "': sample rate must be positive");
  if (samples.empty()) throw ValidationError("audio clip '" + stem + "': no samples");
  for (float s : samples)
    if (!std::isfinite(s)) throw ValidationError("audio clip '" + stem + "': non-finite sample");
}

std::string part_stem(std::string_view stem, int part_index) {
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_part%03d", part_index);
  return std::string(stem) + suffix;
}

std::string parent_stem(std::string_view stem) {
  const auto pos = stem.rfind("_part");
  if (pos == std::string_view::npos) return std::string(stem);
  const auto digits = stem.substr(pos + 5);
  if (digits.size() < 3) return std::string(stem);
  for (char c : digits)
    if (c < '0' || c > '9') return std::string(stem);
  return std::string(stem.substr(0, pos));
}

std::string ChunkPlan::part_stem(std::size_t i) const {
  return embercall::part_stem(parent_stem, parts.at(i).part_index);
}

ChunkPlan recursive_chunk(std::size_t num_samples, int sample_rate, std::string stem, double threshold_s) {
  if (!(threshold_s > 0)) throw ValidationError("recursive_chunk: threshold must be positive");
  if (sample_rate <= 0) throw ValidationError("recursive_chunk: sample rate must be positive");
  ChunkPlan plan;
  plan.parent_stem = std::move(stem);
  const double rate = sample_rate;
  // Depth-first with the left half first keeps parts in temporal order.
  std::function<void(std::size_t, std::size_t)> visit = [&](std::size_t begin, std::size_t end) {
    const std::size_t len = end - begin;
    if (len >= 2 && static_cast<double>(len) / rate > threshold_s) {
      const std::size_t mid = begin + len / 2;
      visit(begin, mid);
      visit(mid, end);
      return;
    }
    plan.parts.push_back({static_cast<int>(plan.parts.size()), begin, end});
  };
  visit(0, num_samples);
  return plan;
}

ChunkPlan recursive_chunk(const AudioClip& clip, double threshold_s) {
  return recursive_chunk(clip.samples.size(), clip.sample_rate, clip.stem, threshold_s);
}

AudioClip extract_part(const AudioClip& clip, const ChunkPlan& plan, std::size_t i) {
  const ChunkPart& part = plan.parts.at(i);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.stem = plan.part_stem(i);
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(part.start_sample),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(part.end_sample));
  return out;
}

AudioClip pad_to_multiple(const AudioClip& clip, double multiple_s, float noise_amplitude, std::uint64_t seed) {
  if (!(multiple_s > 0)) throw ValidationError("pad_to_multiple: multiple must be positive");
  if (!(noise_amplitude >= 0)) throw ValidationError("pad_to_multiple: noise amplitude must be nonnegative");
  const auto step = static_cast<std::size_t>(std::llround(multiple_s * clip.sample_rate));
  if (step == 0) throw ValidationError("pad_to_multiple: multiple shorter than one sample");
  const std::size_t n = clip.samples.size();
  const std::size_t target = (n + step - 1) / step * step;
  AudioClip out = clip;
  out.samples.reserve(target);
  Rng rng(seed);
  const double amp = noise_amplitude;
  while (out.samples.size() < target) out.samples.push_back(static_cast<float>(amp * (2.0 * rng.uniform() - 1.0)));
  return out;
}

std::size_t window_count(std::size_t num_samples, int sample_rate, int window_s, int hop_s) {
  const auto w = static_cast<std::size_t>(window_s) * static_cast<std::size_t>(sample_rate);
  const auto h = static_cast<std::size_t>(hop_s) * static_cast<std::size_t>(sample_rate);
  if (num_samples < w) return 0;
  return (num_samples - w) / h + 1;
}

std::vector<Window> slide_windows(const AudioClip& clip, int window_s, int hop_s) {
  if (window_s <= 0 || hop_s <= 0) throw ValidationError("slide_windows: window and hop must be positive whole seconds");
  const auto w = static_cast<std::size_t>(window_s) * static_cast<std::size_t>(clip.sample_rate);
  if (clip.samples.size() < w)
    throw ValidationError("slide_windows: clip '" + clip.stem + "' is shorter than " + std::to_string(window_s) + " s");
  const std::size_t count = window_count(clip.samples.size(), clip.sample_rate, window_s, hop_s);
  std::vector<Window> out;
  out.reserve(count);
  const std::span<const float> all(clip.samples);
  for (std::size_t i = 0; i < count; ++i) {
    const int start = static_cast<int>(i) * hop_s;
    out.push_back({start, all.subspan(static_cast<std::size_t>(start) * static_cast<std::size_t>(clip.sample_rate), w)});
  }
  return out;
}

double energy(std::span<const float> samples) {
  if (samples.empty()) throw ValidationError("energy: empty sample buffer");
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * static_cast<double>(s);
  return acc / static_cast<double>(samples.size());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ValidationError("resample: target rate must be positive");
  if (clip.sample_rate == target_rate) return clip;
  const auto n = static_cast<std::uint64_t>(clip.samples.size());
  const auto src = static_cast<std::uint64_t>(clip.sample_rate);
  const auto dst = static_cast<std::uint64_t>(target_rate);
  const std::uint64_t m = (n * dst + src / 2) / src;
  AudioClip out;
  out.sample_rate = target_rate;
  out.stem = clip.stem;
  out.samples.resize(m);
  for (std::uint64_t i = 0; i < m; ++i) {
    // Source position i * src / dst, kept exact in integers.
    const std::uint64_t num = i * src;
    const std::uint64_t idx = num / dst;
    if (idx + 1 >= n) {
      out.samples[i] = clip.samples[n - 1];
      continue;
    }
    const double frac = static_cast<double>(num % dst) / static_cast<double>(dst);
    const double a = clip.samples[idx];
    const double b = clip.samples[idx + 1];
    out.samples[i] = static_cast<float>(a + frac * (b - a));
  }
  return out;
}

}  // namespace embercall

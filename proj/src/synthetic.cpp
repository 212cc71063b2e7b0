#include "embercall/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace embercall {

std::vector<SyntheticSpecies> synthetic_species(int count) {
  static constexpr int kBandsUsed[] = {3, 8, 15, 25, 11, 20};
  if (count < 1 || count > 6) throw ValidationError("synthetic corpus supports 1..6 species");
  std::vector<SyntheticSpecies> out;
  for (int i = 0; i < count; ++i) {
    const int band = kBandsUsed[i];
    char code[16];
    std::snprintf(code, sizeof code, "syn%03d", band);
    out.push_back({code, band, SyntheticEmbedder::band_low_hz(band) + SyntheticEmbedder::band_width_hz() / 2});
  }
  return out;
}

AudioClip synth_calls(const std::string& stem, double duration_s, int sample_rate, double center_hz,
                      std::span<const CallSegment> segments, double call_amplitude, double noise_amplitude,
                      std::uint64_t seed, double sweep_hz) {
  if (!(duration_s > 0.0) || sample_rate <= 0) throw ValidationError("synth: duration and rate must be positive");
  AudioClip clip;
  clip.stem = stem;
  clip.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  clip.samples.assign(n, 0.0f);
  Rng rng(seed);
  std::vector<double> x(n, 0.0);
  for (auto& v : x) v = noise_amplitude * rng.uniform(-1.0, 1.0);

  const double ramp_s = 0.05;
  for (const auto& seg : segments) {
    const auto a = static_cast<std::size_t>(std::max(0.0, seg.start_s) * sample_rate);
    const auto b = std::min(n, static_cast<std::size_t>(seg.end_s * sample_rate));
    if (b <= a) continue;
    const double len = static_cast<double>(b - a) / sample_rate;
    double phase = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      const double t = static_cast<double>(i - a) / sample_rate;
      // Sweep down and back up once per segment.
      const double f = center_hz + sweep_hz * std::cos(2.0 * M_PI * t / len);
      phase += 2.0 * M_PI * f / sample_rate;
      double env = 1.0;
      if (t < ramp_s) env = 0.5 - 0.5 * std::cos(M_PI * t / ramp_s);
      if (len - t < ramp_s) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (len - t) / ramp_s));
      x[i] += call_amplitude * env * std::sin(phase);
    }
  }
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(std::clamp(x[i], -1.0, 1.0));
  return clip;
}

std::vector<CorpusTrack> write_synthetic_corpus(const fs::path& dir, const SyntheticCorpusOptions& options) {
  if (options.call_tracks_per_species < 0 || options.noise_tracks < 0)
    throw ValidationError("synthetic corpus: track counts must be >= 0");
  const auto species = synthetic_species(options.species);
  fs::create_directories(dir / "audio");
  std::vector<CorpusTrack> corpus;
  const double d = options.duration_s;
  // Two calls separated by a gap, offset per track so windows differ.
  for (const auto& sp : species) {
    for (int t = 0; t < options.call_tracks_per_species; ++t) {
      const std::string stem = "SYN" + sp.code.substr(3) + "C" + std::to_string(t);
      const double shift = 0.5 * t;
      const CallSegment segs[] = {{d * 0.08 + shift, d * 0.42 + shift}, {d * 0.58 + shift, d * 0.92}};
      const auto clip = synth_calls(stem, d, options.sample_rate, sp.center_hz, segs, options.call_amplitude,
                                    options.noise_amplitude, derive_seed({"synthetic-track", stem, std::to_string(options.seed)}));
      const fs::path wav = dir / "audio" / (stem + ".wav");
      write_wav(wav, clip, WavEncoding::Pcm16);
      corpus.push_back({stem, fs::path("audio") / (stem + ".wav"), sp.code, {}});
    }
  }
  for (int t = 0; t < options.noise_tracks; ++t) {
    const std::string stem = "SYNNOISE" + std::to_string(t);
    const auto clip = synth_calls(stem, d, options.sample_rate, 0.0, {}, 0.0, options.noise_amplitude,
                                  derive_seed({"synthetic-track", stem, std::to_string(options.seed)}));
    write_wav(dir / "audio" / (stem + ".wav"), clip, WavEncoding::Pcm16);
    corpus.push_back({stem, fs::path("audio") / (stem + ".wav"), species[static_cast<std::size_t>(t) % species.size()].code, {}});
  }
  save_corpus(dir / "corpus.csv", corpus);
  for (auto& t : corpus) t.wav_path = dir / t.wav_path;
  return corpus;
}

AudioClip synth_soundscape(const std::string& stem, const SoundscapeOptions& options) {
  const auto species = synthetic_species(options.species);
  Rng rng(options.seed);
  std::vector<CallSegment> segs;
  std::vector<double> centers;
  for (int i = 0; i < options.calls; ++i) {
    const double start = rng.uniform(0.0, std::max(0.0, options.duration_s - 2.0));
    segs.push_back({start, start + 2.0});
    centers.push_back(species[rng.index(species.size())].center_hz);
  }
  AudioClip clip = synth_calls(stem, options.duration_s, options.sample_rate, 0.0, {}, 0.0, options.noise_amplitude,
                               derive_seed({"soundscape", stem, std::to_string(options.seed)}));
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto call = synth_calls(stem, options.duration_s, options.sample_rate, centers[i], std::span(&segs[i], 1),
                                  options.call_amplitude, 0.0, 0);
    for (std::size_t s = 0; s < clip.samples.size(); ++s)
      clip.samples[s] = std::clamp(clip.samples[s] + call.samples[s], -1.0f, 1.0f);
  }
  return clip;
}

}  // namespace embercall

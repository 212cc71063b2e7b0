#pragma once

#include <string>
#include <vector>

#include "embercall/build.hpp"

namespace embercall {

/// A synthetic species calls with a narrow chirp centred in one band of the
/// synthetic embedder, so its code matches the synthetic taxonomy entry of
/// that band ("syn003" calls in band 3).
struct SyntheticSpecies {
  std::string code;
  int band = 0;
  double center_hz = 0.0;
};

/// Up to 6 species on well separated bands below 10 kHz.
std::vector<SyntheticSpecies> synthetic_species(int count = 4);

struct CallSegment {
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Linear chirp sweeping center +/- sweep_hz within each segment (raised-cosine
/// edges), plus uniform white noise over the whole clip.
AudioClip synth_calls(const std::string& stem, double duration_s, int sample_rate, double center_hz,
                      std::span<const CallSegment> segments, double call_amplitude, double noise_amplitude,
                      std::uint64_t seed, double sweep_hz = 50.0);

struct SyntheticCorpusOptions {
  int species = 4;
  int call_tracks_per_species = 2;
  int noise_tracks = 4;
  double duration_s = 24.0;
  int sample_rate = 32000;
  double call_amplitude = 0.3;
  double noise_amplitude = 0.01;
  std::uint64_t seed = 7;
};

/// Writes call tracks (two long calls each) and noise-only tracks as WAV
/// files plus `corpus.csv` under dir, and returns the corpus. Noise-only
/// tracks take their primary labels round-robin from the species list.
std::vector<CorpusTrack> write_synthetic_corpus(const fs::path& dir, const SyntheticCorpusOptions& options = {});

struct SoundscapeOptions {
  double duration_s = 600.0;
  int sample_rate = 32000;
  double noise_amplitude = 0.01;
  double call_amplitude = 0.3;
  int calls = 0;  // number of 2 s calls from random species at random times
  int species = 4;
  std::uint64_t seed = 11;
};

AudioClip synth_soundscape(const std::string& stem, const SoundscapeOptions& options);

}  // namespace embercall

#pragma once

#include <unistd.h>

#include <cmath>
#include <string>

#include "embercall/audio.hpp"

namespace embercall::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("embercall-test-" + tag + "-" + std::to_string(counter()++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static int& counter() {
    static int n = static_cast<int>(::getpid()) * 1000;
    return n;
  }
  fs::path path_;
};

inline AudioClip noise_clip(std::size_t n, int rate, std::uint64_t seed, double amplitude = 0.5,
                            const std::string& stem = "clip") {
  Rng rng(seed);
  AudioClip c;
  c.sample_rate = rate;
  c.stem = stem;
  c.samples.resize(n);
  for (auto& s : c.samples) s = static_cast<float>(rng.uniform(-amplitude, amplitude));
  return c;
}

inline AudioClip tone_clip(double seconds, int rate, double hz, double amplitude = 0.5, const std::string& stem = "tone") {
  AudioClip c;
  c.sample_rate = rate;
  c.stem = stem;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate));
  return c;
}

}  // namespace embercall::test

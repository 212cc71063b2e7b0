#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace embercall {

namespace fs = std::filesystem;

/// Bad input from the caller: flags, config values, malformed files. Maps to
/// CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Something failed while doing the work (I/O, backend, numerics). Maps to
/// CLI exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Stable 64-bit seed derived from a list of parts. Identical across runs and
/// platforms, unlike std::hash.
std::uint64_t derive_seed(std::initializer_list<std::string_view> parts);

/// Deterministic generator. The distributions are computed here rather than
/// through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Writes through a temp file in the same directory and renames it into
/// place. If `write` throws, the temp file is removed and nothing appears at
/// `path`.
void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& write);
void atomic_write_bytes(const fs::path& path, std::string_view bytes);

std::string read_file(const fs::path& path);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
std::vector<std::vector<std::string>> read_csv(const fs::path& path);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

std::vector<std::string> split(std::string_view s, char sep, bool skip_empty = true);
std::string trim(std::string_view s);

/// Shortest round-trip text for a float or double.
std::string format_number(double v);
std::string format_number(float v);

}  // namespace embercall

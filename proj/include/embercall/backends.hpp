#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embercall/audio.hpp"

namespace embercall {

inline constexpr int kWindowSeconds = 3;
inline constexpr int kHopSeconds = 1;
inline constexpr int kDefaultEmbedDim = 320;
inline constexpr int kDefaultClassDim = 3337;
inline constexpr int kDefaultNumSources = 4;
inline constexpr int kSeparatorRate = 32000;
inline constexpr int kEmbedderRate = 48000;

/// Environment variable naming an external backend executable.
inline constexpr const char* kBackendEnvVar = "EMBERCALL_BACKEND_CMD";

struct SeparationResult {
  std::vector<AudioClip> sources;

  /// "source0" -> 0, ...; throws ValidationError on an unknown name.
  std::size_t source_index_of(std::string_view name) const;
};

std::string source_name(std::size_t index);

struct EmbedderOutput {
  int start_time = 0;
  std::vector<float> embedding;
  std::vector<float> logits;
};

/// Source separation backend. Implementations are stateless after
/// construction and safe to share across threads.
class SourceSeparator {
 public:
  virtual ~SourceSeparator() = default;
  virtual int sample_rate() const = 0;
  /// `clip` must already be at sample_rate(); num_sources is 4 or 8.
  virtual SeparationResult separate(const AudioClip& clip, int num_sources) const = 0;
  virtual std::string describe() const = 0;
};

/// Embedding/classification backend scoring 3 s windows at a 1 s hop.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int sample_rate() const = 0;
  virtual int embed_dim() const = 0;
  virtual int class_dim() const = 0;
  /// `clip` must be at sample_rate() and at least 3 s long.
  virtual std::vector<EmbedderOutput> embed_windows(const AudioClip& clip) const = 0;
  virtual std::string describe() const = 0;
};

/// Splits the spectrum into contiguous frequency bands with hard spectral
/// masks. The last band is the residual, so the sources sum to the input.
class SyntheticSeparator final : public SourceSeparator {
 public:
  int sample_rate() const override { return kSeparatorRate; }
  SeparationResult separate(const AudioClip& clip, int num_sources) const override;
  std::string describe() const override { return "synthetic-bandsplit"; }

  /// Band edges in Hz for `num_sources` bands at `rate`; size num_sources + 1.
  static std::vector<double> band_edges(int num_sources, int rate);
};

/// Spectrum-plus-projection stand-in for a pretrained audio classifier.
///
/// Each window is summarized by a 64-band average magnitude spectrum
/// (960-sample Hann frames, i.e. 50 frames per second at 48 kHz), normalized
/// to unit mass with a small floor. The embedding is a fixed Gaussian
/// projection of that profile. The first 64 logit rows are tied to the
/// projection so class k scores roughly `logit_scale * profile[k]`: a window
/// dominated by one band yields a confident prediction and broadband noise
/// does not. The remaining classes get small seeded random weights and every
/// class gets a seeded bias.
class SyntheticEmbedder final : public Embedder {
 public:
  static constexpr int kBands = 64;
  static constexpr int kFramesPerSecond = 50;

  struct Options {
    int embed_dim = kDefaultEmbedDim;
    int class_dim = kDefaultClassDim;
    std::uint64_t seed = 20230918;
    double logit_scale = 16.0;
    double profile_floor = 1e-4;
  };

  SyntheticEmbedder();
  explicit SyntheticEmbedder(Options options);

  int sample_rate() const override { return kEmbedderRate; }
  int embed_dim() const override { return options_.embed_dim; }
  int class_dim() const override { return options_.class_dim; }
  std::vector<EmbedderOutput> embed_windows(const AudioClip& clip) const override;
  std::string describe() const override { return "synthetic-spectral-projection"; }

  /// Lower edge (Hz) of spectral band k and its width; band k covers
  /// [band_low_hz(k), band_low_hz(k) + band_width_hz()).
  static double band_low_hz(int k);
  static double band_width_hz();

 private:
  Options options_;
  std::vector<double> projection_;  // embed_dim x kBands, row-major
  std::vector<double> classifier_;  // class_dim x embed_dim, row-major
  std::vector<double> bias_;        // class_dim
};

struct TaxonomyEntry {
  int class_index = 0;
  std::string label;
  std::optional<std::string> species;
};

/// Backend class -> competition species code, plus the ordered species list.
class TaxonomyMap {
 public:
  TaxonomyMap() = default;
  TaxonomyMap(std::vector<TaxonomyEntry> entries, std::vector<std::string> species);

  /// CSV `backend_class_index,backend_label,species_code` (header optional,
  /// empty species_code = unmapped). The species list is the distinct codes in
  /// order of first appearance.
  static TaxonomyMap load_csv(const fs::path& path);
  void save_csv(const fs::path& path) const;

  /// class_dim backend classes; classes [0, species_count) map to codes
  /// "syn000".. and the rest are unmapped.
  static TaxonomyMap synthetic(int class_dim = kDefaultClassDim, int species_count = 264);

  const std::string& label_of(int class_index) const;
  std::optional<std::string> species_of(int class_index) const;
  const std::vector<std::string>& species() const { return species_; }
  std::size_t size() const { return entries_.size(); }
  bool has_species(std::string_view code) const;

 private:
  std::vector<TaxonomyEntry> entries_;  // indexed by class_index
  std::vector<std::string> species_;
};

/// Max-subtracted softmax computed in double precision.
template <class T>
std::vector<double> softmax(std::span<const T> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

inline std::vector<double> softmax(const std::vector<float>& logits) {
  return softmax(std::span<const float>(logits));
}
inline std::vector<double> softmax(const std::vector<double>& logits) {
  return softmax(std::span<const double>(logits));
}

/// max softmax probability, without materializing the vector.
double max_probability(std::span<const float> logits);

/// Runs an external executable speaking the NDJSON backend protocol:
/// `<cmd> --input <wav> --mode separate|embed`.
class SubprocessSeparator final : public SourceSeparator {
 public:
  explicit SubprocessSeparator(std::string command) : command_(std::move(command)) {}
  int sample_rate() const override { return kSeparatorRate; }
  SeparationResult separate(const AudioClip& clip, int num_sources) const override;
  std::string describe() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
};

class SubprocessEmbedder final : public Embedder {
 public:
  SubprocessEmbedder(std::string command, int embed_dim = kDefaultEmbedDim, int class_dim = kDefaultClassDim)
      : command_(std::move(command)), embed_dim_(embed_dim), class_dim_(class_dim) {}
  int sample_rate() const override { return kEmbedderRate; }
  int embed_dim() const override { return embed_dim_; }
  int class_dim() const override { return class_dim_; }
  std::vector<EmbedderOutput> embed_windows(const AudioClip& clip) const override;
  std::string describe() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
  int embed_dim_;
  int class_dim_;
};

/// One NDJSON line of the embed protocol.
std::string encode_embedder_output(const EmbedderOutput& out);
EmbedderOutput decode_embedder_output(std::string_view line, int embed_dim, int class_dim);
std::vector<EmbedderOutput> read_embedder_outputs(const fs::path& path, int embed_dim, int class_dim);
void write_embedder_outputs(const fs::path& path, std::span<const EmbedderOutput> outputs);

struct Backends {
  std::shared_ptr<const SourceSeparator> separator;
  std::shared_ptr<const Embedder> embedder;
};

/// Subprocess backends when EMBERCALL_BACKEND_CMD is set, synthetic otherwise.
Backends make_backends();
Backends make_synthetic_backends();

}  // namespace embercall
